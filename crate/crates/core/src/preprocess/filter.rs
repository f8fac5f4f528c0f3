//! Butterworth band-pass design and zero-phase filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ConjugateStream;
use crate::error::{precondition, ProcessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Butterworth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Order of the low-pass prototype; the band-pass has twice as many poles.
    pub order: usize,
    pub kind: FilterKind,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            low_hz: 2.0,
            high_hz: 60.0,
            order: 4,
            kind: FilterKind::Butterworth,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<(), ProcessError> {
        if !(0.0 < self.low_hz && self.low_hz < self.high_hz && self.high_hz < sample_rate_hz / 2.0) {
            return Err(precondition(format!(
                "need 0 < {} < {} < {} (Nyquist)",
                self.low_hz,
                self.high_hz,
                sample_rate_hz / 2.0
            )));
        }
        if self.order == 0 {
            return Err(precondition("filter order must be at least 1"));
        }
        Ok(())
    }
}

/// Cascade of second-order sections, each `[b0, b1, b2, a0=1, a1, a2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 6]>,
}

/// Largest pole radius accepted as stable.
const MAX_POLE_RADIUS: f64 = 1.0 - 1e-9;

impl Sos {
    /// Digital Butterworth band-pass via the bilinear transform with
    /// pre-warped band edges.
    pub fn butterworth_bandpass(spec: &FilterSpec, sample_rate_hz: f64) -> Result<Self, ProcessError> {
        spec.validate(sample_rate_hz)?;
        let n = spec.order;
        let fs2 = 2.0 * sample_rate_hz;
        let w1 = fs2 * (PI * spec.low_hz / sample_rate_hz).tan();
        let w2 = fs2 * (PI * spec.high_hz / sample_rate_hz).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        // analog prototype poles on the left half of the unit circle
        let proto: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64))
            .collect();
        // low-pass -> band-pass: s^2 - p·bw·s + w0^2 = 0
        let mut analog = Vec::with_capacity(2 * n);
        for p in &proto {
            let half = p * bw / 2.0;
            let disc = (half * half - w0sq).sqrt();
            analog.push(half + disc);
            analog.push(half - disc);
        }
        // n zeros at s = 0, n at infinity; analog gain bw^n
        let mut gain = Complex64::new(bw.powi(n as i32), 0.0);
        let mut digital = Vec::with_capacity(2 * n);
        for p in &analog {
            gain /= fs2 - p;
            digital.push((fs2 + p) / (fs2 - p));
        }
        // finite zeros at s=0 map through (fs2 - 0)
        gain *= fs2.powi(n as i32);
        let gain = gain.re;

        if let Some(p) = digital
            .iter()
            .find(|p| p.norm() >= MAX_POLE_RADIUS || !p.norm().is_finite())
        {
            return Err(ProcessError::UnstableFilter(format!(
                "pole radius {} for band {}-{} Hz at fs {sample_rate_hz}",
                p.norm(),
                spec.low_hz,
                spec.high_hz
            )));
        }

        // pair each pole in the upper half plane with its conjugate
        let mut upper: Vec<Complex64> = digital.iter().copied().filter(|p| p.im > 0.0).collect();
        let mut real: Vec<f64> = digital.iter().filter(|p| p.im == 0.0).map(|p| p.re).collect();
        upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        real.sort_by(|a, b| a.total_cmp(b));
        let mut sections = Vec::with_capacity(n);
        for p in upper {
            sections.push([1.0, 0.0, -1.0, 1.0, -2.0 * p.re, p.norm_sqr()]);
        }
        for pair in real.chunks(2) {
            let (a, b) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
            sections.push([1.0, 0.0, -1.0, 1.0, -(a + b), a * b]);
        }
        if sections.len() != n {
            return Err(ProcessError::UnstableFilter(
                "pole pairing failed; cutoffs too close together or to Nyquist".into(),
            ));
        }
        for c in &mut sections[0][..3] {
            *c *= gain;
        }
        Ok(Sos { sections })
    }

    /// Frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / sample_rate_hz);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| (s[0] + s[1] * z1 + s[2] * z2) / (s[3] + s[4] * z1 + s[5] * z2))
            .product()
    }

    /// Steady-state initial conditions for a unit step input, per section.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let (b0, b1, b2, a1, a2) = (s[0], s[1], s[2], s[4], s[5]);
                // (I - companion(a)^T) zi = b[1:] - a[1:] b0
                let (r0, r1) = (b1 - a1 * b0, b2 - a2 * b0);
                let det = (1.0 + a1) + a2;
                let z0 = (r0 + r1) / det;
                let z1 = r1 - a2 * z0;
                let zi = [scale * z0, scale * z1];
                scale *= (b0 + b1 + b2) / (1.0 + a1 + a2);
                zi
            })
            .collect()
    }

    /// Causal filtering in place of `channels` interleaved series laid out
    /// `[time][channel]`, transposed direct form II, each channel starting
    /// from the steady state of a constant input equal to its first sample.
    fn filter_in_place(&self, x: &mut [f64], channels: usize, zi: &[[f64; 2]]) {
        let x0: Vec<f64> = x[..channels.min(x.len())].to_vec();
        let mut z0 = vec![0.0; channels];
        let mut z1 = vec![0.0; channels];
        for (s, z) in self.sections.iter().zip(zi) {
            let (b0, b1, b2, a1, a2) = (s[0], s[1], s[2], s[4], s[5]);
            for c in 0..x0.len() {
                z0[c] = z[0] * x0[c];
                z1[c] = z[1] * x0[c];
            }
            for row in x.chunks_exact_mut(channels) {
                for ((v, s0), s1) in row.iter_mut().zip(&mut z0).zip(&mut z1) {
                    let xin = *v;
                    let y = b0 * xin + *s0;
                    *s0 = b1 * xin - a1 * y + *s1;
                    *s1 = b2 * xin - a2 * y;
                    *v = y;
                }
            }
        }
    }

    /// Samples of odd extension added on each side before filtering.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, ProcessError> {
        self.filtfilt_interleaved(x, 1)
    }

    /// [`Sos::filtfilt`] applied independently to `channels` series stored
    /// `[time][channel]`.
    pub fn filtfilt_interleaved(&self, x: &[f64], channels: usize) -> Result<Vec<f64>, ProcessError> {
        if channels == 0 || !x.len().is_multiple_of(channels) {
            return Err(precondition(
                "interleaved length must be a multiple of the channel count",
            ));
        }
        let n = x.len() / channels;
        let pad = self.pad_len();
        if n <= pad {
            return Err(precondition(format!(
                "series of {n} samples is too short for zero-phase filtering (needs > {pad})"
            )));
        }
        let zi = self.step_state();
        let at = |t: usize| &x[t * channels..(t + 1) * channels];
        let mut ext = Vec::with_capacity((n + 2 * pad) * channels);
        for i in (1..=pad).rev() {
            ext.extend(at(0).iter().zip(at(i)).map(|(a, b)| 2.0 * a - b));
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.extend(at(n - 1).iter().zip(at(n - 1 - i)).map(|(a, b)| 2.0 * a - b));
        }
        self.filter_in_place(&mut ext, channels, &zi);
        reverse_rows(&mut ext, channels);
        self.filter_in_place(&mut ext, channels, &zi);
        reverse_rows(&mut ext, channels);
        Ok(ext[pad * channels..(pad + n) * channels].to_vec())
    }
}

fn reverse_rows(x: &mut [f64], channels: usize) {
    let rows = x.len() / channels;
    for r in 0..rows / 2 {
        let (head, tail) = x.split_at_mut((rows - 1 - r) * channels);
        head[r * channels..(r + 1) * channels].swap_with_slice(&mut tail[..channels]);
    }
}

/// Zero-phase Butterworth band-pass of every pair stream; real and
/// imaginary parts are filtered independently with the same real filter.
pub fn bandpass(cstream: &ConjugateStream, spec: &FilterSpec) -> Result<ConjugateStream, ProcessError> {
    let sos = Sos::butterworth_bandpass(spec, cstream.sample_rate_hz)?;
    // re and im of every pair as 2 * n_pairs interleaved real channels
    let flat: Vec<f64> = cstream.data.iter().flat_map(|c| [c.re, c.im]).collect();
    let filtered = sos.filtfilt_interleaved(&flat, 2 * cstream.n_pairs)?;
    let data = filtered.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    ConjugateStream::new(cstream.sample_rate_hz, cstream.n_time, cstream.n_pairs, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(fs: f64) -> Sos {
        Sos::butterworth_bandpass(&FilterSpec::default(), fs).unwrap()
    }

    #[test]
    fn four_sections_stable() {
        let sos = design(1000.0);
        assert_eq!(sos.sections.len(), 4);
        for s in &sos.sections {
            // roots of z^2 + a1 z + a2 inside the unit circle
            assert!(s[5].abs() < 1.0);
        }
    }

    #[test]
    fn response_shape() {
        let sos = design(1000.0);
        assert!(sos.response(0.0, 1000.0).norm() < 1e-12);
        // -3 dB at both band edges (pre-warped design)
        for f in [2.0, 60.0] {
            let g = sos.response(f, 1000.0).norm();
            assert!((g - 0.5f64.sqrt()).abs() < 1e-6, "edge {f}: {g}");
        }
        let center = (2.0f64 * 60.0).sqrt();
        assert!((sos.response(center, 1000.0).norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cutoff_above_nyquist_rejected() {
        let spec = FilterSpec {
            high_hz: 600.0,
            ..FilterSpec::default()
        };
        assert!(Sos::butterworth_bandpass(&spec, 1000.0).is_err());
    }

    #[test]
    fn near_nyquist_is_unstable() {
        let spec = FilterSpec {
            low_hz: 499.999_999_9,
            high_hz: 499.999_999_99,
            ..FilterSpec::default()
        };
        assert!(Sos::butterworth_bandpass(&spec, 1000.0).is_err());
    }

    #[test]
    fn constant_is_rejected_exactly() {
        let sos = design(1000.0);
        let y = sos.filtfilt(&vec![3.5; 500]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9), "{:?}", &y[..5]);
    }

    #[test]
    fn too_short_series() {
        let sos = design(1000.0);
        assert!(sos.filtfilt(&[1.0; 27]).is_err());
    }
}
