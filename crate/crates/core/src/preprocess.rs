//! Device phase-offset removal and subcarrier reduction.
//!
//! The chain is `rebalance_static -> conjugate_multiply -> bandpass ->
//! pca_first_component`. Every step commutes with a per-packet unit-modulus
//! factor shared by the antennas of one receiver, so the output does not
//! depend on the random device phase offset.

use num_complex::{Complex32, Complex64};

use crate::csi::CsiStream;
use crate::error::{precondition, ProcessError};

pub mod filter;
pub mod pca;

pub use filter::{bandpass, FilterKind, FilterSpec, Sos};
pub use pca::{pca_first_component, PcaResult};

/// Strengths of the static-path adjustment, as fractions of each series'
/// mean magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebalanceParams {
    /// Subtracted from the non-reference antennas. In `[0, 1)`.
    pub alpha_frac: f64,
    /// Added to the reference antenna. `>= 0`.
    pub beta_frac: f64,
}

impl Default for RebalanceParams {
    fn default() -> Self {
        RebalanceParams {
            alpha_frac: 0.3,
            beta_frac: 0.3,
        }
    }
}

impl RebalanceParams {
    pub fn validate(&self) -> Result<(), ProcessError> {
        if !(0.0..1.0).contains(&self.alpha_frac) {
            return Err(precondition(format!("alpha_frac {} not in [0,1)", self.alpha_frac)));
        }
        if !(self.beta_frac >= 0.0 && self.beta_frac.is_finite()) {
            return Err(precondition(format!("beta_frac {} must be >= 0", self.beta_frac)));
        }
        Ok(())
    }
}

/// Magnitude floor for attenuated antennas, relative to the series mean.
pub const REBALANCE_FLOOR: f64 = 0.05;

/// Strengthens the reference antenna (0) and weakens the others.
///
/// For each (antenna, subcarrier) series with mean magnitude μ, the
/// reference gets `|H| + β·μ` and every other antenna gets
/// `max(|H| - α·μ, 0.05·μ)`. Phases are untouched.
pub fn rebalance_static(stream: &CsiStream, params: RebalanceParams) -> Result<CsiStream, ProcessError> {
    params.validate()?;
    if stream.n_antennas() < 2 {
        return Err(precondition("rebalancing needs at least 2 antennas"));
    }
    if params.alpha_frac == 0.0 && params.beta_frac == 0.0 {
        return Ok(stream.clone());
    }
    let (na, ns, n) = (stream.n_antennas(), stream.n_subcarriers(), stream.n_packets());
    let mut out: Vec<Complex32> = stream.samples().to_vec();
    for a in 0..na {
        for s in 0..ns {
            let mean = (0..n)
                .map(|t| {
                    let h = stream.get(t, a, s);
                    ((h.re as f64).powi(2) + (h.im as f64).powi(2)).sqrt()
                })
                .sum::<f64>()
                / n.max(1) as f64;
            for t in 0..n {
                let idx = stream.index(t, a, s);
                let h = stream.samples()[idx];
                let h64 = Complex64::new(h.re as f64, h.im as f64);
                let mag = (h64.re * h64.re + h64.im * h64.im).sqrt();
                let target = if a == 0 {
                    mag + params.beta_frac * mean
                } else {
                    (mag - params.alpha_frac * mean).max(REBALANCE_FLOOR * mean)
                };
                let scaled = if mag > 0.0 {
                    h64 * (target / mag)
                } else {
                    // no phase to keep; place the magnitude on the real axis
                    Complex64::new(target, 0.0)
                };
                out[idx] = Complex32::new(scaled.re as f32, scaled.im as f32);
            }
        }
    }
    Ok(stream.with_samples(out)?)
}

/// Phase-offset-free pair streams, laid out `[time][pair]`.
///
/// Pair `p` is `(antenna, subcarrier)` of the p-th non-reference antenna in
/// ascending order, subcarriers contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateStream {
    pub sample_rate_hz: f64,
    pub n_time: usize,
    pub n_pairs: usize,
    pub data: Vec<Complex64>,
}

impl ConjugateStream {
    pub fn new(sample_rate_hz: f64, n_time: usize, n_pairs: usize, data: Vec<Complex64>) -> Result<Self, ProcessError> {
        if data.len() != n_time * n_pairs {
            return Err(precondition("data length must be n_time x n_pairs"));
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(precondition("conjugate stream must be finite"));
        }
        Ok(ConjugateStream {
            sample_rate_hz,
            n_time,
            n_pairs,
            data,
        })
    }

    /// Builds a stream from per-pair series of equal length.
    pub fn from_series(sample_rate_hz: f64, series: &[Vec<Complex64>]) -> Result<Self, ProcessError> {
        let n_pairs = series.len();
        let n_time = series.first().map_or(0, Vec::len);
        if series.iter().any(|s| s.len() != n_time) {
            return Err(precondition("all pair series must have the same length"));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n_time * n_pairs];
        for (p, s) in series.iter().enumerate() {
            for (t, v) in s.iter().enumerate() {
                data[t * n_pairs + p] = *v;
            }
        }
        Self::new(sample_rate_hz, n_time, n_pairs, data)
    }

    pub fn series(&self, pair: usize) -> Vec<Complex64> {
        (0..self.n_time).map(|t| self.data[t * self.n_pairs + pair]).collect()
    }

    pub fn set_series(&mut self, pair: usize, values: &[Complex64]) {
        for (t, v) in values.iter().enumerate() {
            self.data[t * self.n_pairs + pair] = *v;
        }
    }
}

/// `C_m(f,t) = H̃_m(f,t) · conj(H̃_ref(f,t))` for every non-reference antenna.
pub fn conjugate_multiply(stream: &CsiStream, reference_antenna: usize) -> Result<ConjugateStream, ProcessError> {
    let (na, ns, n) = (stream.n_antennas(), stream.n_subcarriers(), stream.n_packets());
    if reference_antenna >= na {
        return Err(precondition(format!(
            "reference antenna {reference_antenna} out of range for {na} antennas"
        )));
    }
    let others: Vec<usize> = (0..na).filter(|&a| a != reference_antenna).collect();
    let n_pairs = others.len() * ns;
    let mut data = Vec::with_capacity(n * n_pairs);
    for t in 0..n {
        for &a in &others {
            for s in 0..ns {
                let h = stream.get(t, a, s);
                let r = stream.get(t, reference_antenna, s);
                let h = Complex64::new(h.re as f64, h.im as f64);
                let r = Complex64::new(r.re as f64, r.im as f64);
                data.push(h * r.conj());
            }
        }
    }
    ConjugateStream::new(stream.sample_rate_hz(), n, n_pairs, data)
}
