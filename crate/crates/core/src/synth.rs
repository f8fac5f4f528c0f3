//! Synthetic CSI with a known Doppler trajectory.
//!
//! Each antenna sees a static gain per subcarrier plus one moving reflection
//! whose phase advances by `2π ∫ f_D`. Every packet may then be rotated by a
//! random device phase offset that is shared across the antennas of the
//! receiver, which is exactly what conjugate multiplication removes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::csi::{CsiStream, DomainMeta, Environment, GestureLabel, RecordingSession};
use crate::error::{precondition, ProcessError};
use crate::seed::{self, tags};

/// Carrier wavelength of the 5.3 GHz band, in metres.
pub const DEFAULT_WAVELENGTH_M: f64 = 0.0566;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1000.0;
/// Largest Doppler shift a hand gesture is expected to produce.
pub const MAX_GESTURE_DFS_HZ: f64 = 60.0;
/// Relative velocity jitter applied per session.
pub const VELOCITY_JITTER: f64 = 0.10;

/// Doppler shift (Hz) induced by a reflection-path-length trajectory (m).
///
/// `f_D = -(1/λ) dΔpath/dt`, with central differences inside and one-sided
/// differences at the two ends.
pub fn dfs_from_trajectory(
    path_delta: &[f64],
    wavelength_m: f64,
    sample_rate_hz: f64,
) -> Result<Vec<f64>, ProcessError> {
    if !(wavelength_m > 0.0) {
        return Err(ProcessError::Domain(format!(
            "wavelength must be positive, got {wavelength_m}"
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(ProcessError::Domain(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    let n = path_delta.len();
    if n < 2 {
        return Err(precondition("trajectory needs at least 2 samples"));
    }
    let k = -sample_rate_hz / wavelength_m;
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                k * (path_delta[1] - path_delta[0])
            } else if i == n - 1 {
                k * (path_delta[n - 1] - path_delta[n - 2])
            } else {
                0.5 * k * (path_delta[i + 1] - path_delta[i - 1])
            }
        })
        .collect())
}

/// Ground-truth channel of one receiver.
#[derive(Debug, Clone)]
pub struct PathModel {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    /// `[antenna][subcarrier]`
    pub static_gains: Vec<Complex64>,
    /// One dynamic-path gain per antenna.
    pub dynamic_gain: Vec<Complex64>,
    /// Reflection path length change in metres, one value per packet.
    pub path_delta: Vec<f64>,
    pub wavelength_m: f64,
}

impl PathModel {
    pub fn validate(&self) -> Result<(), ProcessError> {
        if self.n_antennas < 2 || self.n_subcarriers == 0 {
            return Err(precondition("need at least 2 antennas and 1 subcarrier"));
        }
        if self.static_gains.len() != self.n_antennas * self.n_subcarriers {
            return Err(precondition("static_gains must be n_antennas x n_subcarriers"));
        }
        if self.dynamic_gain.len() != self.n_antennas {
            return Err(precondition("dynamic_gain needs one entry per antenna"));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(ProcessError::Domain("wavelength must be positive".into()));
        }
        if self.path_delta.iter().any(|d| !d.is_finite()) {
            return Err(precondition("path_delta must be finite"));
        }
        let min_static = self.static_gains.iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min);
        let max_dynamic = self.dynamic_gain.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if !(max_dynamic < min_static) {
            return Err(precondition(format!(
                "dynamic gain {max_dynamic} must stay below the weakest static gain {min_static}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseOffset {
    None,
    /// θ drawn i.i.d. from U[0, 2π) per packet, shared by all antennas.
    PerPacketUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub noise_snr_db: Option<f64>,
    pub phase_offset: PhaseOffset,
    pub seed: u64,
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    pub wavelength_m: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            duration_s: 2.0,
            noise_snr_db: Some(30.0),
            phase_offset: PhaseOffset::PerPacketUniform,
            seed: 0,
            n_antennas: 3,
            n_subcarriers: 30,
            wavelength_m: DEFAULT_WAVELENGTH_M,
        }
    }
}

impl SynthConfig {
    pub fn n_packets(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0) {
            return Err(precondition("sample rate and duration must be positive"));
        }
        if self.n_packets() < 2 {
            return Err(precondition("duration x rate must give at least 2 samples"));
        }
        Ok(())
    }
}

/// Generates one receiver's CSI stream (receiver id 0).
///
/// `H̃_m(f,t) = [H_s,m(f) + α_m e^{j2π∫f_D}] e^{-jθ(t)}`, plus optional
/// circular Gaussian noise. Noise is drawn before the offset rotation from a
/// stream independent of the offsets, so runs that differ only in
/// `phase_offset` see identical noise up to the common rotation.
pub fn synth_csi(model: &PathModel, cfg: &SynthConfig) -> Result<CsiStream, ProcessError> {
    model.validate()?;
    cfg.validate()?;
    let n = model.path_delta.len();
    if n != cfg.n_packets() {
        return Err(precondition(format!(
            "path_delta has {n} samples but the config asks for {}",
            cfg.n_packets()
        )));
    }
    let fd = dfs_from_trajectory(&model.path_delta, model.wavelength_m, cfg.sample_rate_hz)?;
    let (na, ns) = (model.n_antennas, model.n_subcarriers);
    let frame = na * ns;

    let mut clean = vec![Complex64::new(0.0, 0.0); n * frame];
    let mut phase = 0.0_f64;
    for t in 0..n {
        let rot = Complex64::from_polar(1.0, phase);
        for a in 0..na {
            let dynamic = model.dynamic_gain[a] * rot;
            for s in 0..ns {
                clean[t * frame + a * ns + s] = model.static_gains[a * ns + s] + dynamic;
            }
        }
        phase += 2.0 * PI * fd[t] / cfg.sample_rate_hz;
        phase %= 2.0 * PI;
    }

    if let Some(snr_db) = cfg.noise_snr_db {
        let power = clean.iter().map(|h| h.norm_sqr()).sum::<f64>() / clean.len() as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let mut rng = seed::rng(cfg.seed, tags::NOISE);
        for h in clean.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *h += Complex64::new(sigma * re, sigma * im);
        }
    }

    if cfg.phase_offset == PhaseOffset::PerPacketUniform {
        let mut rng = seed::rng(cfg.seed, tags::PHASE_OFFSET);
        for packet in clean.chunks_exact_mut(frame) {
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let rot = Complex64::from_polar(1.0, -theta);
            for h in packet {
                *h *= rot;
            }
        }
    }

    let samples = clean
        .into_iter()
        .map(|h| Complex32::new(h.re as f32, h.im as f32))
        .collect();
    Ok(CsiStream::uniform(0, cfg.sample_rate_hz, na, ns, samples)?)
}

/// One constant-velocity piece of a gesture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration_s: f64,
    /// Rate of change of the reflection path length, m/s.
    pub velocity_mps: f64,
}

/// Piecewise-constant radial velocity signature of one gesture class.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureTemplate {
    pub label: GestureLabel,
    pub segments: Vec<Segment>,
}

impl GestureTemplate {
    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self, wavelength_m: f64) -> Result<(), ProcessError> {
        if self.segments.is_empty() {
            return Err(precondition(format!("template {} has no segments", self.label)));
        }
        for s in &self.segments {
            if !(s.duration_s > 0.0) || !s.velocity_mps.is_finite() {
                return Err(precondition(format!("bad segment in template {}", self.label)));
            }
            if s.velocity_mps.abs() / wavelength_m > MAX_GESTURE_DFS_HZ {
                return Err(precondition(format!(
                    "template {}: |v|/λ = {:.1} Hz exceeds {MAX_GESTURE_DFS_HZ} Hz",
                    self.label,
                    s.velocity_mps.abs() / wavelength_m
                )));
            }
        }
        Ok(())
    }

    /// Path-length trajectory with `n` samples at `sample_rate_hz`.
    ///
    /// Segment durations are stretched uniformly so the gesture spans the
    /// whole recording; `velocity_scale[i]` multiplies segment `i`'s velocity.
    /// The trajectory is evaluated in closed form, so it is exactly linear
    /// inside every segment.
    pub fn trajectory(&self, n: usize, sample_rate_hz: f64, velocity_scale: &[f64]) -> Vec<f64> {
        let total = self.total_duration_s();
        let stretch = n as f64 / sample_rate_hz / total;
        let mut bounds = Vec::with_capacity(self.segments.len());
        let (mut start, mut offset) = (0.0, 0.0);
        for (i, s) in self.segments.iter().enumerate() {
            let v = s.velocity_mps * velocity_scale.get(i).copied().unwrap_or(1.0);
            let d = s.duration_s * stretch;
            bounds.push((start, start + d, v, offset));
            offset += v * d;
            start += d;
        }
        (0..n)
            .map(|k| {
                let t = k as f64 / sample_rate_hz;
                let &(s0, _, v, off) = bounds
                    .iter()
                    .find(|(_, end, _, _)| t < *end)
                    .unwrap_or_else(|| bounds.last().expect("non-empty"));
                off + v * (t - s0)
            })
            .collect()
    }
}

/// Built-in gesture templates, format version 1.
pub const DEFAULT_TEMPLATES: &str = "\
# wigest gesture templates v1
# segment <duration_s> <velocity_mps>; f_D = -v / wavelength
class 0
segment 0.4 -1.4
segment 0.4 1.4
segment 0.4 -1.4
segment 0.4 1.4
class 1
segment 0.5 0.8
segment 0.6 1.6
segment 0.5 0.8
class 2
segment 0.4 -2.2
segment 0.4 2.2
segment 0.4 -2.2
segment 0.4 2.2
class 3
segment 1.6 -1.0
class 4
segment 0.4 0.6
segment 0.4 1.8
segment 0.4 -0.6
segment 0.4 -1.8
class 5
segment 0.5 -1.2
segment 0.6 2.4
segment 0.5 -1.2
";

pub fn parse_templates(text: &str) -> Result<Vec<GestureTemplate>, ProcessError> {
    let mut out: Vec<GestureTemplate> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| precondition(format!("template line {}: {msg}", i + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("class") => {
                let label = parts
                    .next()
                    .ok_or_else(|| bad("missing class id"))?
                    .parse::<GestureLabel>()
                    .map_err(|e| bad(&e))?;
                out.push(GestureTemplate {
                    label,
                    segments: Vec::new(),
                });
            }
            Some("segment") => {
                let mut num = || -> Result<f64, ProcessError> {
                    parts
                        .next()
                        .ok_or_else(|| bad("segment needs duration and velocity"))?
                        .parse::<f64>()
                        .map_err(|e| bad(&e.to_string()))
                };
                let duration_s = num()?;
                let velocity_mps = num()?;
                out.last_mut()
                    .ok_or_else(|| bad("segment before any class"))?
                    .segments
                    .push(Segment {
                        duration_s,
                        velocity_mps,
                    });
            }
            Some(other) => return Err(bad(&format!("unknown directive `{other}`"))),
            None => {}
        }
        if parts.next().is_some() {
            return Err(bad("trailing tokens"));
        }
    }
    Ok(out)
}

pub fn format_templates(templates: &[GestureTemplate]) -> String {
    let mut s = String::from("# wigest gesture templates v1\n");
    for t in templates {
        let _ = writeln!(s, "class {}", t.label.class_id());
        for seg in &t.segments {
            let _ = writeln!(s, "segment {} {}", seg.duration_s, seg.velocity_mps);
        }
    }
    s
}

pub fn default_templates() -> Vec<GestureTemplate> {
    parse_templates(DEFAULT_TEMPLATES).expect("built-in templates parse")
}

fn random_unit(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

/// Random single-receiver channel for `template` (velocity jitter included).
pub fn random_path_model(
    template: &GestureTemplate,
    cfg: &SynthConfig,
    velocity_scale: &[f64],
    rng: &mut impl Rng,
) -> PathModel {
    let (na, ns) = (cfg.n_antennas, cfg.n_subcarriers);
    let static_gains = (0..na * ns)
        .map(|_| random_unit(rng) * rng.random_range(0.8..1.2))
        .collect();
    // one reflector seen by closely spaced antennas: similar attenuation,
    // independent phase
    let dynamic_mag = rng.random_range(0.2..0.4);
    let dynamic_gain = (0..na)
        .map(|_| random_unit(rng) * dynamic_mag * rng.random_range(0.95..1.05))
        .collect();
    PathModel {
        n_antennas: na,
        n_subcarriers: ns,
        static_gains,
        dynamic_gain,
        path_delta: template.trajectory(cfg.n_packets(), cfg.sample_rate_hz, velocity_scale),
        wavelength_m: cfg.wavelength_m,
    }
}

/// Builds `per_class` labelled sessions per template, each with
/// `n_receivers` streams. Velocities are jittered by ±10% per session and
/// static/dynamic gains are drawn fresh per receiver.
pub fn synth_dataset(
    templates: &[GestureTemplate],
    per_class: usize,
    n_receivers: usize,
    cfg: &SynthConfig,
) -> Result<Vec<RecordingSession>, ProcessError> {
    if per_class == 0 || n_receivers == 0 {
        return Err(precondition("per_class and n_receivers must be at least 1"));
    }
    cfg.validate()?;
    for t in templates {
        t.validate(cfg.wavelength_m)?;
        let peak = t.segments.iter().map(|s| s.velocity_mps.abs()).fold(0.0, f64::max);
        if peak * (1.0 + VELOCITY_JITTER) / cfg.wavelength_m > MAX_GESTURE_DFS_HZ {
            return Err(precondition(format!(
                "template {} exceeds the gesture Doppler band once jittered",
                t.label
            )));
        }
    }
    let mut sessions = Vec::with_capacity(templates.len() * per_class);
    let mut index = 0u64;
    for t in templates {
        for rep in 0..per_class {
            sessions.push(synth_session(t, rep, index, n_receivers, cfg)?);
            index += 1;
        }
    }
    Ok(sessions)
}

fn synth_session(
    template: &GestureTemplate,
    rep: usize,
    index: u64,
    n_receivers: usize,
    cfg: &SynthConfig,
) -> Result<RecordingSession, ProcessError> {
    let session_seed = seed::derive(cfg.seed, index);
    let mut jitter = seed::rng(session_seed, tags::JITTER);
    let scale: Vec<f64> = template
        .segments
        .iter()
        .map(|_| 1.0 + jitter.random_range(-VELOCITY_JITTER..=VELOCITY_JITTER))
        .collect();
    let mut streams = Vec::with_capacity(n_receivers);
    for r in 0..n_receivers {
        let rx_seed = seed::derive(session_seed, 1000 + r as u64);
        let mut gains = seed::rng(rx_seed, tags::JITTER);
        let model = random_path_model(template, cfg, &scale, &mut gains);
        let rx_cfg = SynthConfig {
            seed: rx_seed,
            ..cfg.clone()
        };
        streams.push(synth_csi(&model, &rx_cfg)?.with_receiver_id(r as u16));
    }
    let meta = DomainMeta::new(
        Environment::Synthetic,
        (index % 7) as u32,
        1 + (index % 5) as u8,
        1 + ((index / 5) % 5) as u8,
        rep as u32,
    )?;
    Ok(RecordingSession::new(streams, template.label, meta)?)
}
