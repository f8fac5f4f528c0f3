//! Canonical CSI data types.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex32;

use crate::error::CsiError;

/// One complex channel gain as stored on disk.
pub type ComplexSample = Complex32;

/// Time series of CSI frames from one receiver.
///
/// Samples are laid out `[time][antenna][subcarrier]`, row-major. Antenna 0
/// is the conventional reference antenna for conjugate multiplication.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiStream {
    receiver_id: u16,
    sample_rate_hz: f64,
    n_antennas: usize,
    n_subcarriers: usize,
    timestamps: Vec<f64>,
    samples: Vec<ComplexSample>,
}

impl CsiStream {
    /// Builds a stream, checking every invariant.
    pub fn new(
        receiver_id: u16,
        sample_rate_hz: f64,
        n_antennas: usize,
        n_subcarriers: usize,
        timestamps: Vec<f64>,
        samples: Vec<ComplexSample>,
    ) -> Result<Self, CsiError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(CsiError::Invalid(format!(
                "sample rate must be finite and positive, got {sample_rate_hz}"
            )));
        }
        if n_antennas < 2 {
            return Err(CsiError::Invalid(format!(
                "at least 2 antennas are required, got {n_antennas}"
            )));
        }
        if n_subcarriers == 0 {
            return Err(CsiError::Invalid("at least one subcarrier is required".into()));
        }
        let frame = n_antennas * n_subcarriers;
        if samples.len() != timestamps.len() * frame {
            return Err(CsiError::Invalid(format!(
                "{} samples do not match {} packets of {} antennas x {} subcarriers",
                samples.len(),
                timestamps.len(),
                n_antennas,
                n_subcarriers
            )));
        }
        for (i, t) in timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(CsiError::Invalid(format!("timestamp {i} is not finite")));
            }
            if i > 0 && *t <= timestamps[i - 1] {
                return Err(CsiError::TimestampOrder(i));
            }
        }
        if let Some(pos) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(CsiError::NonFiniteSample {
                packet: pos / frame,
                antenna: (pos % frame) / n_subcarriers,
                subcarrier: pos % n_subcarriers,
            });
        }
        Ok(CsiStream {
            receiver_id,
            sample_rate_hz,
            n_antennas,
            n_subcarriers,
            timestamps,
            samples,
        })
    }

    /// Stream with timestamps `k / sample_rate_hz`.
    pub fn uniform(
        receiver_id: u16,
        sample_rate_hz: f64,
        n_antennas: usize,
        n_subcarriers: usize,
        samples: Vec<ComplexSample>,
    ) -> Result<Self, CsiError> {
        let frame = (n_antennas * n_subcarriers).max(1);
        let n = samples.len() / frame;
        let timestamps = (0..n).map(|k| k as f64 / sample_rate_hz).collect();
        Self::new(
            receiver_id,
            sample_rate_hz,
            n_antennas,
            n_subcarriers,
            timestamps,
            samples,
        )
    }

    pub fn receiver_id(&self) -> u16 {
        self.receiver_id
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_packets(&self) -> usize {
        self.timestamps.len()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn samples(&self) -> &[ComplexSample] {
        &self.samples
    }

    #[inline]
    pub fn index(&self, packet: usize, antenna: usize, subcarrier: usize) -> usize {
        (packet * self.n_antennas + antenna) * self.n_subcarriers + subcarrier
    }

    #[inline]
    pub fn get(&self, packet: usize, antenna: usize, subcarrier: usize) -> ComplexSample {
        self.samples[self.index(packet, antenna, subcarrier)]
    }

    /// Time span from the first to the last packet, in seconds.
    pub fn duration_s(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Copy of this stream with samples replaced, keeping all metadata.
    ///
    /// The replacement goes through the same validation as [`CsiStream::new`].
    pub fn with_samples(&self, samples: Vec<ComplexSample>) -> Result<Self, CsiError> {
        Self::new(
            self.receiver_id,
            self.sample_rate_hz,
            self.n_antennas,
            self.n_subcarriers,
            self.timestamps.clone(),
            samples,
        )
    }

    /// Keeps only the first `n` packets.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_packets());
        let frame = self.n_antennas * self.n_subcarriers;
        CsiStream {
            timestamps: self.timestamps[..n].to_vec(),
            samples: self.samples[..n * frame].to_vec(),
            ..self.clone()
        }
    }

    pub fn with_receiver_id(mut self, receiver_id: u16) -> Self {
        self.receiver_id = receiver_id;
        self
    }
}

/// The six gesture classes of the Widar3 corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureLabel {
    PushPull,
    Sweep,
    Clap,
    Slide,
    DrawO,
    DrawZ,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 6] = [
        GestureLabel::PushPull,
        GestureLabel::Sweep,
        GestureLabel::Clap,
        GestureLabel::Slide,
        GestureLabel::DrawO,
        GestureLabel::DrawZ,
    ];
    pub const COUNT: usize = 6;

    pub fn class_id(self) -> usize {
        self as usize
    }

    pub fn from_class_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::PushPull => "PushPull",
            GestureLabel::Sweep => "Sweep",
            GestureLabel::Clap => "Clap",
            GestureLabel::Slide => "Slide",
            GestureLabel::DrawO => "DrawO",
            GestureLabel::DrawZ => "DrawZ",
        }
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(id) = s.parse::<usize>() {
            return Self::from_class_id(id).ok_or_else(|| format!("class id {id} out of range"));
        }
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown gesture `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Environment {
    Classroom,
    Hall,
    Office,
    Synthetic,
}

impl Environment {
    pub fn name(self) -> &'static str {
        match self {
            Environment::Classroom => "Classroom",
            Environment::Hall => "Hall",
            Environment::Office => "Office",
            Environment::Synthetic => "Synthetic",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Environment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Environment::Classroom,
            Environment::Hall,
            Environment::Office,
            Environment::Synthetic,
        ]
        .into_iter()
        .find(|e| e.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown environment `{s}`"))
    }
}

/// Where and by whom a recording was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DomainMeta {
    pub environment: Environment,
    pub user_id: u32,
    /// 1..=5
    pub location_id: u8,
    /// 1..=5
    pub orientation_id: u8,
    pub repetition: u32,
}

impl DomainMeta {
    pub fn new(
        environment: Environment,
        user_id: u32,
        location_id: u8,
        orientation_id: u8,
        repetition: u32,
    ) -> Result<Self, CsiError> {
        if !(1..=5).contains(&location_id) {
            return Err(CsiError::Invalid(format!("location id {location_id} not in 1..=5")));
        }
        if !(1..=5).contains(&orientation_id) {
            return Err(CsiError::Invalid(format!(
                "orientation id {orientation_id} not in 1..=5"
            )));
        }
        Ok(DomainMeta {
            environment,
            user_id,
            location_id,
            orientation_id,
            repetition,
        })
    }
}

/// All receivers' streams for one performed gesture.
#[derive(Debug, Clone)]
pub struct RecordingSession {
    streams: Vec<CsiStream>,
    pub label: GestureLabel,
    pub meta: DomainMeta,
}

impl RecordingSession {
    pub fn new(streams: Vec<CsiStream>, label: GestureLabel, meta: DomainMeta) -> Result<Self, CsiError> {
        if let Some(first) = streams.first() {
            if streams.iter().any(|s| s.sample_rate_hz() != first.sample_rate_hz()) {
                return Err(CsiError::Invalid(
                    "streams of a session must share the sample rate".into(),
                ));
            }
        }
        let mut ids: Vec<u16> = streams.iter().map(|s| s.receiver_id()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(CsiError::Invalid("duplicate receiver id in session".into()));
        }
        Ok(RecordingSession { streams, label, meta })
    }

    pub fn streams(&self) -> &[CsiStream] {
        &self.streams
    }

    pub fn into_streams(self) -> Vec<CsiStream> {
        self.streams
    }
}
