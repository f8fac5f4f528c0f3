//! Corpus hygiene: detect missing receivers, truncated streams and dropped
//! packets before a session is featurized.

use std::fmt;

use crate::csi::{CsiStream, RecordingSession};

/// Relative spread of stream durations above which a session is flagged.
pub const DURATION_TOLERANCE: f64 = 0.10;
/// Fraction of dropped packets above which a stream is flagged.
pub const DROP_TOLERANCE: f64 = 0.01;
/// A gap longer than this multiple of the median interval counts as loss.
pub const GAP_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub enum ValidationFlag {
    MissingReceivers {
        expected: usize,
        found: usize,
    },
    SampleRateMismatch {
        receiver_id: u16,
    },
    DurationMismatch {
        receiver_id: u16,
        duration_s: f64,
        longest_s: f64,
    },
    DroppedPackets {
        receiver_id: u16,
        dropped: usize,
        fraction: f64,
    },
    EmptyStream {
        receiver_id: u16,
    },
}

impl fmt::Display for ValidationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationFlag::MissingReceivers { expected, found } => {
                write!(f, "missing receivers: expected {expected}, found {found}")
            }
            ValidationFlag::SampleRateMismatch { receiver_id } => {
                write!(f, "receiver {receiver_id}: sample rate differs from the session")
            }
            ValidationFlag::DurationMismatch {
                receiver_id,
                duration_s,
                longest_s,
            } => write!(
                f,
                "receiver {receiver_id}: duration {duration_s:.3}s vs longest {longest_s:.3}s"
            ),
            ValidationFlag::DroppedPackets {
                receiver_id,
                dropped,
                fraction,
            } => write!(
                f,
                "receiver {receiver_id}: {dropped} dropped packets ({:.2}%)",
                fraction * 100.0
            ),
            ValidationFlag::EmptyStream { receiver_id } => {
                write!(f, "receiver {receiver_id}: fewer than 2 packets")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub flags: Vec<ValidationFlag>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Estimated number of packets lost to gaps in the timestamp sequence.
pub fn dropped_packets(stream: &CsiStream) -> usize {
    let ts = stream.timestamps();
    if ts.len() < 3 {
        return 0;
    }
    let mut gaps: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let median = {
        let mut sorted = gaps.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        }
    };
    if median <= 0.0 {
        return 0;
    }
    gaps.retain(|g| *g > GAP_FACTOR * median);
    gaps.iter()
        .map(|g| ((g / median).round() as usize).saturating_sub(1))
        .sum()
}

/// Checks `session` against the expected receiver count.
///
/// The result does not depend on the order of the session's streams.
pub fn validate_session(session: &RecordingSession, expected_receivers: usize) -> ValidationReport {
    let mut streams: Vec<&CsiStream> = session.streams().iter().collect();
    streams.sort_by_key(|s| s.receiver_id());
    let mut flags = Vec::new();

    if streams.len() < expected_receivers {
        flags.push(ValidationFlag::MissingReceivers {
            expected: expected_receivers,
            found: streams.len(),
        });
    }

    if let Some(first) = streams.first() {
        for s in &streams[1..] {
            if s.sample_rate_hz() != first.sample_rate_hz() {
                flags.push(ValidationFlag::SampleRateMismatch {
                    receiver_id: s.receiver_id(),
                });
            }
        }
    }

    let longest = streams.iter().map(|s| s.duration_s()).fold(0.0_f64, f64::max);
    for s in &streams {
        if s.n_packets() < 2 {
            flags.push(ValidationFlag::EmptyStream {
                receiver_id: s.receiver_id(),
            });
            continue;
        }
        let d = s.duration_s();
        if longest > 0.0 && (longest - d) / longest > DURATION_TOLERANCE {
            flags.push(ValidationFlag::DurationMismatch {
                receiver_id: s.receiver_id(),
                duration_s: d,
                longest_s: longest,
            });
        }
        let dropped = dropped_packets(s);
        let fraction = dropped as f64 / (s.n_packets() + dropped) as f64;
        if fraction > DROP_TOLERANCE {
            flags.push(ValidationFlag::DroppedPackets {
                receiver_id: s.receiver_id(),
                dropped,
                fraction,
            });
        }
    }
    ValidationReport { flags }
}
