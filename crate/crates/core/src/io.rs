//! Canonical little-endian CSI container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CSIS"
//!      4     2  version (u16) = 1
//!      6     2  receiver_id (u16)
//!      8     8  sample_rate_hz (f64)
//!     16     2  n_antennas (u16)
//!     18     2  n_subcarriers (u16)
//!     20     8  n_packets (u64)
//!     28    24  reserved, zero
//!     52        n_packets records:
//!                 timestamp (f64), then n_antennas * n_subcarriers x (re f32, im f32)
//! ```

use std::fs;
use std::path::Path;

use crate::csi::{ComplexSample, CsiStream};
use crate::error::CsiError;

pub const MAGIC: &[u8; 4] = b"CSIS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 52;

/// Size in bytes of one packet record.
pub fn record_len(n_antennas: usize, n_subcarriers: usize) -> usize {
    8 + 8 * n_antennas * n_subcarriers
}

pub fn encode(stream: &CsiStream) -> Vec<u8> {
    let frame = stream.n_antennas() * stream.n_subcarriers();
    let mut out =
        Vec::with_capacity(HEADER_LEN + stream.n_packets() * record_len(stream.n_antennas(), stream.n_subcarriers()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&stream.receiver_id().to_le_bytes());
    out.extend_from_slice(&stream.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(stream.n_antennas() as u16).to_le_bytes());
    out.extend_from_slice(&(stream.n_subcarriers() as u16).to_le_bytes());
    out.extend_from_slice(&(stream.n_packets() as u64).to_le_bytes());
    out.extend_from_slice(&[0u8; 24]);
    for (t, frame_samples) in stream.timestamps().iter().zip(stream.samples().chunks_exact(frame)) {
        out.extend_from_slice(&t.to_le_bytes());
        for s in frame_samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(bytes: &[u8], offset: usize, expected: u64) -> Result<[u8; N], CsiError> {
    bytes
        .get(offset..offset + N)
        .map(|b| b.try_into().expect("slice length"))
        .ok_or(CsiError::Truncated {
            offset: bytes.len() as u64,
            expected,
        })
}

pub fn decode(bytes: &[u8]) -> Result<CsiStream, CsiError> {
    let header_expected = HEADER_LEN as u64;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        if bytes.len() < 4 && MAGIC.starts_with(bytes) {
            return Err(CsiError::Truncated {
                offset: bytes.len() as u64,
                expected: header_expected,
            });
        }
        return Err(CsiError::BadMagic { offset: 0 });
    }
    let version = u16::from_le_bytes(take(bytes, 4, header_expected)?);
    if version != VERSION {
        return Err(CsiError::UnsupportedVersion { offset: 4, version });
    }
    let receiver_id = u16::from_le_bytes(take(bytes, 6, header_expected)?);
    let sample_rate_hz = f64::from_le_bytes(take(bytes, 8, header_expected)?);
    let n_antennas = u16::from_le_bytes(take(bytes, 16, header_expected)?) as usize;
    let n_subcarriers = u16::from_le_bytes(take(bytes, 18, header_expected)?) as usize;
    let n_packets = u64::from_le_bytes(take(bytes, 20, header_expected)?);
    if bytes.len() < HEADER_LEN {
        return Err(CsiError::Truncated {
            offset: bytes.len() as u64,
            expected: header_expected,
        });
    }

    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(CsiError::BadHeader {
            offset: 8,
            field: "sample_rate_hz",
            reason: format!("{sample_rate_hz} is not a positive finite rate"),
        });
    }
    if n_antennas < 2 {
        return Err(CsiError::BadHeader {
            offset: 16,
            field: "n_antennas",
            reason: format!("{n_antennas} < 2"),
        });
    }
    if n_subcarriers == 0 {
        return Err(CsiError::BadHeader {
            offset: 18,
            field: "n_subcarriers",
            reason: "zero subcarriers".into(),
        });
    }

    let rec = record_len(n_antennas, n_subcarriers) as u64;
    let expected = n_packets
        .checked_mul(rec)
        .and_then(|p| p.checked_add(header_expected))
        .ok_or(CsiError::BadHeader {
            offset: 20,
            field: "n_packets",
            reason: "payload size overflows".into(),
        })?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(CsiError::Truncated {
            offset: actual,
            expected,
        });
    }
    if actual > expected {
        return Err(CsiError::TrailingBytes {
            offset: expected,
            extra: actual - expected,
        });
    }

    let n_packets = n_packets as usize;
    let frame = n_antennas * n_subcarriers;
    let mut timestamps = Vec::with_capacity(n_packets);
    let mut samples = Vec::with_capacity(n_packets * frame);
    let mut off = HEADER_LEN;
    for k in 0..n_packets {
        let t = f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        if !t.is_finite() {
            return Err(CsiError::NonFiniteValue { offset: off as u64 });
        }
        if k > 0 && t <= timestamps[k - 1] {
            return Err(CsiError::NonIncreasingTimestamp { offset: off as u64 });
        }
        timestamps.push(t);
        off += 8;
        for _ in 0..frame {
            let re = f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().expect("4 bytes"));
            if !re.is_finite() {
                return Err(CsiError::NonFiniteValue { offset: off as u64 });
            }
            if !im.is_finite() {
                return Err(CsiError::NonFiniteValue { offset: off as u64 + 4 });
            }
            samples.push(ComplexSample::new(re, im));
            off += 8;
        }
    }
    CsiStream::new(
        receiver_id,
        sample_rate_hz,
        n_antennas,
        n_subcarriers,
        timestamps,
        samples,
    )
}

/// Writes `stream` in the canonical layout.
pub fn write_csi_file(stream: &CsiStream, path: impl AsRef<Path>) -> Result<(), CsiError> {
    let path = path.as_ref();
    fs::write(path, encode(stream)).map_err(|e| CsiError::io(path, e))
}

pub fn read_csi_file(path: impl AsRef<Path>) -> Result<CsiStream, CsiError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CsiError::io(path, e))?;
    decode(&bytes)
}
