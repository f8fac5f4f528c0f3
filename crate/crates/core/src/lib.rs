//! Signal side of the gesture-sensing toolkit.
//!
//! Raw multi-antenna CSI goes in ([`csi`]), the random per-packet device
//! phase offset is removed by conjugate multiplication ([`preprocess`]), and
//! every receiver's Doppler spectrogram is fused into one fixed-size image
//! ([`spectro`]). [`synth`] generates CSI with a known Doppler trajectory so
//! each stage can be checked against ground truth.
// `!(x > 0.0)` is used on purpose: it rejects NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csi;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod spectro;
pub mod synth;
pub mod validate;

pub use csi::{ComplexSample, CsiStream, DomainMeta, Environment, GestureLabel, RecordingSession};
pub use error::{CsiError, ProcessError};
pub use pipeline::FeatureConfig;
