//! CSI session -> fused Doppler image.

use num_complex::Complex64;

use crate::csi::{CsiStream, RecordingSession};
use crate::error::ProcessError;
use crate::preprocess::{
    bandpass, conjugate_multiply, pca_first_component, rebalance_static, FilterSpec, RebalanceParams,
};
use crate::spectro::{
    doppler_spectrogram, fuse_receivers, FusedImage, Spectrogram, StftParams, DOPPLER_BAND_HZ, IMAGE_SIZE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub rebalance: RebalanceParams,
    pub filter: FilterSpec,
    pub stft: StftParams,
    pub band_hz: f64,
    pub image_size: usize,
    pub reference_antenna: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            rebalance: RebalanceParams::default(),
            filter: FilterSpec::default(),
            stft: StftParams::default(),
            band_hz: DOPPLER_BAND_HZ,
            image_size: IMAGE_SIZE,
            reference_antenna: 0,
        }
    }
}

/// Rebalance, conjugate-multiply, band-pass and reduce one stream to its
/// first principal component.
pub fn denoised_series(stream: &CsiStream, cfg: &FeatureConfig) -> Result<Vec<Complex64>, ProcessError> {
    let balanced = rebalance_static(stream, cfg.rebalance)?;
    let conj = conjugate_multiply(&balanced, cfg.reference_antenna)?;
    let filtered = bandpass(&conj, &cfg.filter)?;
    Ok(pca_first_component(&filtered)?.component)
}

pub fn stream_spectrogram(stream: &CsiStream, cfg: &FeatureConfig) -> Result<Spectrogram, ProcessError> {
    let series = denoised_series(stream, cfg)?;
    let mut s = doppler_spectrogram(&series, &cfg.stft, stream.sample_rate_hz(), cfg.band_hz)?;
    s.receiver_id = stream.receiver_id();
    Ok(s)
}

pub fn featurize_session(session: &RecordingSession, cfg: &FeatureConfig) -> Result<FusedImage, ProcessError> {
    let specs = session
        .streams()
        .iter()
        .map(|s| stream_spectrogram(s, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    fuse_receivers(&specs, cfg.image_size)
}
