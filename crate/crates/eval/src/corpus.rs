use wigest_core::pipeline::featurize_session;
use wigest_core::{FeatureConfig, ProcessError, RecordingSession};

use crate::train::Sample;

/// Featurizes every session; the first failure aborts.
pub fn featurize_all(sessions: &[RecordingSession], cfg: &FeatureConfig) -> Result<Vec<Sample>, ProcessError> {
    sessions
        .iter()
        .map(|s| {
            Ok(Sample {
                image: featurize_session(s, cfg)?,
                label: s.label,
                meta: s.meta,
            })
        })
        .collect()
}
