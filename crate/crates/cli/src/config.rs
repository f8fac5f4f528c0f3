//! Pipeline configuration, read from a TOML file with one table per stage.
//! Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [synth]
//! per_class = 10
//! snr_db = 20.0
//!
//! [train]
//! epochs = 10
//!
//! [split]
//! protocol = "leave-environment-out"
//! holdout = "Hall"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wigest_core::preprocess::{FilterSpec, RebalanceParams};
use wigest_core::spectro::{StftParams, DOPPLER_BAND_HZ, IMAGE_SIZE};
use wigest_core::synth::{PhaseOffset, SynthConfig, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WAVELENGTH_M};
use wigest_core::{Environment, FeatureConfig};
use wigest_eval::{AdamParams, Protocol, ProtocolConfig, SplitSpec, TrainConfig};
use wigest_nn::net::DEFAULT_DK;
use wigest_nn::NetConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PipelineConfig {
    /// Master seed for synthesis, splits, initialisation and shuffling.
    pub seed: u64,
    pub synth: SynthSection,
    pub features: FeatureSection,
    pub net: NetSection,
    pub train: TrainSection,
    pub split: SplitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub per_class: usize,
    pub receivers: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub noise: bool,
    pub snr_db: f64,
    pub phase_offset: bool,
    pub antennas: usize,
    pub subcarriers: usize,
    pub wavelength_m: f64,
    /// Gesture template file; the built-in set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub alpha_frac: f64,
    pub beta_frac: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub filter_order: usize,
    pub window_len: usize,
    pub sigma: f64,
    pub hop: usize,
    pub nfft: usize,
    pub band_hz: f64,
    pub image_size: usize,
    pub reference_antenna: usize,
    /// Sessions with fewer receivers are skipped.
    pub expected_receivers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub width_multiplier: f64,
    pub d_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_halving_period_epochs: usize,
    pub runs: usize,
    /// Fresh split per run instead of one shared split.
    pub resplit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// `in-domain`, `leave-environment-out`, `cross-location`,
    /// `cross-orientation` or `cross-user`.
    pub protocol: String,
    pub test_frac: f64,
    /// Held-out environment name or numeric id; unused for `in-domain`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<String>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            per_class: 10,
            receivers: 6,
            duration_s: 2.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            noise: true,
            snr_db: 30.0,
            phase_offset: true,
            antennas: 3,
            subcarriers: 30,
            wavelength_m: DEFAULT_WAVELENGTH_M,
            templates: None,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        let (r, f, s) = (RebalanceParams::default(), FilterSpec::default(), StftParams::default());
        FeatureSection {
            alpha_frac: r.alpha_frac,
            beta_frac: r.beta_frac,
            low_hz: f.low_hz,
            high_hz: f.high_hz,
            filter_order: f.order,
            window_len: s.window_len,
            sigma: s.sigma,
            hop: s.hop,
            nfft: s.nfft,
            band_hz: DOPPLER_BAND_HZ,
            image_size: IMAGE_SIZE,
            reference_antenna: 0,
            expected_receivers: 6,
        }
    }
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection {
            width_multiplier: 1.0,
            d_k: DEFAULT_DK,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            lr_halving_period_epochs: t.lr_halving_period_epochs,
            runs: 5,
            resplit: true,
        }
    }
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            protocol: "in-domain".into(),
            test_frac: 0.1,
            holdout: None,
        }
    }
}

impl PipelineConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.synth_config().validate().map_err(|e| bad(&e))?;
        if self.synth.per_class == 0 || self.synth.receivers == 0 {
            return Err(CliError::Config(
                "synth.per_class and synth.receivers must be positive".into(),
            ));
        }
        let f = self.feature_config();
        f.rebalance.validate().map_err(|e| bad(&e))?;
        f.filter.validate(self.synth.sample_rate_hz).map_err(|e| bad(&e))?;
        f.stft.validate().map_err(|e| bad(&e))?;
        if self.features.expected_receivers == 0 {
            return Err(CliError::Config("features.expected_receivers must be positive".into()));
        }
        self.net_config().validate().map_err(|e| bad(&e))?;
        self.train_config().validate().map_err(|e| bad(&e))?;
        if self.train.runs == 0 {
            return Err(CliError::Config("train.runs must be positive".into()));
        }
        self.protocol()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            sample_rate_hz: s.sample_rate_hz,
            duration_s: s.duration_s,
            noise_snr_db: s.noise.then_some(s.snr_db),
            phase_offset: if s.phase_offset {
                PhaseOffset::PerPacketUniform
            } else {
                PhaseOffset::None
            },
            seed: self.seed,
            n_antennas: s.antennas,
            n_subcarriers: s.subcarriers,
            wavelength_m: s.wavelength_m,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        let f = &self.features;
        FeatureConfig {
            rebalance: RebalanceParams {
                alpha_frac: f.alpha_frac,
                beta_frac: f.beta_frac,
            },
            filter: FilterSpec {
                low_hz: f.low_hz,
                high_hz: f.high_hz,
                order: f.filter_order,
                ..FilterSpec::default()
            },
            stft: StftParams {
                window_len: f.window_len,
                sigma: f.sigma,
                hop: f.hop,
                nfft: f.nfft,
            },
            band_hz: f.band_hz,
            image_size: f.image_size,
            reference_antenna: f.reference_antenna,
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            width_multiplier: self.net.width_multiplier,
            input_size: self.features.image_size,
            d_k: self.net.d_k,
            ..NetConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr0: t.lr0,
            lr_halving_period_epochs: t.lr_halving_period_epochs,
            seed: self.seed,
            adam: AdamParams::default(),
        }
    }

    pub fn protocol(&self) -> Result<Protocol, CliError> {
        let s = &self.split;
        let holdout = || {
            s.holdout
                .as_deref()
                .ok_or_else(|| CliError::Config(format!("split.holdout is required for `{}`", s.protocol)))
        };
        let id = |what: &str| -> Result<u64, CliError> {
            let h = holdout()?;
            h.parse()
                .map_err(|_| CliError::Config(format!("split.holdout `{h}` is not a {what} id")))
        };
        let small = |v: u64| u8::try_from(v).map_err(|_| CliError::Config(format!("split.holdout {v} out of range")));
        Ok(match s.protocol.as_str() {
            "in-domain" => {
                if !(s.test_frac > 0.0 && s.test_frac < 1.0) {
                    return Err(CliError::Config(format!(
                        "split.test_frac {} outside (0, 1)",
                        s.test_frac
                    )));
                }
                Protocol::InDomain { test_frac: s.test_frac }
            }
            "leave-environment-out" => {
                Protocol::LeaveOneEnvironmentOut(holdout()?.parse::<Environment>().map_err(CliError::Config)?)
            }
            "cross-location" => Protocol::CrossLocation(small(id("location")?)?),
            "cross-orientation" => Protocol::CrossOrientation(small(id("orientation")?)?),
            "cross-user" => Protocol::CrossUser(
                u32::try_from(id("user")?).map_err(|_| CliError::Config("split.holdout out of range".into()))?,
            ),
            other => return Err(CliError::Config(format!("unknown split.protocol `{other}`"))),
        })
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig, CliError> {
        Ok(ProtocolConfig {
            split: SplitSpec {
                protocol: self.protocol()?,
                seed: self.seed,
            },
            train: self.train_config(),
            net: self.net_config(),
            runs: self.train.runs,
            resplit: self.train.resplit,
        })
    }
}
