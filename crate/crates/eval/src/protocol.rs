use std::time::Instant;

use wigest_core::seed::{self, tags};
use wigest_nn::{GestureNet, NetConfig};

use crate::metrics::Metrics;
use crate::split::{make_split, Protocol, SplitKey, SplitSpec};
use crate::train::{evaluate, train, Sample, TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub net: NetConfig,
    pub runs: usize,
    /// Draw a fresh split per run (`split.seed + run`) instead of reusing one.
    pub resplit: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    /// Seeds network init and minibatch shuffling.
    pub seed: u64,
    pub split_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub loss_history: Vec<f64>,
    pub metrics: Metrics,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub protocol: Protocol,
    pub runs: Vec<RunResult>,
}

impl ProtocolReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.metrics.accuracy).collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        let a = self.accuracies();
        a.iter().sum::<f64>() / a.len() as f64
    }

    pub fn pooled(&self) -> Metrics {
        Metrics::pooled(self.runs.iter().map(|r| &r.metrics))
    }
}

pub fn run_protocol(samples: &[Sample], cfg: &ProtocolConfig) -> Result<ProtocolReport, TrainError> {
    run_protocol_with(samples, cfg, |_, _| Ok(()))
}

/// Runs `cfg.runs` independent train/evaluate cycles with seeds
/// `train.seed + run`. `on_run` sees every trained network, e.g. to save it.
pub fn run_protocol_with(
    samples: &[Sample],
    cfg: &ProtocolConfig,
    mut on_run: impl FnMut(&RunResult, &GestureNet<f32>) -> Result<(), TrainError>,
) -> Result<ProtocolReport, TrainError> {
    if cfg.runs == 0 {
        return Err(TrainError::Config("at least one run is required".into()));
    }
    let keys: Vec<SplitKey> = samples
        .iter()
        .map(|s| SplitKey {
            label: s.label,
            meta: s.meta,
        })
        .collect();
    let mut runs = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let started = Instant::now();
        let seed = cfg.train.seed.wrapping_add(run as u64);
        let split_seed = if cfg.resplit {
            cfg.split.seed.wrapping_add(run as u64)
        } else {
            cfg.split.seed
        };
        let split = make_split(
            &keys,
            &SplitSpec {
                seed: split_seed,
                ..cfg.split
            },
        )?;
        let pick = |idx: &[usize]| -> Vec<Sample> { idx.iter().map(|&i| samples[i].clone()).collect() };
        let (train_set, test_set) = (pick(&split.train), pick(&split.test));
        let mut net = GestureNet::<f32>::new(cfg.net.clone(), &mut seed::rng(seed, tags::INIT))?;
        let loss_history = train(
            &mut net,
            &train_set,
            &TrainConfig {
                seed,
                ..cfg.train.clone()
            },
        )?;
        let metrics = evaluate(&mut net, &test_set)?;
        let result = RunResult {
            run,
            seed,
            split_seed,
            train_size: train_set.len(),
            test_size: test_set.len(),
            loss_history,
            metrics,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "run {run} seed {seed}: accuracy {:.4} on {} test samples ({:.1} s)",
            result.metrics.accuracy,
            result.test_size,
            result.seconds
        );
        on_run(&result, &net)?;
        runs.push(result);
    }
    Ok(ProtocolReport {
        protocol: cfg.split.protocol,
        runs,
    })
}
