use rand::seq::SliceRandom;
use thiserror::Error;
use wigest_core::seed::{self, tags};
use wigest_core::spectro::{FusedImage, IMAGE_CHANNELS};
use wigest_core::{DomainMeta, GestureLabel};
use wigest_nn::{GestureNet, Graph, Mode, NnError, Scalar, Tensor};

use crate::metrics::{argmax, Metrics};
use crate::optim::{lr_schedule, Adam, AdamParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("split: {0}")]
    Split(String),
    #[error("empty {0} set")]
    Empty(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}")]
    Numeric { epoch: usize, loss: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_halving_period_epochs: usize,
    pub seed: u64,
    pub adam: AdamParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            lr0: 0.001,
            lr_halving_period_epochs: 5,
            seed: 0,
            adam: AdamParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let a = &self.adam;
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.lr0 > 0.0
            && self.lr_halving_period_epochs > 0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(TrainError::Config(format!("{self:?}")))
        }
    }
}

/// One labelled fused image.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: FusedImage,
    pub label: GestureLabel,
    pub meta: DomainMeta,
}

fn batch_tensor<T: Scalar>(samples: &[&Sample], size: usize) -> Result<Tensor<T>, TrainError> {
    let per = IMAGE_CHANNELS * size * size;
    let mut data = Vec::with_capacity(samples.len() * per);
    for s in samples {
        if s.image.height != size || s.image.width != size || s.image.pixels.len() != per {
            return Err(TrainError::Config(format!(
                "image {}x{} does not match network input {size}x{size}",
                s.image.height, s.image.width
            )));
        }
        data.extend(s.image.pixels.iter().map(|&p| T::of(p as f64)));
    }
    Ok(Tensor::new(vec![samples.len(), IMAGE_CHANNELS, size, size], data)?)
}

/// Minibatch Adam on cross-entropy. Returns the mean training loss of every
/// epoch. Shuffling is seeded from `cfg.seed`.
pub fn train<T: Scalar>(net: &mut GestureNet<T>, data: &[Sample], cfg: &TrainConfig) -> Result<Vec<f64>, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::Empty("training"));
    }
    let size = net.config.input_size;
    let mut adam = Adam::new(&net.store, cfg.adam);
    let mut rng = seed::rng(cfg.seed, tags::SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|s| s.label.class_id()).collect();
            let mut g = Graph::new();
            let x = g.input(batch_tensor::<T>(&batch, size)?);
            let out = net.forward(&mut g, x, Mode::Train)?;
            let loss = g.cross_entropy(out.logits, &labels)?;
            let value = g.value(loss).data()[0].f64();
            if !value.is_finite() {
                return Err(TrainError::Numeric { epoch, loss: value });
            }
            total += value * batch.len() as f64;
            net.store.zero_grad();
            g.backward(loss, &mut net.store)?;
            adam.step(&mut net.store, lr);
        }
        let mean = total / data.len() as f64;
        log::info!("epoch {epoch:>2}  lr {lr:.3e}  loss {mean:.5}");
        history.push(mean);
    }
    Ok(history)
}

/// Class probabilities `[n, classes]` in inference mode, row-major.
pub fn predict<T: Scalar>(net: &mut GestureNet<T>, data: &[Sample]) -> Result<Vec<Vec<f32>>, TrainError> {
    const CHUNK: usize = 32;
    let size = net.config.input_size;
    let mut rows = Vec::with_capacity(data.len());
    for chunk in data.chunks(CHUNK) {
        let batch: Vec<&Sample> = chunk.iter().collect();
        let probs = net.predict(batch_tensor::<T>(&batch, size)?)?;
        let k = probs.shape()[1];
        rows.extend(
            probs
                .data()
                .chunks(k)
                .map(|r| r.iter().map(|v| v.f64() as f32).collect()),
        );
    }
    Ok(rows)
}

/// Argmax predictions against the labels of `data`.
pub fn evaluate<T: Scalar>(net: &mut GestureNet<T>, data: &[Sample]) -> Result<Metrics, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty("test"));
    }
    let predicted: Vec<usize> = predict(net, data)?.iter().map(|r| argmax(r)).collect();
    let truth: Vec<usize> = data.iter().map(|s| s.label.class_id()).collect();
    Ok(Metrics::from_predictions(&truth, &predicted))
}
