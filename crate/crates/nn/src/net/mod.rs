//! The attention-based gesture network: SMSA, ResNet18, channel
//! self-attention and a linear softmax head.

pub mod chattn;
pub mod resnet;
pub mod smsa;

use std::fmt::Write as _;

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::layers::{Linear, Mode};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::{shape_err, NnError, Result, Tensor};

pub use chattn::{ChannelAttention, DEFAULT_DK};
pub use resnet::{stage_widths, ResNet18};
pub use smsa::{Smsa, SMSA_CHANNELS, SMSA_KERNELS};

/// Total spatial downsampling of the backbone.
pub const BACKBONE_STRIDE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub width_multiplier: f64,
    pub input_size: usize,
    pub in_channels: usize,
    pub n_classes: usize,
    pub d_k: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            width_multiplier: 1.0,
            input_size: 224,
            in_channels: 3,
            n_classes: 6,
            d_k: DEFAULT_DK,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_multiplier > 0.0 && self.width_multiplier <= 1.0) {
            return shape_err(format!("width multiplier {} outside (0, 1]", self.width_multiplier));
        }
        if self.input_size == 0 || !self.input_size.is_multiple_of(BACKBONE_STRIDE) {
            return shape_err(format!(
                "input size {} is not a multiple of {BACKBONE_STRIDE}",
                self.input_size
            ));
        }
        if self.in_channels == 0 || self.n_classes == 0 || self.d_k == 0 {
            return shape_err("channels, classes and d_k must be positive");
        }
        Ok(())
    }

    /// Side of the final average pool (7 for 224 inputs).
    pub fn pool_size(&self) -> usize {
        self.input_size / BACKBONE_STRIDE
    }
}

pub struct NetOutput {
    pub logits: Var,
    pub probs: Var,
    pub att_map_a: Var,
    pub att_map_b: Var,
    pub att_weights: Var,
    /// Shapes after the stem, the max pool and each stage.
    pub trace: Vec<Vec<usize>>,
}

pub struct GestureNet<T> {
    pub config: NetConfig,
    pub store: ParamStore<T>,
    pub smsa: Smsa,
    pub backbone: ResNet18,
    pub chattn: ChannelAttention,
    pub head: Linear,
}

impl<T: Scalar> GestureNet<T> {
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let smsa = Smsa::new(&mut store, config.in_channels, rng)?;
        let backbone = ResNet18::new(&mut store, config.in_channels, config.width_multiplier, rng)?;
        let width = backbone.out_channels();
        let chattn = ChannelAttention::new(&mut store, width, config.d_k, rng)?;
        let head = Linear::new(&mut store, "head", width, config.n_classes, true, rng)?;
        Ok(GestureNet {
            config,
            store,
            smsa,
            backbone,
            chattn,
            head,
        })
    }

    pub fn forward(&mut self, g: &mut Graph<T>, x: Var, mode: Mode) -> Result<NetOutput> {
        let c = &self.config;
        match g.shape(x) {
            &[_, ch, h, w] if ch == c.in_channels && h == c.input_size && w == c.input_size => {}
            s => {
                return shape_err(format!(
                    "network expects [B, {}, {1}, {1}], got {s:?}",
                    c.in_channels, c.input_size
                ))
            }
        }
        let b = g.shape(x)[0];
        let smsa = self.smsa.forward(g, &self.store, x)?;
        let mut trace = Vec::new();
        let feat = self
            .backbone
            .forward(g, &mut self.store, smsa.out, mode, Some(&mut trace))?;
        let ch = self.chattn.forward(g, &self.store, feat)?;
        let pooled = g.avgpool2d(ch.gated, self.config.pool_size())?;
        let flat = g.reshape(pooled, &[b, self.backbone.out_channels()])?;
        let logits = self.head.forward(g, &self.store, flat)?;
        let probs = g.softmax(logits)?;
        Ok(NetOutput {
            logits,
            probs,
            att_map_a: smsa.att_map_a,
            att_map_b: ch.att_map_b,
            att_weights: ch.weights,
            trace,
        })
    }

    /// Class probabilities `[B, n_classes]` in inference mode.
    pub fn predict(&mut self, images: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.input(images);
        let out = self.forward(&mut g, x, Mode::Eval)?;
        Ok(g.value(out.probs).clone())
    }

    /// Self-describing text: architecture and every fixed design value.
    pub fn model_card(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "model = attention gesture network");
        let _ = writeln!(s, "scalar = {}", T::NAME);
        let _ = writeln!(s, "width_multiplier = {}", c.width_multiplier);
        let _ = writeln!(s, "input = {}x{}x{}", c.in_channels, c.input_size, c.input_size);
        let _ = writeln!(s, "stage_widths = {:?}", self.backbone.widths);
        let _ = writeln!(s, "smsa_channels = {SMSA_CHANNELS}");
        let _ = writeln!(s, "smsa_kernels = {SMSA_KERNELS:?}");
        let _ = writeln!(s, "smsa_norm = groupnorm({})", smsa::SMSA_GROUPS);
        let _ = writeln!(s, "channel_descriptor = [avg, max]");
        let _ = writeln!(s, "d_k = {}", c.d_k);
        let _ = writeln!(s, "d_v = 1");
        let _ = writeln!(s, "att_map_b_gate = sigmoid");
        let _ = writeln!(s, "final_pool = {0}x{0}", c.pool_size());
        let _ = writeln!(s, "classes = {}", c.n_classes);
        let _ = writeln!(s, "bn_momentum = {}", crate::layers::BN_MOMENTUM);
        let _ = writeln!(s, "norm_eps = {}", crate::ops::NORM_EPS);
        let _ = writeln!(s, "init = kaiming_uniform");
        let _ = writeln!(s, "trainable_parameters = {}", self.store.trainable_count());
        s
    }

    /// Copies every parameter value from `other`, which must share the architecture.
    pub fn load_values_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        if other.len() != self.store.len() {
            return Err(NnError::Checkpoint("parameter count differs".into()));
        }
        for (dst, src) in self.store.iter_mut().zip(other.iter()) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(NnError::Checkpoint(format!("{} does not match {}", dst.name, src.name)));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }
}
