use rand::Rng;

use crate::graph::{Graph, Var};
use crate::param::{kaiming_uniform, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{shape_err, Result};

/// Per-channel descriptor: `[global avg, global max]`.
pub const DESCRIPTOR_DIM: usize = 2;
pub const DEFAULT_DK: usize = 16;

/// Self-attention across channels of the backbone output.
#[derive(Debug, Clone)]
pub struct ChannelAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub d_k: usize,
    pub channels: usize,
}

pub struct ChannelAttnOutput {
    /// `[B, C, H, W]`
    pub gated: Var,
    /// `[B, C]`, the weighted value sum before the sigmoid gate.
    pub att_map_b: Var,
    /// `[B, C, C]`, row-stochastic.
    pub weights: Var,
}

impl ChannelAttention {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        channels: usize,
        d_k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = DESCRIPTOR_DIM;
        Ok(ChannelAttention {
            wq: store.add("chattn.wq", kaiming_uniform(&[d_k, d], d, rng), true)?,
            wk: store.add("chattn.wk", kaiming_uniform(&[d_k, d], d, rng), true)?,
            wv: store.add("chattn.wv", kaiming_uniform(&[1, d], d, rng), true)?,
            d_k,
            channels,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, feat: Var) -> Result<ChannelAttnOutput> {
        let [b, c, _, _] = g.shape(feat)[..] else {
            return shape_err(format!("channel attention needs [B, C, H, W], got {:?}", g.shape(feat)));
        };
        if c != self.channels {
            return shape_err(format!(
                "channel attention built for {} channels, got {c}",
                self.channels
            ));
        }
        let avg = g.global_avgpool(feat)?;
        let avg = g.reshape(avg, &[b, c, 1])?;
        let max = g.global_maxpool(feat)?;
        let max = g.reshape(max, &[b, c, 1])?;
        let desc = g.concat(&[avg, max], 2)?;
        let desc = g.reshape(desc, &[b * c, DESCRIPTOR_DIM])?;

        let project = |g: &mut Graph<T>, id: ParamId, dim: usize| -> Result<Var> {
            let w = g.param(store, id);
            let y = g.linear(desc, w, None)?;
            g.reshape(y, &[b, c, dim])
        };
        let q = project(g, self.wq, self.d_k)?;
        let k = project(g, self.wk, self.d_k)?;
        let v = project(g, self.wv, 1)?;

        let scores = g.bmm(q, k, false, true)?;
        let scores = g.scale(scores, T::one() / T::of(self.d_k as f64).sqrt());
        let weights = g.softmax(scores)?;
        let att = g.bmm(weights, v, false, false)?;
        let att_map_b = g.reshape(att, &[b, c])?;
        let gate = g.sigmoid(att);
        let gate = g.reshape(gate, &[b, c, 1, 1])?;
        let gated = g.mul(feat, gate)?;
        Ok(ChannelAttnOutput {
            gated,
            att_map_b,
            weights,
        })
    }
}
