use rand::Rng;

use crate::graph::{Graph, Var};
use crate::layers::{Conv2d, GroupNorm};
use crate::param::{kaiming_uniform, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{shape_err, Result};

pub const SMSA_CHANNELS: usize = 16;
pub const SMSA_KERNELS: [usize; 4] = [3, 5, 7, 9];
pub const SMSA_GROUPS: usize = SMSA_KERNELS.len();

/// Shareable multi-semantic spatial attention.
#[derive(Debug, Clone)]
pub struct Smsa {
    pub expand: Conv2d,
    pub restore: Conv2d,
    pub kernels_h: [ParamId; SMSA_GROUPS],
    pub kernels_w: [ParamId; SMSA_GROUPS],
    pub norm_h: GroupNorm,
    pub norm_w: GroupNorm,
}

pub struct SmsaOutput {
    /// `[B, 3, H, W]`
    pub out: Var,
    /// `[B, 16, H, W]`, the outer product of `att_h` and `att_w`.
    pub att_map_a: Var,
    /// `[B, 16, H, 1]`
    pub att_h: Var,
    /// `[B, 16, 1, W]`
    pub att_w: Var,
}

impl Smsa {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, in_channels: usize, rng: &mut R) -> Result<Self> {
        let c = SMSA_CHANNELS;
        let expand = Conv2d::new(store, "smsa.expand", in_channels, c, 1, 1, 0, true, rng)?;
        let restore = Conv2d::new(store, "smsa.restore", c, in_channels, 1, 1, 0, true, rng)?;
        let mut kernels = |axis: &str, store: &mut ParamStore<T>| -> Result<[ParamId; SMSA_GROUPS]> {
            let mut ids = [0; SMSA_GROUPS];
            for (i, &k) in SMSA_KERNELS.iter().enumerate() {
                ids[i] = store.add(format!("smsa.kernel_{axis}{i}"), kaiming_uniform(&[k], k, rng), true)?;
            }
            Ok(ids)
        };
        let kernels_h = kernels("h", store)?;
        let kernels_w = kernels("w", store)?;
        Ok(Smsa {
            expand,
            restore,
            kernels_h,
            kernels_w,
            norm_h: GroupNorm::new(store, "smsa.norm_h", c, SMSA_GROUPS)?,
            norm_w: GroupNorm::new(store, "smsa.norm_w", c, SMSA_GROUPS)?,
        })
    }

    /// Splits `profile [B, 16, L]` into four channel groups, convolves group
    /// `i` with its shared kernel and rejoins them in order.
    pub fn multi_scale<T: Scalar>(
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        profile: Var,
        kernels: &[ParamId; SMSA_GROUPS],
    ) -> Result<Var> {
        let c = g.shape(profile)[1];
        if !c.is_multiple_of(SMSA_GROUPS) {
            return shape_err(format!("{c} channels do not split into {SMSA_GROUPS} groups"));
        }
        let per = c / SMSA_GROUPS;
        let mut parts = Vec::with_capacity(SMSA_GROUPS);
        for (i, &kid) in kernels.iter().enumerate() {
            let part = g.narrow(profile, 1, i * per, per)?;
            let k = g.param(store, kid);
            parts.push(g.conv1d_shared(part, k)?);
        }
        g.concat(&parts, 1)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<SmsaOutput> {
        let x16 = self.expand.forward(g, store, x)?;
        let [b, c, h, w] = g.shape(x16)[..] else {
            unreachable!("conv2d output is rank 4")
        };

        let xh = g.avgpool_w(x16)?;
        let xh = g.reshape(xh, &[b, c, h])?;
        let xh = Self::multi_scale(g, store, xh, &self.kernels_h)?;
        let xh = self.norm_h.forward(g, store, xh)?;
        let att_h = g.sigmoid(xh);
        let att_h = g.reshape(att_h, &[b, c, h, 1])?;

        let xw = g.avgpool_h(x16)?;
        let xw = g.reshape(xw, &[b, c, w])?;
        let xw = Self::multi_scale(g, store, xw, &self.kernels_w)?;
        let xw = self.norm_w.forward(g, store, xw)?;
        let att_w = g.sigmoid(xw);
        let att_w = g.reshape(att_w, &[b, c, 1, w])?;

        let att_map_a = g.mul(att_h, att_w)?;
        let gated = g.mul(x16, att_map_a)?;
        let out = self.restore.forward(g, store, gated)?;
        Ok(SmsaOutput {
            out,
            att_map_a,
            att_h,
            att_w,
        })
    }
}
