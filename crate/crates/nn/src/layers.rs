//! Parameterised layers: each holds ids into a [`ParamStore`].

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::param::{kaiming_uniform, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor};

pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics; nothing is mutated.
    Eval,
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel * kernel;
        let w = kaiming_uniform(&[out_channels, in_channels, kernel, kernel], fan_in, rng);
        let weight = store.add(format!("{name}.weight"), w, true)?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(vec![out_channels]), true)?)
        } else {
            None
        };
        Ok(Conv2d {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = self.bias.map(|b| g.param(store, b));
        g.conv2d(x, w, b, self.stride, self.padding)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm2d {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Result<Self> {
        Ok(BatchNorm2d {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(vec![channels], T::one()), true)?,
            beta: store.add(format!("{name}.beta"), Tensor::zeros(vec![channels]), true)?,
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(vec![channels]), false)?,
            running_var: store.add(
                format!("{name}.running_var"),
                Tensor::full(vec![channels], T::one()),
                false,
            )?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &mut ParamStore<T>, x: Var, mode: Mode) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        match mode {
            Mode::Train => {
                let (y, stats) = g.batchnorm2d_train(x, gamma, beta)?;
                let m = T::of(BN_MOMENTUM);
                let blend = |t: &mut Tensor<T>, batch: &[T]| {
                    for (r, &b) in t.data_mut().iter_mut().zip(batch) {
                        *r = (T::one() - m) * *r + m * b;
                    }
                };
                blend(&mut store.get_mut(self.running_mean).value, &stats.mean);
                blend(&mut store.get_mut(self.running_var).value, &stats.var_unbiased);
                Ok(y)
            }
            Mode::Eval => {
                let mean = store.get(self.running_mean).value.data().to_vec();
                let var = store.get(self.running_var).value.data().to_vec();
                g.batchnorm2d_eval(x, gamma, beta, &mean, &var)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupNorm {
    pub groups: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl GroupNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize, groups: usize) -> Result<Self> {
        Ok(GroupNorm {
            groups,
            gamma: store.add(format!("{name}.gamma"), Tensor::full(vec![channels], T::one()), true)?,
            beta: store.add(format!("{name}.beta"), Tensor::zeros(vec![channels]), true)?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        g.groupnorm(x, self.groups, gamma, beta)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_features: usize,
        out_features: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let w = kaiming_uniform(&[out_features, in_features], in_features, rng);
        let weight = store.add(format!("{name}.weight"), w, true)?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(vec![out_features]), true)?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            in_features,
            out_features,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = self.bias.map(|b| g.param(store, b));
        g.linear(x, w, b)
    }
}
