use wigest_nn::{ParamStore, Scalar};

use crate::train::TrainConfig;

/// `lr0 * 0.5^floor(epoch / period)`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let halvings = (epoch / cfg.lr_halving_period_epochs) as i32;
    cfg.lr0 * 0.5f64.powi(halvings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per parameter in store order;
/// parameters with `requires_grad == false` are never touched.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub params: AdamParams,
    step: u32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, params: AdamParams) -> Self {
        let zeros = || store.iter().map(|p| vec![T::zero(); p.value.numel()]).collect();
        Adam {
            params,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    /// Applies one update from the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore<T>, lr: f64) {
        assert_eq!(self.m.len(), store.len(), "optimizer built for a different store");
        self.step += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let (b1, b2) = (T::of(beta1), T::of(beta2));
        let c1 = T::of(1.0 - beta1.powi(self.step as i32));
        let c2 = T::of(1.0 - beta2.powi(self.step as i32));
        let (lr, eps) = (T::of(lr), T::of(eps));
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.requires_grad {
                continue;
            }
            let g = p.grad.data().to_vec();
            for (i, theta) in p.value.data_mut().iter_mut().enumerate() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
