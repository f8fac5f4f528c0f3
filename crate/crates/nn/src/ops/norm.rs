use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::{shape_err, Result, Tensor};

pub const NORM_EPS: f64 = 1e-5;

/// Batch statistics of one training-mode batchnorm call.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Unbiased variance, the value blended into running statistics.
    pub var_unbiased: Vec<T>,
}

/// Channel-major layout `[.., channels, inner]` for the affine step.
#[derive(Debug, Clone, Copy)]
struct Layout {
    channels: usize,
    inner: usize,
}

/// Normalises each index set; returns `(xhat, inv_std, mean)` per set.
fn normalise<T: Scalar>(x: &[T], sets: &[Vec<usize>]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let eps = T::of(NORM_EPS);
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv = Vec::with_capacity(sets.len());
    let mut means = Vec::with_capacity(sets.len());
    for set in sets {
        let n = T::of(set.len() as f64);
        let mean = set.iter().map(|&i| x[i]).sum::<T>() / n;
        let var = set.iter().map(|&i| (x[i] - mean) * (x[i] - mean)).sum::<T>() / n;
        let r = T::one() / (var + eps).sqrt();
        for &i in set {
            xhat[i] = (x[i] - mean) * r;
        }
        inv.push(r);
        means.push(mean);
    }
    (xhat, inv, means)
}

/// Gradient of `xhat` w.r.t. its input for each normalisation set.
fn normalise_backward<T: Scalar>(dxhat: &[T], xhat: &[T], inv: &[T], sets: &[Vec<usize>]) -> Vec<T> {
    let mut dx = vec![T::zero(); dxhat.len()];
    for (set, &r) in sets.iter().zip(inv) {
        let n = T::of(set.len() as f64);
        let m1 = set.iter().map(|&i| dxhat[i]).sum::<T>() / n;
        let m2 = set.iter().map(|&i| dxhat[i] * xhat[i]).sum::<T>() / n;
        for &i in set {
            dx[i] = r * (dxhat[i] - m1 - xhat[i] * m2);
        }
    }
    dx
}

impl Layout {
    fn channel_of(&self, i: usize) -> usize {
        (i / self.inner) % self.channels
    }
}

impl<T: Scalar> Graph<T> {
    fn affine(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        layout: Layout,
        xhat: Vec<T>,
        inv: Vec<T>,
        sets: Option<Vec<Vec<usize>>>,
    ) -> Result<Var> {
        let c = layout.channels;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return shape_err(format!(
                "norm affine needs [{c}] params, got {:?} and {:?}",
                self.shape(gamma),
                self.shape(beta)
            ));
        }
        let (gd, bd) = (self.data(gamma), self.data(beta));
        let y: Vec<T> = xhat
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = layout.channel_of(i);
                v * gd[ch] + bd[ch]
            })
            .collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            Tensor::new(shape, y)?,
            vec![x, gamma, beta],
            Box::new(move |g, grad, need| {
                let gd = g.data(gamma);
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                let mut dxhat = vec![T::zero(); grad.len()];
                for (i, &gv) in grad.iter().enumerate() {
                    let ch = layout.channel_of(i);
                    dgamma[ch] += gv * xhat[i];
                    dbeta[ch] += gv;
                    dxhat[i] = gv * gd[ch];
                }
                let dx = need[0].then(|| match &sets {
                    Some(sets) => normalise_backward(&dxhat, &xhat, &inv, sets),
                    // fixed statistics: xhat is affine in x
                    None => dxhat
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| d * inv[layout.channel_of(i)])
                        .collect(),
                });
                vec![dx, Some(dgamma), Some(dbeta)]
            }),
        ))
    }

    /// Group normalisation of `x [B, C, ...]` followed by a per-channel affine map.
    pub fn groupnorm(&mut self, x: Var, groups: usize, gamma: Var, beta: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 || groups == 0 || !shape[1].is_multiple_of(groups) {
            return shape_err(format!("groupnorm: {groups} groups for shape {shape:?}"));
        }
        let (b, c) = (shape[0], shape[1]);
        let inner: usize = shape[2..].iter().product();
        let span = c / groups * inner;
        let sets: Vec<Vec<usize>> = (0..b * groups).map(|s| (s * span..(s + 1) * span).collect()).collect();
        let (xhat, inv, _) = normalise(self.data(x), &sets);
        let layout = Layout { channels: c, inner };
        self.affine(x, gamma, beta, layout, xhat, inv, Some(sets))
    }

    /// Training-mode batch normalisation of `x [B, C, H, W]` with batch statistics.
    pub fn batchnorm2d_train(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats<T>)> {
        let shape = self.shape(x).to_vec();
        let [b, c, h, w] = shape[..] else {
            return shape_err(format!("batchnorm2d needs [B, C, H, W], got {shape:?}"));
        };
        let hw = h * w;
        if b * hw < 2 {
            return shape_err("batchnorm2d needs more than one value per channel");
        }
        let sets: Vec<Vec<usize>> = (0..c)
            .map(|ch| {
                (0..b)
                    .flat_map(|bi| (bi * c + ch) * hw..(bi * c + ch + 1) * hw)
                    .collect()
            })
            .collect();
        let (xhat, inv, mean) = normalise(self.data(x), &sets);
        let n = T::of((b * hw) as f64);
        let eps = T::of(NORM_EPS);
        let var_unbiased = inv
            .iter()
            .map(|&r| (T::one() / (r * r) - eps) * n / (n - T::one()))
            .collect();
        let layout = Layout { channels: c, inner: hw };
        let y = self.affine(x, gamma, beta, layout, xhat, inv, Some(sets))?;
        Ok((y, BatchStats { mean, var_unbiased }))
    }

    /// Inference-mode batch normalisation with fixed statistics.
    pub fn batchnorm2d_eval(&mut self, x: Var, gamma: Var, beta: Var, mean: &[T], var: &[T]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let [_, c, h, w] = shape[..] else {
            return shape_err(format!("batchnorm2d needs [B, C, H, W], got {shape:?}"));
        };
        if mean.len() != c || var.len() != c {
            return shape_err("batchnorm2d running statistics length differs from channels");
        }
        let eps = T::of(NORM_EPS);
        let inv: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let layout = Layout {
            channels: c,
            inner: h * w,
        };
        let xhat = self
            .data(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = layout.channel_of(i);
                (v - mean[ch]) * inv[ch]
            })
            .collect();
        self.affine(x, gamma, beta, layout, xhat, inv, None)
    }
}
