use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::{shape_err, Result, Tensor};

fn dims4(shape: &[usize], op: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => shape_err(format!("{op} needs [B, C, H, W], got {shape:?}")),
    }
}

impl<T: Scalar> Graph<T> {
    /// Mean over width: `[B, C, H, W] -> [B, C, H, 1]`.
    pub fn avgpool_w(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "avgpool_w")?;
        self.mean_axis(x, [b, c, h, 1], w, 1)
    }

    /// Mean over height: `[B, C, H, W] -> [B, C, 1, W]`.
    pub fn avgpool_h(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "avgpool_h")?;
        self.mean_axis(x, [b, c, 1, w], h, w)
    }

    /// Mean over spatial dims: `[B, C, H, W] -> [B, C, 1, 1]`.
    pub fn global_avgpool(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "global_avgpool")?;
        let y = self.reshape(x, &[b, c, 1, h * w])?;
        let m = self.mean_axis(y, [b, c, 1, 1], h * w, 1)?;
        Ok(m)
    }

    /// Reduces one axis of a contiguous `[outer, n, inner]` view.
    fn mean_axis(&mut self, x: Var, out_shape: [usize; 4], n: usize, inner: usize) -> Result<Var> {
        if n == 0 {
            return shape_err("mean over an empty axis");
        }
        let xd = self.data(x);
        let outer = xd.len() / (n * inner);
        let scale = T::one() / T::of(n as f64);
        let mut y = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let src = &xd[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (a, &v) in y[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *a += v;
                }
            }
        }
        y.iter_mut().for_each(|v| *v *= scale);
        let len = xd.len();
        Ok(self.push(
            Tensor::new(out_shape.to_vec(), y)?,
            vec![x],
            Box::new(move |_, grad, _| {
                let mut d = vec![T::zero(); len];
                for o in 0..outer {
                    let gsrc = &grad[o * inner..(o + 1) * inner];
                    for j in 0..n {
                        for (a, &gv) in d[(o * n + j) * inner..(o * n + j + 1) * inner].iter_mut().zip(gsrc) {
                            *a = gv * scale;
                        }
                    }
                }
                vec![Some(d)]
            }),
        ))
    }

    /// Non-overlapping `k x k` mean pooling; `H` and `W` must divide by `k`.
    pub fn avgpool2d(&mut self, x: Var, k: usize) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "avgpool2d")?;
        if k == 0 || h % k != 0 || w % k != 0 {
            return shape_err(format!("avgpool2d: {k} does not divide {h}x{w}"));
        }
        let (ho, wo) = (h / k, w / k);
        let scale = T::one() / T::of((k * k) as f64);
        let xd = self.data(x);
        let mut y = vec![T::zero(); b * c * ho * wo];
        for p in 0..b * c {
            for iy in 0..h {
                for ix in 0..w {
                    y[(p * ho + iy / k) * wo + ix / k] += xd[(p * h + iy) * w + ix];
                }
            }
        }
        y.iter_mut().for_each(|v| *v *= scale);
        Ok(self.push(
            Tensor::new(vec![b, c, ho, wo], y)?,
            vec![x],
            Box::new(move |_, grad, _| {
                let mut d = vec![T::zero(); b * c * h * w];
                for p in 0..b * c {
                    for iy in 0..h {
                        for ix in 0..w {
                            d[(p * h + iy) * w + ix] = grad[(p * ho + iy / k) * wo + ix / k] * scale;
                        }
                    }
                }
                vec![Some(d)]
            }),
        ))
    }

    /// `k x k` max pooling with stride and implicit `-inf` padding.
    pub fn maxpool2d(&mut self, x: Var, k: usize, stride: usize, pad: usize) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "maxpool2d")?;
        if k == 0 || stride == 0 || pad >= k || h + 2 * pad < k || w + 2 * pad < k {
            return shape_err(format!("maxpool2d: {k}/{stride} pad {pad} on {h}x{w}"));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let xd = self.data(x);
        let mut y = Vec::with_capacity(b * c * ho * wo);
        let mut arg = Vec::with_capacity(b * c * ho * wo);
        for p in 0..b * c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = (T::neg_infinity(), usize::MAX);
                    for ky in 0..k {
                        let Some(iy) = (oy * stride + ky).checked_sub(pad).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (ox * stride + kx).checked_sub(pad).filter(|&v| v < w) else {
                                continue;
                            };
                            let i = (p * h + iy) * w + ix;
                            if xd[i] > best.0 || best.1 == usize::MAX {
                                best = (xd[i], i);
                            }
                        }
                    }
                    y.push(best.0);
                    arg.push(best.1);
                }
            }
        }
        let len = xd.len();
        Ok(self.push(
            Tensor::new(vec![b, c, ho, wo], y)?,
            vec![x],
            Box::new(move |_, grad, _| {
                let mut d = vec![T::zero(); len];
                for (&i, &gv) in arg.iter().zip(grad) {
                    d[i] += gv;
                }
                vec![Some(d)]
            }),
        ))
    }

    /// Max over spatial dims: `[B, C, H, W] -> [B, C, 1, 1]`.
    pub fn global_maxpool(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = dims4(self.shape(x), "global_maxpool")?;
        if h * w == 0 {
            return shape_err("global_maxpool over an empty plane");
        }
        self.maxpool2d_full(x, b, c, h * w)
    }

    fn maxpool2d_full(&mut self, x: Var, b: usize, c: usize, n: usize) -> Result<Var> {
        let xd = self.data(x);
        let mut y = Vec::with_capacity(b * c);
        let mut arg = Vec::with_capacity(b * c);
        for (p, plane) in xd.chunks_exact(n).enumerate() {
            let (i, v) = plane
                .iter()
                .enumerate()
                .fold((0, plane[0]), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            y.push(v);
            arg.push(p * n + i);
        }
        let len = xd.len();
        Ok(self.push(
            Tensor::new(vec![b, c, 1, 1], y)?,
            vec![x],
            Box::new(move |_, grad, _| {
                let mut d = vec![T::zero(); len];
                for (&i, &gv) in arg.iter().zip(grad) {
                    d[i] += gv;
                }
                vec![Some(d)]
            }),
        ))
    }
}
