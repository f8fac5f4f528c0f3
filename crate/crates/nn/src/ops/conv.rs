use crate::graph::{Graph, Var};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{shape_err, Result, Tensor};

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.batch * self.ho * self.wo
    }

    /// Source offset in `x` for a column entry, or `None` inside the padding.
    #[inline]
    fn source(&self, b: usize, c: usize, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad)?;
        (iy < self.h && ix < self.w).then(|| ((b * self.cin + c) * self.h + iy) * self.w + ix)
    }
}

/// Unfolds `x` into `[cin·k·k, batch·ho·wo]`.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let ncols = g.cols();
    let mut cols = vec![T::zero(); g.rows() * ncols];
    for c in 0..g.cin {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                let mut j = 0;
                for b in 0..g.batch {
                    for oy in 0..g.ho {
                        for ox in 0..g.wo {
                            if let Some(s) = g.source(b, c, oy, ox, ky, kx) {
                                dst[j] = x[s];
                            }
                            j += 1;
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let ncols = g.cols();
    for c in 0..g.cin {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                let mut j = 0;
                for b in 0..g.batch {
                    for oy in 0..g.ho {
                        for ox in 0..g.wo {
                            if let Some(s) = g.source(b, c, oy, ox, ky, kx) {
                                dx[s] += src[j];
                            }
                            j += 1;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Graph<T> {
    /// Cross-correlation of `x [B, Cin, H, W]` with `w [Cout, Cin, k, k]`.
    pub fn conv2d(&mut self, x: Var, w: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] || ws[2] != ws[3] {
            return shape_err(format!("conv2d: input {xs:?} vs weight {ws:?}"));
        }
        if stride == 0 {
            return shape_err("conv2d stride must be positive");
        }
        let (cout, k) = (ws[0], ws[2]);
        let (hp, wp) = (xs[2] + 2 * pad, xs[3] + 2 * pad);
        if k == 0 || hp < k || wp < k {
            return shape_err(format!(
                "conv2d: {k}x{k} kernel larger than padded {}x{} input",
                xs[2], xs[3]
            ));
        }
        let geom = ConvGeom {
            batch: xs[0],
            cin: xs[1],
            h: xs[2],
            w: xs[3],
            k,
            stride,
            pad,
            ho: (hp - k) / stride + 1,
            wo: (wp - k) / stride + 1,
        };
        if let Some(b) = bias {
            if self.shape(b) != [cout] {
                return shape_err(format!("conv2d: bias {:?} vs {cout} channels", self.shape(b)));
            }
        }
        let hw = geom.ho * geom.wo;
        let cols = im2col(self.data(x), &geom);
        let mut tmp = vec![T::zero(); cout * geom.cols()];
        gemm(
            T::one(),
            MatRef::row_major(self.data(w), cout, geom.rows()),
            MatRef::row_major(&cols, geom.rows(), geom.cols()),
            T::zero(),
            &mut tmp,
        );
        drop(cols);
        // [cout, B, hw] -> [B, cout, hw]
        let mut y = vec![T::zero(); tmp.len()];
        for co in 0..cout {
            let bias_v = bias.map_or(T::zero(), |b| self.data(b)[co]);
            for b in 0..geom.batch {
                let src = &tmp[(co * geom.batch + b) * hw..(co * geom.batch + b + 1) * hw];
                let dst = &mut y[(b * cout + co) * hw..(b * cout + co + 1) * hw];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = s + bias_v;
                }
            }
        }
        let mut parents = vec![x, w];
        parents.extend(bias);
        Ok(self.push(
            Tensor::new(vec![geom.batch, cout, geom.ho, geom.wo], y)?,
            parents,
            Box::new(move |g, grad, need| {
                let mut gp = vec![T::zero(); grad.len()];
                for b in 0..geom.batch {
                    for co in 0..cout {
                        gp[(co * geom.batch + b) * hw..(co * geom.batch + b + 1) * hw]
                            .copy_from_slice(&grad[(b * cout + co) * hw..(b * cout + co + 1) * hw]);
                    }
                }
                let gm = MatRef::row_major(&gp, cout, geom.cols());
                let dw = need[1].then(|| {
                    let cols = im2col(g.data(x), &geom);
                    let mut d = vec![T::zero(); cout * geom.rows()];
                    gemm(
                        T::one(),
                        gm,
                        MatRef::row_major(&cols, geom.rows(), geom.cols()).t(),
                        T::zero(),
                        &mut d,
                    );
                    d
                });
                let dx = need[0].then(|| {
                    let mut dcols = vec![T::zero(); geom.rows() * geom.cols()];
                    gemm(
                        T::one(),
                        MatRef::row_major(g.data(w), cout, geom.rows()).t(),
                        gm,
                        T::zero(),
                        &mut dcols,
                    );
                    let mut d = vec![T::zero(); g.value(x).numel()];
                    col2im(&dcols, &geom, &mut d);
                    d
                });
                let mut out = vec![dx, dw];
                if need.len() == 3 {
                    out.push(Some(
                        gp.chunks_exact(geom.cols()).map(|r| r.iter().copied().sum()).collect(),
                    ));
                }
                out
            }),
        ))
    }

    /// One odd-length kernel `[k]` applied to every channel of `x [B, G, L]`
    /// with zero padding `(k-1)/2`; length is preserved.
    pub fn conv1d_shared(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(kernel).to_vec();
        if xs.len() != 3 || ks.len() != 1 {
            return shape_err(format!("conv1d_shared: input {xs:?}, kernel {ks:?}"));
        }
        let k = ks[0];
        if k.is_multiple_of(2) {
            return shape_err(format!("conv1d_shared needs an odd kernel, got {k}"));
        }
        let len = xs[2];
        let pad = (k - 1) / 2;
        let xd = self.data(x);
        let kd = self.data(kernel);
        let mut y = vec![T::zero(); xd.len()];
        for (yr, xr) in y.chunks_exact_mut(len).zip(xd.chunks_exact(len)) {
            for (i, out) in yr.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (t, &kv) in kd.iter().enumerate() {
                    if let Some(j) = (i + t).checked_sub(pad).filter(|&j| j < len) {
                        acc += kv * xr[j];
                    }
                }
                *out = acc;
            }
        }
        Ok(self.push(
            Tensor::new(xs, y)?,
            vec![x, kernel],
            Box::new(move |g, grad, need| {
                let (xd, kd) = (g.data(x), g.data(kernel));
                let mut dx = need[0].then(|| vec![T::zero(); xd.len()]);
                let mut dk = need[1].then(|| vec![T::zero(); k]);
                for (r, (gr, xr)) in grad.chunks_exact(len).zip(xd.chunks_exact(len)).enumerate() {
                    for (i, &gv) in gr.iter().enumerate() {
                        for t in 0..k {
                            if let Some(j) = (i + t).checked_sub(pad).filter(|&j| j < len) {
                                if let Some(dx) = dx.as_mut() {
                                    dx[r * len + j] += gv * kd[t];
                                }
                                if let Some(dk) = dk.as_mut() {
                                    dk[t] += gv * xr[j];
                                }
                            }
                        }
                    }
                }
                vec![dx, dk]
            }),
        ))
    }
}
