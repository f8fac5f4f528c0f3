use crate::graph::{Graph, Var};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{shape_err, NnError, Result, Tensor};

/// Output shape for same-rank broadcasting where each axis matches or is 1.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return shape_err(format!("broadcast needs equal rank: {a:?} vs {b:?}"));
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => shape_err(format!("cannot broadcast {a:?} with {b:?}")),
        })
        .collect()
}

fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut s = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = if shape[d] == 1 && out[d] != 1 { 0 } else { s };
        s *= shape[d];
    }
    strides
}

/// Visits every output offset with the matching offsets into both operands.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = out.len();
    let total: usize = out.iter().product();
    if total == 0 {
        return;
    }
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let last = out[rank - 1];
    let (la, lb) = (sa[rank - 1], sb[rank - 1]);
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut o = 0;
    while o < total {
        for j in 0..last {
            f(o + j, ia + j * la, ib + j * lb);
        }
        o += last;
        // odometer over the leading axes
        let mut d = rank - 1;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out[d] {
                break;
            }
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

impl<T: Scalar> Graph<T> {
    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, false)
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, true)
    }

    fn binary(&mut self, a: Var, b: Var, product: bool) -> Result<Var> {
        let (shape_a, shape_b) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out = broadcast_shape(&shape_a, &shape_b)?;
        let sa = broadcast_strides(&shape_a, &out);
        let sb = broadcast_strides(&shape_b, &out);
        let (da, db) = (self.data(a), self.data(b));
        let mut y = vec![T::zero(); out.iter().product()];
        for_each_broadcast(&out, &sa, &sb, |o, i, j| {
            y[o] = if product { da[i] * db[j] } else { da[i] + db[j] };
        });
        let value = Tensor::new(out.clone(), y)?;
        Ok(self.push(
            value,
            vec![a, b],
            Box::new(move |g, grad, need| {
                let (va, vb) = (g.data(a), g.data(b));
                let mut ga = need[0].then(|| vec![T::zero(); va.len()]);
                let mut gb = need[1].then(|| vec![T::zero(); vb.len()]);
                for_each_broadcast(&out, &sa, &sb, |o, i, j| {
                    if let Some(ga) = ga.as_mut() {
                        ga[i] += if product { grad[o] * vb[j] } else { grad[o] };
                    }
                    if let Some(gb) = gb.as_mut() {
                        gb[j] += if product { grad[o] * va[i] } else { grad[o] };
                    }
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value =
            Tensor::new(self.shape(x).to_vec(), self.data(x).iter().map(|&v| v * c).collect()).expect("same shape");
        self.push(
            value,
            vec![x],
            Box::new(move |_, grad, _| vec![Some(grad.iter().map(|&v| v * c).collect())]),
        )
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        let n = self.value(x).numel();
        let s = self.data(x).iter().copied().sum();
        self.push(
            Tensor::scalar(s),
            vec![x],
            Box::new(move |_, grad, _| vec![Some(vec![grad[0]; n])]),
        )
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel();
        let s = self.sum(x);
        self.scale(s, T::one() / T::of(n as f64))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y: Vec<T> = self.data(x).iter().map(|&v| sigmoid(v)).collect();
        let value = Tensor::new(self.shape(x).to_vec(), y).expect("same shape");
        let out = Var(self.len());
        self.push(
            value,
            vec![x],
            Box::new(move |g, grad, _| {
                let y = g.data(out);
                vec![Some(
                    grad.iter().zip(y).map(|(&d, &s)| d * s * (T::one() - s)).collect(),
                )]
            }),
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y: Vec<T> = self.data(x).iter().map(|&v| v.max(T::zero())).collect();
        let value = Tensor::new(self.shape(x).to_vec(), y).expect("same shape");
        self.push(
            value,
            vec![x],
            Box::new(move |g, grad, _| {
                let xs = g.data(x);
                vec![Some(
                    grad.iter()
                        .zip(xs)
                        .map(|(&d, &v)| if v > T::zero() { d } else { T::zero() })
                        .collect(),
                )]
            }),
        )
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let Some(&k) = shape.last() else {
            return shape_err("softmax of a rank-0 tensor");
        };
        if k == 0 {
            return shape_err("softmax over an empty axis");
        }
        let mut y = self.data(x).to_vec();
        for row in y.chunks_exact_mut(k) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let out = Var(self.len());
        Ok(self.push(
            Tensor::new(shape, y)?,
            vec![x],
            Box::new(move |g, grad, _| {
                let y = g.data(out);
                let mut dx = vec![T::zero(); y.len()];
                for ((dxr, yr), gr) in dx.chunks_exact_mut(k).zip(y.chunks_exact(k)).zip(grad.chunks_exact(k)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((d, &yv), &gv) in dxr.iter_mut().zip(yr).zip(gr) {
                        *d = yv * (gv - dot);
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
            return shape_err(format!(
                "cross_entropy needs [N, K] logits for {} labels, got {shape:?}",
                labels.len()
            ));
        }
        let (n, k) = (shape[0], shape[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(NnError::Label { label: bad, classes: k });
        }
        let mut probs = self.data(logits).to_vec();
        let mut loss = T::zero();
        for (row, &l) in probs.chunks_exact_mut(k).zip(labels) {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
            loss += lse - row[l];
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        let nt = T::of(n as f64);
        let labels = labels.to_vec();
        Ok(self.push(
            Tensor::scalar(loss / nt),
            vec![logits],
            Box::new(move |_, grad, _| {
                let mut d = probs.clone();
                for (row, &l) in d.chunks_exact_mut(k).zip(&labels) {
                    row[l] -= T::one();
                    for v in row.iter_mut() {
                        *v = *v * grad[0] / nt;
                    }
                }
                vec![Some(d)]
            }),
        ))
    }

    /// `x [N, in] · wᵀ + b` with `w [out, in]`, `b [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return shape_err(format!("linear: input {xs:?} vs weight {ws:?}"));
        }
        let (n, din, dout) = (xs[0], xs[1], ws[0]);
        if let Some(b) = b {
            if self.shape(b) != [dout] {
                return shape_err(format!("linear: bias {:?} vs {dout} outputs", self.shape(b)));
            }
        }
        let mut y = vec![T::zero(); n * dout];
        gemm(
            T::one(),
            MatRef::row_major(self.data(x), n, din),
            MatRef::row_major(self.data(w), dout, din).t(),
            T::zero(),
            &mut y,
        );
        if let Some(b) = b {
            let bd = self.data(b);
            for row in y.chunks_exact_mut(dout) {
                row.iter_mut().zip(bd).for_each(|(v, &c)| *v += c);
            }
        }
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.push(
            Tensor::new(vec![n, dout], y)?,
            parents,
            Box::new(move |g, grad, need| {
                let gm = MatRef::row_major(grad, n, dout);
                let dx = need[0].then(|| {
                    let mut d = vec![T::zero(); n * din];
                    gemm(T::one(), gm, MatRef::row_major(g.data(w), dout, din), T::zero(), &mut d);
                    d
                });
                let dw = need[1].then(|| {
                    let mut d = vec![T::zero(); dout * din];
                    gemm(
                        T::one(),
                        gm.t(),
                        MatRef::row_major(g.data(x), n, din),
                        T::zero(),
                        &mut d,
                    );
                    d
                });
                let mut out = vec![dx, dw];
                if need.len() == 3 {
                    let mut db = vec![T::zero(); dout];
                    for row in grad.chunks_exact(dout) {
                        db.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                    }
                    out.push(Some(db));
                }
                out
            }),
        ))
    }

    /// Batched matrix product of `[B, m, k]` and `[B, k, n]`, with either
    /// operand optionally transposed in its last two axes.
    pub fn bmm(&mut self, a: Var, b: Var, trans_a: bool, trans_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return shape_err(format!("bmm: {sa:?} vs {sb:?}"));
        }
        let (m, k) = if trans_a { (sa[2], sa[1]) } else { (sa[1], sa[2]) };
        let (k2, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if k != k2 {
            return shape_err(format!("bmm inner dims differ: {sa:?} vs {sb:?}"));
        }
        let batch = sa[0];
        let mut y = vec![T::zero(); batch * m * n];
        for i in 0..batch {
            gemm(
                T::one(),
                batch_view(self.data(a), &sa, trans_a, i),
                batch_view(self.data(b), &sb, trans_b, i),
                T::zero(),
                &mut y[i * m * n..(i + 1) * m * n],
            );
        }
        Ok(self.push(
            Tensor::new(vec![batch, m, n], y)?,
            vec![a, b],
            Box::new(move |g, grad, need| {
                let (va, vb) = (g.data(a), g.data(b));
                let da = need[0].then(|| {
                    let mut d = vec![T::zero(); va.len()];
                    let sz = sa[1] * sa[2];
                    for i in 0..batch {
                        let gm = MatRef::row_major(&grad[i * m * n..(i + 1) * m * n], m, n);
                        let bm = batch_view(vb, &sb, trans_b, i);
                        let out = &mut d[i * sz..(i + 1) * sz];
                        if trans_a {
                            gemm(T::one(), bm, gm.t(), T::zero(), out);
                        } else {
                            gemm(T::one(), gm, bm.t(), T::zero(), out);
                        }
                    }
                    d
                });
                let db = need[1].then(|| {
                    let mut d = vec![T::zero(); vb.len()];
                    let sz = sb[1] * sb[2];
                    for i in 0..batch {
                        let gm = MatRef::row_major(&grad[i * m * n..(i + 1) * m * n], m, n);
                        let am = batch_view(va, &sa, trans_a, i);
                        let out = &mut d[i * sz..(i + 1) * sz];
                        if trans_b {
                            gemm(T::one(), gm.t(), am, T::zero(), out);
                        } else {
                            gemm(T::one(), am.t(), gm, T::zero(), out);
                        }
                    }
                    d
                });
                vec![da, db]
            }),
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape.to_vec())?;
        Ok(self.push(value, vec![x], Box::new(|_, grad, _| vec![Some(grad.to_vec())])))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return shape_err(format!("narrow axis {axis} [{start}, {}) of {shape:?}", start + len));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let (full, part) = (shape[axis] * inner, len * inner);
        let src = self.data(x);
        let mut y = Vec::with_capacity(outer * part);
        for o in 0..outer {
            y.extend_from_slice(&src[o * full + start * inner..o * full + start * inner + part]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let n = src.len();
        Ok(self.push(
            Tensor::new(out_shape, y)?,
            vec![x],
            Box::new(move |_, grad, _| {
                let mut d = vec![T::zero(); n];
                for o in 0..outer {
                    d[o * full + start * inner..o * full + start * inner + part]
                        .copy_from_slice(&grad[o * part..(o + 1) * part]);
                }
                vec![Some(d)]
            }),
        ))
    }

    /// Joins tensors that agree on every axis but `axis`.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return shape_err("concat of nothing");
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return shape_err(format!("concat axis {axis} for rank {}", base.len()));
        }
        let mut sizes = Vec::with_capacity(xs.len());
        for &v in xs {
            let s = self.shape(v);
            if s.len() != base.len() || s.iter().zip(&base).enumerate().any(|(d, (a, b))| d != axis && a != b) {
                return shape_err(format!("concat: {s:?} vs {base:?} along {axis}"));
            }
            sizes.push(s[axis]);
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let total: usize = sizes.iter().sum();
        let mut y = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &sz) in xs.iter().zip(&sizes) {
                y.extend_from_slice(&self.data(v)[o * sz * inner..(o + 1) * sz * inner]);
            }
        }
        let mut out_shape = base;
        out_shape[axis] = total;
        Ok(self.push(
            Tensor::new(out_shape, y)?,
            xs.to_vec(),
            Box::new(move |_, grad, need| {
                let mut out: Vec<Option<Vec<T>>> = sizes
                    .iter()
                    .zip(need)
                    .map(|(&sz, &nd)| nd.then(|| Vec::with_capacity(outer * sz * inner)))
                    .collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (d, &sz) in out.iter_mut().zip(&sizes) {
                        if let Some(d) = d {
                            d.extend_from_slice(&grad[off..off + sz * inner]);
                        }
                        off += sz * inner;
                    }
                }
                out
            }),
        ))
    }
}

/// Matrix `i` of a `[B, r, c]` buffer, transposed if `t`.
fn batch_view<'a, T>(data: &'a [T], shape: &[usize], t: bool, i: usize) -> MatRef<'a, T> {
    let sz = shape[1] * shape[2];
    let mat = MatRef::row_major(&data[i * sz..(i + 1) * sz], shape[1], shape[2]);
    if t {
        mat.t()
    } else {
        mat
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
