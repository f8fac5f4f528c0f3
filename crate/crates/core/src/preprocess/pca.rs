//! Complex PCA over pair streams.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::ConjugateStream;
use crate::error::{precondition, ProcessError};

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Projection of the centred streams onto the principal eigenvector.
    pub component: Vec<Complex64>,
    /// Unit-norm principal eigenvector; its largest-magnitude entry is real
    /// and positive.
    pub eigenvector: Vec<Complex64>,
    /// Eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaResult {
    /// Share of total variance carried by the first component.
    pub fn explained_variance_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        if total > 0.0 {
            self.eigenvalues[0].max(0.0) / total
        } else {
            0.0
        }
    }
}

/// First principal component of the pair streams.
///
/// Streams are mean-centred over time, the Hermitian covariance
/// `R = (1/T) Σ_t x(t) x(t)^H` is diagonalised, and the output is
/// `v^H x(t)` for the top eigenvector `v`.
pub fn pca_first_component(cstream: &ConjugateStream) -> Result<PcaResult, ProcessError> {
    let (t_len, n) = (cstream.n_time, cstream.n_pairs);
    if n < 2 || t_len < 2 {
        return Err(precondition("PCA needs at least 2 pair streams and 2 samples"));
    }
    let mut centred = cstream.data.clone();
    let mut scale = 0.0;
    for p in 0..n {
        let mean = (0..t_len).map(|t| cstream.data[t * n + p]).sum::<Complex64>() / t_len as f64;
        for t in 0..t_len {
            centred[t * n + p] -= mean;
            scale += cstream.data[t * n + p].norm_sqr();
        }
    }
    // lower triangle, row-major, real and imaginary parts kept apart so the
    // inner loop vectorises
    let (mut acc_re, mut acc_im) = (vec![0.0; n * n], vec![0.0; n * n]);
    let (mut xr, mut xim) = (vec![0.0; n], vec![0.0; n]);
    for row in centred.chunks_exact(n) {
        for (k, c) in row.iter().enumerate() {
            xr[k] = c.re;
            xim[k] = c.im;
        }
        for i in 0..n {
            let (ar, ai) = (xr[i], xim[i]);
            let dst_re = &mut acc_re[i * n..i * n + i + 1];
            let dst_im = &mut acc_im[i * n..i * n + i + 1];
            for j in 0..=i {
                dst_re[j] += ar * xr[j] + ai * xim[j];
                dst_im[j] += ai * xr[j] - ar * xim[j];
            }
        }
    }
    let acc: Vec<Complex64> = acc_re
        .into_iter()
        .zip(acc_im)
        .map(|(r, i)| Complex64::new(r, i))
        .collect();
    let mut cov =
        DMatrix::<Complex64>::from_fn(n, n, |i, j| if j <= i { acc[i * n + j] } else { acc[j * n + i].conj() });
    cov /= Complex64::new(t_len as f64, 0.0);

    let trace: f64 = (0..n).map(|i| cov[(i, i)].re).sum();
    let mean_power = scale / (t_len * n) as f64;
    if !(trace > 1e-20 * mean_power.max(1.0)) {
        return Err(ProcessError::DegenerateStreams);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let mut v: Vec<Complex64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let anchor = v
        .iter()
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, c)| {
                if c.norm() > best.1 {
                    (i, c.norm())
                } else {
                    best
                }
            },
        )
        .0;
    let rot = v[anchor].conj() / (v[anchor].norm() * norm);
    for c in v.iter_mut() {
        *c *= rot;
    }
    v[anchor] = Complex64::new(v[anchor].re, 0.0);

    let component = centred
        .chunks_exact(n)
        .map(|row| row.iter().zip(&v).map(|(x, w)| w.conj() * x).sum())
        .collect();
    Ok(PcaResult {
        component,
        eigenvector: v,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}
