#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wigest_nn::{Graph, ParamStore, Tensor, Var};

pub mod cases;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `sum(out * r)` for a fixed random `r`, so every output element matters.
pub fn project(g: &mut Graph<f64>, out: Var, seed: u64) -> Var {
    let shape = g.shape(out).to_vec();
    let r = random_tensor(&mut rng(seed ^ 0x9e37), &shape);
    let r = g.input(r);
    let p = g.mul(out, r).unwrap();
    g.sum(p)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Largest relative error between reverse-mode and fourth-order central-difference
/// gradients of `f` with respect to every element of every input.
pub fn grad_check<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Var,
{
    let eps = 1e-3;
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input_with_grad(t.clone())).collect();
    let loss = f(&mut g, &vars);
    g.backward(loss, &mut ParamStore::new()).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.input(t.clone())).collect();
        let loss = f(&mut g, &vars);
        g.value(loss).data()[0]
    };
    let shifted = |k: usize, i: usize, delta: f64| {
        let mut p = inputs.to_vec();
        p[k].data_mut()[i] += delta;
        eval(&p)
    };
    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let numeric = (8.0 * (shifted(k, i, eps) - shifted(k, i, -eps))
                - (shifted(k, i, 2.0 * eps) - shifted(k, i, -2.0 * eps)))
                / (12.0 * eps);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    worst
}

/// Distinct values at least 0.02 apart and away from zero, so max and relu
/// kinks stay outside the finite-difference stencil.
pub fn separated_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * 0.02 + 0.01).collect();
    v.shuffle(rng);
    Tensor::new(shape.to_vec(), v).unwrap()
}
