//! Finite-difference cases shared by the gradient tests and the acceptance run.
//! Each case draws its shapes from `seed` and returns the worst relative error.

use rand::seq::SliceRandom;
use rand::Rng;
use wigest_nn::{GestureNet, Graph, Mode, NetConfig, Tensor};

use super::*;

pub const SEEDS: u64 = 20;
pub const TOL: f64 = 1e-4;
pub const FULL_MODEL_TOL: f64 = 1e-3;

pub const PRIMITIVES: &[(&str, fn(u64) -> f64)] = &[
    ("conv2d", conv2d),
    ("conv1d_shared", conv1d_shared),
    ("avgpool_w", avgpool_w),
    ("avgpool_h", avgpool_h),
    ("global_avgpool", global_avgpool),
    ("global_maxpool", global_maxpool),
    ("avgpool2d", avgpool2d),
    ("maxpool2d", maxpool2d),
    ("groupnorm", groupnorm),
    ("batchnorm2d_train", batchnorm2d_train),
    ("batchnorm2d_eval", batchnorm2d_eval),
    ("sigmoid", sigmoid),
    ("relu", relu),
    ("scale_mean", scale_mean),
    ("broadcast add/mul", broadcast_add_mul),
    ("softmax", softmax),
    ("cross_entropy", cross_entropy),
    ("linear", linear),
    ("bmm", bmm),
    ("narrow/concat/reshape", narrow_concat_reshape),
];

fn shape_4d(r: &mut rand_chacha::ChaCha8Rng, max_hw: usize) -> [usize; 4] {
    [
        r.random_range(1..3),
        r.random_range(1..4),
        r.random_range(1..max_hw),
        r.random_range(1..max_hw),
    ]
}

fn random_4d(r: &mut rand_chacha::ChaCha8Rng, max_hw: usize) -> Tensor<f64> {
    let shape = shape_4d(r, max_hw);
    random_tensor(r, &shape)
}

fn separated_4d(r: &mut rand_chacha::ChaCha8Rng, max_hw: usize) -> Tensor<f64> {
    let shape = shape_4d(r, max_hw);
    separated_tensor(r, &shape)
}

pub fn conv2d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, cin, cout) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
    let k = [1, 3][r.random_range(0..2)];
    let stride = r.random_range(1..3);
    let pad = r.random_range(0..=k / 2 + 1);
    let (h, w) = (r.random_range(k..k + 5), r.random_range(k..k + 5));
    let x = random_tensor(&mut r, &[b, cin, h, w]);
    let w = random_tensor(&mut r, &[cout, cin, k, k]);
    let bias = random_tensor(&mut r, &[cout]);
    grad_check(&[x, w, bias], |g, v| {
        let y = g.conv2d(v[0], v[1], Some(v[2]), stride, pad).unwrap();
        project(g, y, seed)
    })
}

pub fn conv1d_shared(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = [1, 3, 5, 7, 9][r.random_range(0..5)];
    let shape = [r.random_range(1..3), r.random_range(1..4), r.random_range(2..12)];
    let x = random_tensor(&mut r, &shape);
    let kern = random_tensor(&mut r, &[k]);
    grad_check(&[x, kern], |g, v| {
        let y = g.conv1d_shared(v[0], v[1]).unwrap();
        project(g, y, seed)
    })
}

pub fn avgpool_w(seed: u64) -> f64 {
    let x = random_4d(&mut rng(seed), 6);
    grad_check(&[x], |g, v| {
        let y = g.avgpool_w(v[0]).unwrap();
        project(g, y, seed)
    })
}

pub fn avgpool_h(seed: u64) -> f64 {
    let x = random_4d(&mut rng(seed), 6);
    grad_check(&[x], |g, v| {
        let y = g.avgpool_h(v[0]).unwrap();
        project(g, y, seed)
    })
}

pub fn global_avgpool(seed: u64) -> f64 {
    let x = random_4d(&mut rng(seed), 6);
    grad_check(&[x], |g, v| {
        let y = g.global_avgpool(v[0]).unwrap();
        project(g, y, seed)
    })
}

pub fn global_maxpool(seed: u64) -> f64 {
    let x = separated_4d(&mut rng(seed), 6);
    grad_check(&[x], |g, v| {
        let y = g.global_maxpool(v[0]).unwrap();
        project(g, y, seed)
    })
}

pub fn avgpool2d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = r.random_range(1..4);
    let shape = [2, 2, k * r.random_range(1..3), k * r.random_range(1..3)];
    let x = random_tensor(&mut r, &shape);
    grad_check(&[x], |g, v| {
        let y = g.avgpool2d(v[0], k).unwrap();
        project(g, y, seed)
    })
}

pub fn maxpool2d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [2, 2, r.random_range(3..8), r.random_range(3..8)];
    let x = separated_tensor(&mut r, &shape);
    grad_check(&[x], |g, v| {
        let y = g.maxpool2d(v[0], 3, 2, 1).unwrap();
        project(g, y, seed)
    })
}

pub fn groupnorm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let groups = r.random_range(1..4);
    let c = groups * r.random_range(1..3);
    let shape = [r.random_range(1..3), c, r.random_range(2..6)];
    let x = random_tensor(&mut r, &shape);
    let gamma = random_tensor(&mut r, &[c]);
    let beta = random_tensor(&mut r, &[c]);
    grad_check(&[x, gamma, beta], |g, v| {
        let y = g.groupnorm(v[0], groups, v[1], v[2]).unwrap();
        project(g, y, seed)
    })
}

pub fn batchnorm2d_train(seed: u64) -> f64 {
    let mut r = rng(seed);
    let c = r.random_range(1..4);
    let shape = [r.random_range(2..4), c, r.random_range(1..4), r.random_range(1..4)];
    let x = random_tensor(&mut r, &shape);
    let gamma = random_tensor(&mut r, &[c]);
    let beta = random_tensor(&mut r, &[c]);
    grad_check(&[x, gamma, beta], |g, v| {
        let (y, _) = g.batchnorm2d_train(v[0], v[1], v[2]).unwrap();
        project(g, y, seed)
    })
}

pub fn batchnorm2d_eval(seed: u64) -> f64 {
    let mut r = rng(seed);
    let c = r.random_range(1..4);
    let x = random_4d(&mut r, 4);
    let x = random_tensor(&mut r, &[x.shape()[0], c, x.shape()[2], x.shape()[3]]);
    let gamma = random_tensor(&mut r, &[c]);
    let beta = random_tensor(&mut r, &[c]);
    let mean: Vec<f64> = (0..c).map(|_| r.random_range(-0.5..0.5)).collect();
    let var: Vec<f64> = (0..c).map(|_| r.random_range(0.5..2.0)).collect();
    grad_check(&[x, gamma, beta], |g, v| {
        let y = g.batchnorm2d_eval(v[0], v[1], v[2], &mean, &var).unwrap();
        project(g, y, seed)
    })
}

pub fn sigmoid(seed: u64) -> f64 {
    let x = random_4d(&mut rng(seed), 4);
    grad_check(&[x], |g, v| {
        let y = g.sigmoid(v[0]);
        project(g, y, seed)
    })
}

pub fn relu(seed: u64) -> f64 {
    let x = separated_4d(&mut rng(seed), 4);
    grad_check(&[x], |g, v| {
        let y = g.relu(v[0]);
        project(g, y, seed)
    })
}

pub fn scale_mean(seed: u64) -> f64 {
    let x = random_4d(&mut rng(seed), 4);
    grad_check(&[x], |g, v| {
        let y = g.scale(v[0], -1.7);
        let z = g.mul(y, v[0]).unwrap();
        g.mean(z)
    })
}

pub fn broadcast_add_mul(seed: u64) -> f64 {
    let mut r = rng(seed);
    let full = [
        r.random_range(1..3),
        r.random_range(1..4),
        r.random_range(1..4),
        r.random_range(1..4),
    ];
    let mut s1 = full;
    let mut s2 = full;
    for d in 0..4 {
        match r.random_range(0..3) {
            0 => s1[d] = 1,
            1 => s2[d] = 1,
            _ => {}
        }
    }
    let a = random_tensor(&mut r, &s1);
    let b = random_tensor(&mut r, &s2);
    let c = random_tensor(&mut r, &full);
    grad_check(&[a, b, c], |g, v| {
        let p = g.mul(v[0], v[1]).unwrap();
        let q = g.add(p, v[2]).unwrap();
        let q = g.add(v[1], q).unwrap();
        project(g, q, seed)
    })
}

pub fn softmax(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.random_range(1..4), r.random_range(1..4), r.random_range(1..7)];
    let x = random_tensor(&mut r, &shape);
    grad_check(&[x], |g, v| {
        let y = g.softmax(v[0]).unwrap();
        project(g, y, seed)
    })
}

pub fn cross_entropy(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, k) = (r.random_range(1..5), r.random_range(2..7));
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let x = random_tensor(&mut r, &[n, k]);
    grad_check(&[x], |g, v| g.cross_entropy(v[0], &labels).unwrap())
}

pub fn linear(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, din, dout) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..5));
    let x = random_tensor(&mut r, &[n, din]);
    let w = random_tensor(&mut r, &[dout, din]);
    let b = random_tensor(&mut r, &[dout]);
    grad_check(&[x, w, b], |g, v| {
        let y = g.linear(v[0], v[1], Some(v[2])).unwrap();
        project(g, y, seed)
    })
}

pub fn bmm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, m, k, n) = (
        r.random_range(1..3),
        r.random_range(1..4),
        r.random_range(1..4),
        r.random_range(1..4),
    );
    let (ta, tb) = (r.random_bool(0.5), r.random_bool(0.5));
    let a = random_tensor(&mut r, &if ta { [b, k, m] } else { [b, m, k] });
    let bb = random_tensor(&mut r, &if tb { [b, n, k] } else { [b, k, n] });
    grad_check(&[a, bb], |g, v| {
        let y = g.bmm(v[0], v[1], ta, tb).unwrap();
        project(g, y, seed)
    })
}

pub fn narrow_concat_reshape(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.random_range(1..3), r.random_range(2..5), r.random_range(1..4)];
    let axis = r.random_range(0..3);
    let x = random_tensor(&mut r, &shape);
    let y = random_tensor(&mut r, &shape);
    grad_check(&[x, y], |g, v| {
        let len = shape[axis];
        let start = len / 2;
        let part = g.narrow(v[0], axis, start, len - start).unwrap();
        let cat = g.concat(&[v[1], part, v[0]], axis).unwrap();
        let n = g.value(cat).numel();
        let flat = g.reshape(cat, &[n]).unwrap();
        let sq = g.mul(flat, flat).unwrap();
        project(g, sq, seed)
    })
}

/// Whole network at width 1/16 on 32x32 inputs: 50 random trainable
/// coordinates against central differences of the cross-entropy loss.
pub fn full_model(seed: u64) -> f64 {
    let config = NetConfig {
        width_multiplier: 1.0 / 16.0,
        input_size: 32,
        ..NetConfig::default()
    };
    let mut net = GestureNet::<f64>::new(config, &mut rng(seed)).unwrap();
    let x = random_tensor(&mut rng(seed + 1), &[2, 3, 32, 32]);
    let labels = [3, 0];
    let loss_of = |net: &mut GestureNet<f64>| {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let out = net.forward(&mut g, xv, Mode::Train).unwrap();
        let loss = g.cross_entropy(out.logits, &labels).unwrap();
        (g, loss)
    };
    let (mut g, loss) = loss_of(&mut net);
    g.backward(loss, &mut net.store).unwrap();

    let mut coords: Vec<(usize, usize)> = net
        .store
        .iter()
        .enumerate()
        .filter(|(_, p)| p.requires_grad)
        .flat_map(|(id, p)| (0..p.value.numel()).map(move |i| (id, i)))
        .collect();
    coords.shuffle(&mut rng(seed + 2));
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for &(id, i) in coords.iter().take(50) {
        let analytic = net.store.get(id).grad.data()[i];
        let orig = net.store.get(id).value.data()[i];
        let mut eval = |v: f64| {
            net.store.get_mut(id).value.data_mut()[i] = v;
            let (g, loss) = loss_of(&mut net);
            g.value(loss).data()[0]
        };
        let numeric = (eval(orig + eps) - eval(orig - eps)) / (2.0 * eps);
        eval(orig);
        worst = worst.max(rel_err(analytic, numeric));
    }
    worst
}
