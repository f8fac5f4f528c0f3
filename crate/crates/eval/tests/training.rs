use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wigest_core::seed::{self, tags};
use wigest_core::spectro::{FusedImage, IMAGE_CHANNELS};
use wigest_core::{DomainMeta, Environment, GestureLabel};
use wigest_eval::{
    evaluate, predict, run_protocol, run_protocol_with, train, Protocol, ProtocolConfig, Sample, SplitSpec,
    TrainConfig, TrainError,
};
use wigest_nn::{GestureNet, NetConfig};

const SIZE: usize = 64;

fn small_net() -> NetConfig {
    NetConfig {
        width_multiplier: 1.0 / 16.0,
        input_size: SIZE,
        ..NetConfig::default()
    }
}

/// Class `c` lights a horizontal band at rows `8c..8c+8` over faint noise.
fn toy_sample(class: usize, index: u32, rng: &mut ChaCha8Rng) -> Sample {
    let mut pixels = vec![0f32; IMAGE_CHANNELS * SIZE * SIZE];
    for ch in 0..IMAGE_CHANNELS {
        for r in 0..SIZE {
            for c in 0..SIZE {
                let band = r / 8 == class;
                pixels[(ch * SIZE + r) * SIZE + c] = if band { 1.0 } else { 0.0 } + rng.random_range(0.0..0.1);
            }
        }
    }
    Sample {
        image: FusedImage {
            height: SIZE,
            width: SIZE,
            pixels,
        },
        label: GestureLabel::ALL[class],
        meta: DomainMeta::new(Environment::Synthetic, index % 3, 1 + (index % 5) as u8, 1, index).unwrap(),
    }
}

fn toy_set(per_class: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..per_class * 6)
        .map(|i| toy_sample(i % 6, i as u32, &mut rng))
        .collect()
}

fn fresh_net(seed: u64) -> GestureNet<f32> {
    GestureNet::new(small_net(), &mut seed::rng(seed, tags::INIT)).unwrap()
}

#[test]
fn memorises_a_single_sample() {
    let data = toy_set(1, 0)[..1].to_vec();
    let mut net = fresh_net(0);
    let cfg = TrainConfig {
        epochs: 50,
        batch_size: 1,
        lr0: 0.01,
        lr_halving_period_epochs: 20,
        ..TrainConfig::default()
    };
    let history = train(&mut net, &data, &cfg).unwrap();
    assert_eq!(history.len(), 50);
    assert!(
        *history.last().unwrap() <= 0.01,
        "final loss {}",
        history.last().unwrap()
    );
}

#[test]
fn loss_keeps_falling_after_warmup_for_most_seeds() {
    // 12 samples fit one batch of the default recipe.
    let data = toy_set(2, 1);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let mut monotone = 0;
    for seed in 0..5 {
        let mut net = fresh_net(seed);
        let h = train(&mut net, &data, &TrainConfig { seed, ..cfg.clone() }).unwrap();
        if h[3..].windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 4, "only {monotone} of 5 seeds had falling loss");
}

#[test]
fn training_is_reproducible() {
    let data = toy_set(2, 2);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 5,
        seed: 11,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = fresh_net(3);
        let h = train(&mut net, &data, &cfg).unwrap();
        (h, predict(&mut net, &data).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn evaluation_does_not_change_the_network() {
    let data = toy_set(1, 3);
    let mut net = fresh_net(4);
    train(
        &mut net,
        &data,
        &TrainConfig {
            epochs: 2,
            batch_size: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let first = evaluate(&mut net, &data).unwrap();
    let probs = predict(&mut net, &data).unwrap();
    assert_eq!(evaluate(&mut net, &data).unwrap(), first);
    assert_eq!(predict(&mut net, &data).unwrap(), probs);
    for row in &probs {
        assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }
}

#[test]
fn empty_and_mis_sized_inputs_are_rejected() {
    let mut net = fresh_net(0);
    let cfg = TrainConfig::default();
    assert!(matches!(train(&mut net, &[], &cfg), Err(TrainError::Empty(_))));
    assert!(matches!(evaluate(&mut net, &[]), Err(TrainError::Empty(_))));
    let mut wrong = toy_set(1, 0)[..2].to_vec();
    wrong[1].image = FusedImage {
        height: 32,
        width: 32,
        pixels: vec![0.0; IMAGE_CHANNELS * 32 * 32],
    };
    assert!(matches!(train(&mut net, &wrong, &cfg), Err(TrainError::Config(_))));
}

fn protocol(runs: usize) -> ProtocolConfig {
    ProtocolConfig {
        split: SplitSpec {
            protocol: Protocol::InDomain { test_frac: 0.25 },
            seed: 5,
        },
        train: TrainConfig {
            epochs: 3,
            batch_size: 6,
            lr0: 0.003,
            seed: 20,
            ..TrainConfig::default()
        },
        net: small_net(),
        runs,
        resplit: true,
    }
}

#[test]
fn protocol_mean_is_mean_of_runs() {
    let data = toy_set(4, 4);
    let report = run_protocol(&data, &protocol(3)).unwrap();
    assert_eq!(report.runs.len(), 3);
    let acc = report.accuracies();
    assert!((report.mean_accuracy() - acc.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    for (k, r) in report.runs.iter().enumerate() {
        assert_eq!(r.seed, 20 + k as u64);
        assert_eq!(r.split_seed, 5 + k as u64);
        assert_eq!(r.train_size + r.test_size, data.len());
        assert_eq!(r.test_size, 6);
        assert_eq!(r.loss_history.len(), 3);
        assert_eq!(r.metrics.total(), 6);
    }
    assert_eq!(report.pooled().total(), 18);
}

#[test]
fn single_run_protocol_matches_manual_cycle_and_reruns_identically() {
    let data = toy_set(4, 6);
    let cfg = protocol(1);
    let mut saved = None;
    let report = run_protocol_with(&data, &cfg, |_, net| {
        saved = Some(net.store.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(report.mean_accuracy(), report.runs[0].metrics.accuracy);
    let again = run_protocol(&data, &cfg).unwrap();
    assert_eq!(again.runs[0].metrics, report.runs[0].metrics);
    assert_eq!(again.runs[0].loss_history, report.runs[0].loss_history);

    let split = wigest_eval::make_split(
        &data
            .iter()
            .map(|s| wigest_eval::SplitKey {
                label: s.label,
                meta: s.meta,
            })
            .collect::<Vec<_>>(),
        &cfg.split,
    )
    .unwrap();
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    let mut net = fresh_net(cfg.train.seed);
    let history = train(&mut net, &pick(&split.train), &cfg.train).unwrap();
    assert_eq!(history, report.runs[0].loss_history);
    assert_eq!(evaluate(&mut net, &pick(&split.test)).unwrap(), report.runs[0].metrics);
    let mut restored = fresh_net(99);
    restored.load_values_from(&saved.unwrap()).unwrap();
    assert_eq!(
        predict(&mut restored, &data).unwrap(),
        predict(&mut net, &data).unwrap()
    );
}

#[test]
fn zero_runs_is_a_config_error() {
    assert!(matches!(
        run_protocol(&toy_set(1, 0), &protocol(0)),
        Err(TrainError::Config(_))
    ));
}
