mod common;

use common::cases::{self, SEEDS, TOL};

fn check(name: &str, case: fn(u64) -> f64) {
    for seed in 0..SEEDS {
        let err = case(seed);
        assert!(err <= TOL, "{name} seed {seed}: relative error {err:e}");
    }
}

macro_rules! gradient_tests {
    ($($case:ident),* $(,)?) => {
        $(
            #[test]
            fn $case() {
                check(stringify!($case), cases::$case);
            }
        )*

        #[test]
        fn every_listed_case_has_a_test() {
            let tested = [$(cases::$case as fn(u64) -> f64),*];
            assert_eq!(tested.len(), cases::PRIMITIVES.len());
            for (name, f) in cases::PRIMITIVES {
                assert!(tested.contains(f), "{name} has no test");
            }
        }
    };
}

gradient_tests!(
    conv2d,
    conv1d_shared,
    avgpool_w,
    avgpool_h,
    global_avgpool,
    global_maxpool,
    avgpool2d,
    maxpool2d,
    groupnorm,
    batchnorm2d_train,
    batchnorm2d_eval,
    sigmoid,
    relu,
    scale_mean,
    broadcast_add_mul,
    softmax,
    cross_entropy,
    linear,
    bmm,
    narrow_concat_reshape,
);
