use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use wigest_core::seed::{self, tags};
use wigest_core::{DomainMeta, Environment, GestureLabel, RecordingSession};

use crate::train::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    /// Stratified by environment and class; `test_frac` of each stratum is held out.
    InDomain {
        test_frac: f64,
    },
    LeaveOneEnvironmentOut(Environment),
    CrossLocation(u8),
    CrossOrientation(u8),
    CrossUser(u32),
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::InDomain { test_frac } => write!(f, "in-domain (test fraction {test_frac})"),
            Protocol::LeaveOneEnvironmentOut(e) => write!(f, "leave-one-environment-out ({e})"),
            Protocol::CrossLocation(l) => write!(f, "cross-location (location {l})"),
            Protocol::CrossOrientation(o) => write!(f, "cross-orientation (orientation {o})"),
            Protocol::CrossUser(u) => write!(f, "cross-user (user {u})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub protocol: Protocol,
    pub seed: u64,
}

/// What a split needs to know about one session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitKey {
    pub label: GestureLabel,
    pub meta: DomainMeta,
}

impl SplitKey {
    pub fn of(session: &RecordingSession) -> Self {
        SplitKey {
            label: session.label,
            meta: session.meta,
        }
    }
}

/// Sorted, disjoint index sets covering the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn make_split(keys: &[SplitKey], spec: &SplitSpec) -> Result<Split, TrainError> {
    if keys.is_empty() {
        return Err(TrainError::Split("empty corpus".into()));
    }
    let held_out = |pred: &dyn Fn(&DomainMeta) -> bool, what: String| -> Result<Split, TrainError> {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..keys.len()).partition(|&i| pred(&keys[i].meta));
        if test.is_empty() {
            return Err(TrainError::Split(format!("{what} does not occur in the corpus")));
        }
        Ok(Split { train, test })
    };
    match spec.protocol {
        Protocol::InDomain { test_frac } => in_domain(keys, test_frac, spec.seed),
        Protocol::LeaveOneEnvironmentOut(env) => held_out(&|m| m.environment == env, format!("environment {env}")),
        Protocol::CrossLocation(l) => held_out(&|m| m.location_id == l, format!("location {l}")),
        Protocol::CrossOrientation(o) => held_out(&|m| m.orientation_id == o, format!("orientation {o}")),
        Protocol::CrossUser(u) => held_out(&|m| m.user_id == u, format!("user {u}")),
    }
}

/// Per environment, `round(n_env * frac)` test sessions are spread over the
/// classes by largest remainder, so each class stratum is within one of
/// `n_class * frac`.
fn in_domain(keys: &[SplitKey], frac: f64, split_seed: u64) -> Result<Split, TrainError> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(TrainError::Split(format!("test fraction {frac} outside (0, 1)")));
    }
    let mut strata: BTreeMap<Environment, BTreeMap<GestureLabel, Vec<usize>>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata
            .entry(k.meta.environment)
            .or_default()
            .entry(k.label)
            .or_default()
            .push(i);
    }
    let mut rng = seed::rng(split_seed, tags::SPLIT);
    let mut test = Vec::new();
    for classes in strata.values_mut() {
        let n_env: usize = classes.values().map(Vec::len).sum();
        let target = (n_env as f64 * frac).round() as usize;
        let mut quota: Vec<(usize, f64)> = classes
            .values()
            .map(|v| {
                let exact = v.len() as f64 * frac;
                (exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let assigned: usize = quota.iter().map(|q| q.0).sum();
        let mut order: Vec<usize> = (0..quota.len()).collect();
        order.sort_by(|&a, &b| quota[b].1.total_cmp(&quota[a].1).then(a.cmp(&b)));
        for &c in order.iter().take(target.saturating_sub(assigned)) {
            quota[c].0 += 1;
        }
        for (members, (take, _)) in classes.values_mut().zip(quota) {
            members.shuffle(&mut rng);
            test.extend_from_slice(&members[..take.min(members.len())]);
        }
    }
    test.sort_unstable();
    let mut is_test = vec![false; keys.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..keys.len()).filter(|&i| !is_test[i]).collect();
    Ok(Split { train, test })
}
