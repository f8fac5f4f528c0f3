//! Protocol reports.
//!
//! The CSV has one row per run:
//!
//! ```text
//! run,seed,split_seed,train_size,test_size,accuracy,c0_0,c0_1,...,c5_5
//! ```
//!
//! where `ci_j` counts test samples of class `i` predicted as `j`.

use std::fmt::Write as _;

use wigest_core::GestureLabel;

use crate::metrics::{Metrics, N_CLASSES};
use crate::protocol::ProtocolReport;

pub fn csv_header() -> String {
    let mut h = String::from("run,seed,split_seed,train_size,test_size,accuracy");
    for i in 0..N_CLASSES {
        for j in 0..N_CLASSES {
            let _ = write!(h, ",c{i}_{j}");
        }
    }
    h
}

pub fn to_csv(report: &ProtocolReport) -> String {
    let mut s = csv_header();
    s.push('\n');
    for r in &report.runs {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            r.run, r.seed, r.split_seed, r.train_size, r.test_size, r.metrics.accuracy
        );
        for c in r.metrics.confusion.iter().flatten() {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    s
}

/// One parsed CSV row: run index, stated accuracy and confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRun {
    pub run: usize,
    pub accuracy: f64,
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRun>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(csv_header().as_str()) {
        return Err("unexpected metrics CSV header".into());
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 + N_CLASSES * N_CLASSES {
                return Err(format!("row {}: {} fields", n + 1, f.len()));
            }
            let bad = |what: &str| format!("row {}: bad {what}", n + 1);
            let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
            for (k, cell) in confusion.iter_mut().flatten().enumerate() {
                *cell = f[6 + k].parse().map_err(|_| bad("count"))?;
            }
            Ok(CsvRun {
                run: f[0].parse().map_err(|_| bad("run"))?,
                accuracy: f[5].parse().map_err(|_| bad("accuracy"))?,
                confusion,
            })
        })
        .collect()
}

fn fmt_pct(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{:.2}%", 100.0 * v)
    }
}

pub fn confusion_table(m: &Metrics) -> String {
    let names: Vec<&str> = GestureLabel::ALL.iter().map(|g| g.name()).collect();
    let mut s = format!("{:>10}", "truth\\pred");
    for n in &names {
        let _ = write!(s, "{n:>9}");
    }
    let _ = writeln!(s, "{:>10}", "recall");
    for (i, row) in m.confusion.iter().enumerate() {
        let _ = write!(s, "{:>10}", names[i]);
        for c in row {
            let _ = write!(s, "{c:>9}");
        }
        let _ = writeln!(s, "{:>10}", fmt_pct(m.per_class_accuracy[i]));
    }
    s
}

pub fn to_text(report: &ProtocolReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "protocol: {}", report.protocol);
    let _ = writeln!(
        s,
        "{:>4} {:>20} {:>7} {:>6} {:>9}",
        "run", "seed", "train", "test", "accuracy"
    );
    for r in &report.runs {
        let _ = writeln!(
            s,
            "{:>4} {:>20} {:>7} {:>6} {:>9}",
            r.run,
            r.seed,
            r.train_size,
            r.test_size,
            fmt_pct(r.metrics.accuracy)
        );
    }
    let _ = writeln!(
        s,
        "mean accuracy over {} runs: {}",
        report.runs.len(),
        fmt_pct(report.mean_accuracy())
    );
    let _ = writeln!(s, "\npooled confusion matrix:");
    s.push_str(&confusion_table(&report.pooled()));
    s
}
