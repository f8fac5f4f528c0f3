use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use wigest_core::manifest::{list_manifests, load_session, write_session};
use wigest_core::pipeline::featurize_session;
use wigest_core::seed::{self, tags};
use wigest_core::spectro::export_image;
use wigest_core::synth::{default_templates, parse_templates, synth_dataset};
use wigest_core::validate::validate_session;
use wigest_core::GestureLabel;
use wigest_eval::metrics::Metrics;
use wigest_eval::report::{confusion_table, parse_csv, to_csv, to_text};
use wigest_eval::{evaluate, make_split, run_protocol_with, ProtocolReport, RunResult, Sample, SplitKey, SplitSpec};
use wigest_nn::{checkpoint, GestureNet};

use crate::config::PipelineConfig;
use crate::corpus::{index_text, load_samples, IndexRow, INDEX_FILE};
use crate::CliError;

pub const RUN_MANIFEST: &str = "run.toml";
pub const METRICS_CSV: &str = "metrics.csv";
pub const REPORT_TXT: &str = "report.txt";

fn internal(what: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Internal(format!("{what}: {e}"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(internal(path.display()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(internal(dir.display()))
}

#[derive(Serialize)]
struct RunSeeds {
    run: usize,
    seed: u64,
    split_seed: u64,
    seconds: f64,
}

/// Everything needed to repeat a command: the full config, its hash and the
/// per-run seeds.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: u64,
    seconds: f64,
    inputs: Vec<String>,
    runs: Vec<RunSeeds>,
    config: &'a PipelineConfig,
}

fn write_run_manifest(
    out: &Path,
    command: &str,
    cfg: &PipelineConfig,
    started: Instant,
    inputs: &[&Path],
    runs: &[RunResult],
) -> Result<(), CliError> {
    let m = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        seconds: started.elapsed().as_secs_f64(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        runs: runs
            .iter()
            .map(|r| RunSeeds {
                run: r.run,
                seed: r.seed,
                split_seed: r.split_seed,
                seconds: r.seconds,
            })
            .collect(),
        config: cfg,
    };
    let text = toml::to_string(&m).map_err(|e| CliError::Internal(format!("run manifest: {e}")))?;
    write_file(&out.join(RUN_MANIFEST), text)
}

fn session_name(index: usize) -> String {
    format!("s{index:05}")
}

pub fn synth(cfg: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let templates = match &cfg.synth.templates {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::MissingInput(format!("templates {}: {e}", path.display())))?;
            parse_templates(&text)?
        }
        None => default_templates(),
    };
    let sessions = synth_dataset(
        &templates,
        cfg.synth.per_class,
        cfg.synth.receivers,
        &cfg.synth_config(),
    )?;
    create_dir(out)?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, s) in sessions.iter().enumerate() {
        write_session(out, &session_name(i), s).map_err(|e| CliError::Internal(e.to_string()))?;
        *counts.entry(s.label.class_id()).or_default() += 1;
    }
    for (class, n) in &counts {
        println!("{}\t{n}", GestureLabel::ALL[*class]);
    }
    println!("sessions\t{}", sessions.len());
    log::info!("wrote {} sessions to {}", sessions.len(), out.display());
    write_run_manifest(out, "synth", cfg, started, &[], &[])
}

fn manifests_in(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifests = list_manifests(dir)?;
    if manifests.is_empty() {
        return Err(CliError::MissingInput(format!(
            "no session manifests in {}",
            dir.display()
        )));
    }
    Ok(manifests)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn validate(cfg: &PipelineConfig, input: &Path) -> Result<(), CliError> {
    let (mut clean, mut flagged, mut unreadable) = (0, 0, 0);
    let manifests = manifests_in(input)?;
    for m in &manifests {
        let name = stem(m);
        match load_session(m) {
            Err(e) => {
                log::warn!("{name}: {e}");
                println!("{name}\tunreadable\t{e}");
                unreadable += 1;
            }
            Ok(session) => {
                let report = validate_session(&session, cfg.features.expected_receivers);
                if report.is_clean() {
                    clean += 1;
                } else {
                    for f in &report.flags {
                        println!("{name}\tflagged\t{f}");
                    }
                    flagged += 1;
                }
            }
        }
    }
    println!(
        "sessions={} clean={clean} flagged={flagged} unreadable={unreadable}",
        manifests.len()
    );
    Ok(())
}

/// `Ok(None)` for a session skipped by validation.
fn featurize_one(cfg: &PipelineConfig, manifest: &Path, out: &Path) -> Result<Option<IndexRow>, CliError> {
    let name = stem(manifest);
    let session = load_session(manifest)?;
    let report = validate_session(&session, cfg.features.expected_receivers);
    if !report.is_clean() {
        let flags: Vec<String> = report.flags.iter().map(|f| f.to_string()).collect();
        log::warn!("skipping {name}: {}", flags.join("; "));
        return Ok(None);
    }
    let image = featurize_session(&session, &cfg.feature_config())?;
    write_file(&out.join(format!("{name}.img")), image.to_bytes())?;
    export_image(&image, out.join(format!("{name}.png"))).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Some(IndexRow {
        name,
        label: session.label,
        meta: session.meta,
    }))
}

pub fn featurize(cfg: &PipelineConfig, input: &Path, out: &Path, jobs: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let manifests = manifests_in(input)?;
    create_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    // Collecting keeps manifest order, so the index never depends on scheduling.
    let results: Vec<Result<Option<IndexRow>, CliError>> =
        pool.install(|| manifests.par_iter().map(|m| featurize_one(cfg, m, out)).collect());
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    write_file(&out.join(INDEX_FILE), index_text(&rows))?;
    if skipped > 0 {
        log::warn!("{skipped} of {} sessions skipped", manifests.len());
    }
    println!("images={} skipped={skipped}", rows.len());
    write_run_manifest(out, "featurize", cfg, started, &[input], &[])
}

fn load_corpus(cfg: &PipelineConfig, input: &Path) -> Result<Vec<Sample>, CliError> {
    let samples = load_samples(input)?;
    let size = cfg.features.image_size;
    if let Some(s) = samples.iter().find(|s| s.image.height != size || s.image.width != size) {
        return Err(CliError::Config(format!(
            "corpus images are {}x{} but features.image_size is {size}",
            s.image.height, s.image.width
        )));
    }
    Ok(samples)
}

fn checkpoint_path(dir: &Path, run: usize) -> PathBuf {
    dir.join(format!("run{run}.gnet"))
}

fn print_summary(report: &ProtocolReport) {
    for r in &report.runs {
        println!("run\t{}\taccuracy\t{}", r.run, r.metrics.accuracy);
    }
    println!("mean_accuracy\t{}", report.mean_accuracy());
}

fn write_report(out: &Path, report: &ProtocolReport) -> Result<(), CliError> {
    write_file(&out.join(METRICS_CSV), to_csv(report))?;
    write_file(&out.join(REPORT_TXT), to_text(report))
}

pub fn train(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let samples = load_corpus(cfg, input)?;
    let pc = cfg.protocol_config()?;
    create_dir(out)?;
    let report = run_protocol_with(&samples, &pc, |r, net| {
        checkpoint::save(&net.store, checkpoint_path(out, r.run))?;
        Ok(())
    })?;
    let mut losses = String::from("run,epoch,loss\n");
    for r in &report.runs {
        for (e, l) in r.loss_history.iter().enumerate() {
            let _ = writeln!(losses, "{},{e},{l}", r.run);
        }
    }
    write_file(&out.join("loss.csv"), losses)?;
    write_report(out, &report)?;
    print_summary(&report);
    write_run_manifest(out, "train", cfg, started, &[input], &report.runs)
}

pub fn eval(cfg: &PipelineConfig, input: &Path, model: &Path, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let pc = cfg.protocol_config()?;
    let paths: Vec<PathBuf> = (0..pc.runs).map(|k| checkpoint_path(model, k)).collect();
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        return Err(CliError::MissingInput(format!(
            "checkpoint {} not found",
            missing.display()
        )));
    }
    let samples = load_corpus(cfg, input)?;
    let keys: Vec<SplitKey> = samples
        .iter()
        .map(|s| SplitKey {
            label: s.label,
            meta: s.meta,
        })
        .collect();
    let mut runs = Vec::with_capacity(pc.runs);
    for (run, path) in paths.iter().enumerate() {
        let t = Instant::now();
        let split_seed = if pc.resplit {
            pc.split.seed.wrapping_add(run as u64)
        } else {
            pc.split.seed
        };
        let split = make_split(
            &keys,
            &SplitSpec {
                seed: split_seed,
                ..pc.split
            },
        )?;
        let test: Vec<Sample> = split.test.iter().map(|&i| samples[i].clone()).collect();
        let mut net = GestureNet::<f32>::new(pc.net.clone(), &mut seed::rng(0, tags::INIT))?;
        checkpoint::load_into(&mut net.store, path)
            .map_err(|e| CliError::MissingInput(format!("checkpoint {}: {e}", path.display())))?;
        let metrics = evaluate(&mut net, &test)?;
        runs.push(RunResult {
            run,
            seed: pc.train.seed.wrapping_add(run as u64),
            split_seed,
            train_size: split.train.len(),
            test_size: test.len(),
            loss_history: Vec::new(),
            metrics,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    let report = ProtocolReport {
        protocol: pc.split.protocol,
        runs,
    };
    create_dir(out)?;
    write_report(out, &report)?;
    print_summary(&report);
    write_run_manifest(out, "eval", cfg, started, &[input, model], &report.runs)
}

pub fn report(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let csv = if input.is_dir() {
        input.join(METRICS_CSV)
    } else {
        input.to_path_buf()
    };
    let text = fs::read_to_string(&csv).map_err(|e| CliError::MissingInput(format!("{}: {e}", csv.display())))?;
    let rows = parse_csv(&text).map_err(|e| CliError::MissingInput(format!("{}: {e}", csv.display())))?;
    if rows.is_empty() {
        return Err(CliError::MissingInput(format!("{} has no runs", csv.display())));
    }
    let mut metrics = Vec::with_capacity(rows.len());
    for r in &rows {
        let m = Metrics::from_confusion(r.confusion);
        if (m.accuracy - r.accuracy).abs() > 1e-12 {
            return Err(CliError::Internal(format!(
                "run {}: stated accuracy {} but the confusion matrix gives {}",
                r.run, r.accuracy, m.accuracy
            )));
        }
        metrics.push(m);
    }
    let mean = metrics.iter().map(|m| m.accuracy).sum::<f64>() / metrics.len() as f64;
    let pooled = Metrics::pooled(&metrics);

    let mut txt = format!("source: {}\n{:>4} {:>9}\n", csv.display(), "run", "accuracy");
    for (r, m) in rows.iter().zip(&metrics) {
        let _ = writeln!(txt, "{:>4} {:>8.2}%", r.run, 100.0 * m.accuracy);
    }
    let _ = writeln!(txt, "mean accuracy over {} runs: {:.2}%", rows.len(), 100.0 * mean);
    let _ = writeln!(txt, "\npooled confusion matrix:");
    txt.push_str(&confusion_table(&pooled));
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => csv.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    create_dir(&dir)?;
    write_file(&dir.join(REPORT_TXT), txt)?;

    println!("runs\t{}", rows.len());
    println!("mean_accuracy\t{mean}");
    for (label, recall) in GestureLabel::ALL.iter().zip(pooled.per_class_accuracy) {
        println!("recall\t{label}\t{recall}");
    }
    Ok(())
}
