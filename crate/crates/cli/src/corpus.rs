//! Featurized corpus on disk: `<name>.img` binary images plus an
//! `images.tsv` index with one labelled row per image.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use wigest_core::spectro::FusedImage;
use wigest_core::{DomainMeta, GestureLabel};
use wigest_eval::Sample;

use crate::CliError;

pub const INDEX_FILE: &str = "images.tsv";
pub const INDEX_HEADER: &str = "name\tlabel\tenvironment\tuser\tlocation\torientation\trepetition";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub name: String,
    pub label: GestureLabel,
    pub meta: DomainMeta,
}

/// Rows must already be in their final order.
pub fn index_text(rows: &[IndexRow]) -> String {
    let mut s = format!("{INDEX_HEADER}\n");
    for r in rows {
        let m = &r.meta;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.name, r.label, m.environment, m.user_id, m.location_id, m.orientation_id, m.repetition
        );
    }
    s
}

pub fn parse_index(text: &str, path: &Path) -> Result<Vec<IndexRow>, CliError> {
    let bad = |line: usize, why: String| CliError::MissingInput(format!("{}:{line}: {why}", path.display()));
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(INDEX_HEADER) {
        return Err(bad(1, "unexpected header".into()));
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(bad(i + 1, format!("{} fields, expected 7", f.len())));
            }
            let num = |k: usize| {
                f[k].parse::<u32>()
                    .map_err(|_| bad(i + 1, format!("bad number `{}`", f[k])))
            };
            let small = |k: usize| f[k].parse::<u8>().map_err(|_| bad(i + 1, format!("bad id `{}`", f[k])));
            let meta = DomainMeta::new(
                f[2].parse().map_err(|e: String| bad(i + 1, e))?,
                num(3)?,
                small(4)?,
                small(5)?,
                num(6)?,
            )
            .map_err(|e| bad(i + 1, e.to_string()))?;
            Ok(IndexRow {
                name: f[0].to_string(),
                label: f[1].parse().map_err(|e: String| bad(i + 1, e))?,
                meta,
            })
        })
        .collect()
}

/// Loads every indexed image of a featurized corpus.
pub fn load_samples(dir: &Path) -> Result<Vec<Sample>, CliError> {
    let index = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index)
        .map_err(|e| CliError::MissingInput(format!("featurized corpus index {}: {e}", index.display())))?;
    let rows = parse_index(&text, &index)?;
    if rows.is_empty() {
        return Err(CliError::MissingInput(format!("{} lists no images", index.display())));
    }
    rows.into_iter()
        .map(|r| {
            let path = dir.join(format!("{}.img", r.name));
            let bytes = fs::read(&path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
            let image = FusedImage::from_bytes(&bytes)
                .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
            Ok(Sample {
                image,
                label: r.label,
                meta: r.meta,
            })
        })
        .collect()
}
