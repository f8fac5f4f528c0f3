//! Session manifests: a small tab-separated text file naming each
//! receiver's CSI file plus the session's label and domain metadata.
//!
//! ```text
//! label	PushPull
//! environment	Synthetic
//! user	3
//! location	1
//! orientation	2
//! repetition	0
//! 0	s0000_rx0.csi
//! 1	s0000_rx1.csi
//! ```
//!
//! Relative CSI paths are resolved against the manifest's directory.

#![allow(clippy::tabs_in_doc_comments)] // the example shows the literal tab-separated format
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::csi::{DomainMeta, Environment, GestureLabel, RecordingSession};
use crate::error::CsiError;
use crate::io::{read_csi_file, write_csi_file};

pub const MANIFEST_EXT: &str = "manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionManifest {
    pub receivers: Vec<(u16, PathBuf)>,
    pub label: GestureLabel,
    pub meta: DomainMeta,
}

impl SessionManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.meta;
        let _ = writeln!(s, "label\t{}", self.label);
        let _ = writeln!(s, "environment\t{}", m.environment);
        let _ = writeln!(s, "user\t{}", m.user_id);
        let _ = writeln!(s, "location\t{}", m.location_id);
        let _ = writeln!(s, "orientation\t{}", m.orientation_id);
        let _ = writeln!(s, "repetition\t{}", m.repetition);
        for (id, path) in &self.receivers {
            let _ = writeln!(s, "{id}\t{}", path.display());
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CsiError> {
        let err = |line: usize, reason: String| CsiError::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut receivers = Vec::new();
        let mut label = None;
        let mut env = None;
        let (mut user, mut loc, mut orient, mut rep) = (None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line_no, "expected `key<TAB>value`".into()))?;
            if let Ok(id) = key.parse::<u16>() {
                receivers.push((id, PathBuf::from(value)));
                continue;
            }
            let num = |v: &str| v.parse::<u32>().map_err(|e| err(line_no, format!("{key}: {e}")));
            match key {
                "label" => label = Some(value.parse::<GestureLabel>().map_err(|e| err(line_no, e))?),
                "environment" => env = Some(value.parse::<Environment>().map_err(|e| err(line_no, e))?),
                "user" => user = Some(num(value)?),
                "location" => loc = Some(num(value)?),
                "orientation" => orient = Some(num(value)?),
                "repetition" => rep = Some(num(value)?),
                other => return Err(err(line_no, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| err(0, format!("missing `{k}`"));
        let small = |v: u32, k: &str| u8::try_from(v).map_err(|_| err(0, format!("{k} out of range")));
        let meta = DomainMeta::new(
            env.ok_or_else(|| missing("environment"))?,
            user.ok_or_else(|| missing("user"))?,
            small(loc.ok_or_else(|| missing("location"))?, "location")?,
            small(orient.ok_or_else(|| missing("orientation"))?, "orientation")?,
            rep.ok_or_else(|| missing("repetition"))?,
        )
        .map_err(|e| err(0, e.to_string()))?;
        Ok(SessionManifest {
            receivers,
            label: label.ok_or_else(|| missing("label"))?,
            meta,
        })
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<SessionManifest, CsiError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CsiError::io(path, e))?;
    SessionManifest::parse(&text, path)
}

/// Reads a manifest and every CSI file it names.
pub fn load_session(manifest_path: impl AsRef<Path>) -> Result<RecordingSession, CsiError> {
    let manifest_path = manifest_path.as_ref();
    let m = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut streams = Vec::with_capacity(m.receivers.len());
    for (id, rel) in &m.receivers {
        let path = if rel.is_absolute() { rel.clone() } else { base.join(rel) };
        let s = read_csi_file(&path)?;
        if s.receiver_id() != *id {
            return Err(CsiError::Manifest {
                path: manifest_path.to_path_buf(),
                line: 0,
                reason: format!(
                    "{} holds receiver {} but is listed as {id}",
                    path.display(),
                    s.receiver_id()
                ),
            });
        }
        streams.push(s);
    }
    RecordingSession::new(streams, m.label, m.meta)
}

/// Writes `<dir>/<name>_rx<id>.csi` for every stream and `<dir>/<name>.manifest`.
pub fn write_session(dir: impl AsRef<Path>, name: &str, session: &RecordingSession) -> Result<PathBuf, CsiError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CsiError::io(dir, e))?;
    let mut receivers = Vec::new();
    for s in session.streams() {
        let file = format!("{name}_rx{}.csi", s.receiver_id());
        write_csi_file(s, dir.join(&file))?;
        receivers.push((s.receiver_id(), PathBuf::from(file)));
    }
    let manifest = SessionManifest {
        receivers,
        label: session.label,
        meta: session.meta,
    };
    let path = dir.join(format!("{name}.{MANIFEST_EXT}"));
    fs::write(&path, manifest.to_text()).map_err(|e| CsiError::io(&path, e))?;
    Ok(path)
}

/// Manifest files in `dir`, sorted by name.
pub fn list_manifests(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CsiError> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CsiError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == MANIFEST_EXT))
        .collect();
    out.sort();
    Ok(out)
}
