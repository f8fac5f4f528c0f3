//! Parameter checkpoints.
//!
//! ```text
//! GNET1
//! count <n>
//! <name> <d0>x<d1>x...      one line per parameter, store order
//! end
//! <f32 little-endian values of every parameter, concatenated>
//! ```

use std::fs;
use std::path::Path;

use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::{NnError, Result, Tensor};

pub const MAGIC: &str = "GNET1";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn encode<T: Scalar>(store: &ParamStore<T>) -> Vec<u8> {
    let mut header = format!("{MAGIC}\ncount {}\n", store.len());
    for p in store.iter() {
        let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        header.push_str(&format!("{} {}\n", p.name, dims.join("x")));
    }
    header.push_str("end\n");
    let mut out = header.into_bytes();
    for p in store.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>> {
    let mut pos = 0;
    let mut line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("header truncated"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
    };
    if line()? != MAGIC {
        return Err(bad("missing GNET1 magic"));
    }
    let count: usize = line()?
        .strip_prefix("count ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("bad count line"))?;
    let mut heads = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let l = line()?;
        let (name, dims) = l.rsplit_once(' ').ok_or_else(|| bad(format!("bad entry line {l:?}")))?;
        let shape = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("bad shape {dims:?}")))?;
        heads.push((name.to_string(), shape));
    }
    if line()? != "end" {
        return Err(bad("missing end line"));
    }
    let mut payload = &bytes[pos..];
    let mut entries = Vec::with_capacity(heads.len());
    for (name, shape) in heads {
        let n: usize = shape.iter().product();
        let len = n
            .checked_mul(4)
            .filter(|&l| l <= payload.len())
            .ok_or_else(|| bad(format!("payload truncated at {name}")))?;
        let values = payload[..len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        payload = &payload[len..];
        entries.push(Entry { name, shape, values });
    }
    if !payload.is_empty() {
        return Err(bad(format!("{} trailing payload bytes", payload.len())));
    }
    Ok(entries)
}

pub fn save<T: Scalar>(store: &ParamStore<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(store)).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Overwrites every value in `store`; names and shapes must match exactly.
pub fn load_into<T: Scalar>(store: &mut ParamStore<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    apply(store, &decode(&bytes)?)
}

pub fn apply<T: Scalar>(store: &mut ParamStore<T>, entries: &[Entry]) -> Result<()> {
    if entries.len() != store.len() {
        return Err(bad(format!("{} entries for {} parameters", entries.len(), store.len())));
    }
    for (p, e) in store.iter_mut().zip(entries) {
        if p.name != e.name || p.value.shape() != e.shape.as_slice() {
            return Err(bad(format!(
                "entry {} {:?} does not match {} {:?}",
                e.name,
                e.shape,
                p.name,
                p.value.shape()
            )));
        }
        if e.values.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value in {}", e.name)));
        }
        p.value = Tensor::new(e.shape.clone(), e.values.iter().map(|&v| T::of(v as f64)).collect())?;
    }
    Ok(())
}
