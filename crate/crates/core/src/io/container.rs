//! Self-describing container for value grids and policies:
//!
//! ```text
//! rsqc-grid 1
//! {"kind": ..., "model_hash": ..., "content_hash": ..., ...}
//! #data
//! <packed little-endian f64 arrays>
//! ```
//!
//! The content hash is the SHA-256 of the data section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynprog::{GridConfig, Lattice, Mode, Policy, Provenance, ValueGrid};
use crate::error::{Error, Result};
use crate::model::TwoLevelParams;

use super::{atomic_write, model_hash, sha256_hex};

const MAGIC: &str = "rsqc-grid";
const VERSION: u32 = 1;
const SEPARATOR: &str = "#data\n";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Value,
    Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMetadata {
    pub kind: GridKind,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub params: TwoLevelParams,
    pub dp: GridConfig,
    pub lattice: Lattice,
    pub steps: Vec<usize>,
    /// Names of the arrays in the data section, each of `lattice.len()` values
    /// per stored step.
    pub arrays: Vec<String>,
    pub model_hash: String,
    pub config_hash: String,
    pub content_hash: String,
}

fn pack(arrays: &[&Vec<Vec<f64>>]) -> Vec<u8> {
    let mut out = Vec::new();
    for a in arrays {
        for slice in a.iter() {
            for v in slice {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

fn write(path: &Path, meta: &GridMetadata, data: &[u8]) -> Result<()> {
    let mut bytes = format!("{MAGIC} {VERSION}\n").into_bytes();
    bytes.extend(serde_json::to_vec(meta).map_err(|e| Error::Format(e.to_string()))?);
    bytes.push(b'\n');
    bytes.extend_from_slice(SEPARATOR.as_bytes());
    bytes.extend_from_slice(data);
    atomic_write(path, &bytes)
}

fn read(path: &Path) -> Result<(GridMetadata, Vec<Vec<Vec<f64>>>)> {
    let bytes = std::fs::read(path)?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let first = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header"))?;
    let header = std::str::from_utf8(&bytes[..first]).map_err(|_| bad("header is not text"))?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| bad("not a grid container"))?;
    if version != VERSION.to_string() {
        return Err(bad(&format!("unsupported container version {version}")));
    }
    let rest = &bytes[first + 1..];
    let second = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing metadata"))?;
    let meta: GridMetadata =
        serde_json::from_slice(&rest[..second]).map_err(|e| bad(&format!("metadata: {e}")))?;
    let rest = &rest[second + 1..];
    let data = rest
        .strip_prefix(SEPARATOR.as_bytes())
        .ok_or_else(|| bad("missing data separator"))?;
    if sha256_hex(data) != meta.content_hash {
        return Err(Error::ArtifactMismatch(format!(
            "{}: content hash does not match the data section",
            path.display()
        )));
    }
    let per_slice = meta.lattice.len();
    let expected = meta.arrays.len() * meta.steps.len() * per_slice * 8;
    if data.len() != expected {
        return Err(bad(&format!("data section has {} bytes, expected {expected}", data.len())));
    }
    let mut values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let arrays = meta
        .arrays
        .iter()
        .map(|_| {
            (0..meta.steps.len())
                .map(|_| values.by_ref().take(per_slice).collect())
                .collect()
        })
        .collect();
    Ok((meta, arrays))
}

pub fn save_value(path: &Path, grid: &ValueGrid, config_hash: &str) -> Result<GridMetadata> {
    let data = pack(&[&grid.values]);
    let meta = GridMetadata {
        kind: GridKind::Value,
        mode: grid.mode,
        provenance: None,
        params: grid.params,
        dp: grid.config,
        lattice: grid.lattice,
        steps: grid.steps.clone(),
        arrays: vec!["value".into()],
        model_hash: model_hash(&grid.params),
        config_hash: config_hash.to_string(),
        content_hash: sha256_hex(&data),
    };
    write(path, &meta, &data)?;
    Ok(meta)
}

pub fn save_policy(path: &Path, policy: &Policy, config_hash: &str) -> Result<GridMetadata> {
    let data = pack(&[&policy.u_re, &policy.u_im]);
    let meta = GridMetadata {
        kind: GridKind::Policy,
        mode: policy.mode,
        provenance: Some(policy.provenance),
        params: policy.params,
        dp: policy.config,
        lattice: policy.lattice,
        steps: policy.steps.clone(),
        arrays: vec!["u_re".into(), "u_im".into()],
        model_hash: model_hash(&policy.params),
        config_hash: config_hash.to_string(),
        content_hash: sha256_hex(&data),
    };
    write(path, &meta, &data)?;
    Ok(meta)
}

fn expect_kind(path: &Path, meta: &GridMetadata, kind: GridKind) -> Result<()> {
    if meta.kind != kind {
        return Err(Error::ArtifactMismatch(format!(
            "{}: expected a {kind:?} container, found {:?}",
            path.display(),
            meta.kind
        )));
    }
    if model_hash(&meta.params) != meta.model_hash {
        return Err(Error::ArtifactMismatch(format!(
            "{}: model hash does not match the stored parameters",
            path.display()
        )));
    }
    Ok(())
}

pub fn load_value(path: &Path) -> Result<(ValueGrid, GridMetadata)> {
    let (meta, mut arrays) = read(path)?;
    expect_kind(path, &meta, GridKind::Value)?;
    let values = arrays.remove(0);
    let grid = ValueGrid {
        lattice: meta.lattice,
        mode: meta.mode,
        params: meta.params,
        config: meta.dp,
        steps: meta.steps.clone(),
        values,
    };
    Ok((grid, meta))
}

pub fn load_policy(path: &Path) -> Result<(Policy, GridMetadata)> {
    let (meta, mut arrays) = read(path)?;
    expect_kind(path, &meta, GridKind::Policy)?;
    let u_im = arrays.pop().ok_or_else(|| Error::Format("missing u_im".into()))?;
    let u_re = arrays.pop().ok_or_else(|| Error::Format("missing u_re".into()))?;
    let policy = Policy {
        lattice: meta.lattice,
        mode: meta.mode,
        params: meta.params,
        config: meta.dp,
        provenance: meta.provenance.unwrap_or(Provenance::ClosedForm),
        steps: meta.steps.clone(),
        u_re,
        u_im,
    };
    Ok((policy, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynprog::rs_backward_solve;

    fn solved() -> (ValueGrid, Policy) {
        let p = TwoLevelParams {
            t_final: 0.1,
            ..Default::default()
        };
        let cfg = GridConfig {
            nx: 21,
            ny: 21,
            nz: 21,
            dt: 5e-3,
            control_points: 17,
            store_stride: 5,
            ..Default::default()
        };
        rs_backward_solve(&p, &cfg).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let (v, pol) = solved();
        let vp = dir.path().join("v.grid");
        let pp = dir.path().join("p.grid");
        let vm = save_value(&vp, &v, "cfg").unwrap();
        save_policy(&pp, &pol, "cfg").unwrap();
        let (v2, m2) = load_value(&vp).unwrap();
        let (p2, _) = load_policy(&pp).unwrap();
        assert_eq!(v, v2);
        assert_eq!(pol, p2);
        assert_eq!(vm, m2);
        assert_eq!(m2.config_hash, "cfg");
        let text = std::fs::read(&vp).unwrap();
        assert!(text.starts_with(b"rsqc-grid 1\n"));
    }

    #[test]
    fn corruption_and_kind_mismatch_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let (v, _) = solved();
        let vp = dir.path().join("v.grid");
        save_value(&vp, &v, "cfg").unwrap();
        assert!(matches!(load_policy(&vp), Err(Error::ArtifactMismatch(_))));
        let mut bytes = std::fs::read(&vp).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&vp, &bytes).unwrap();
        assert!(matches!(load_value(&vp), Err(Error::ArtifactMismatch(_))));
        std::fs::write(&vp, b"something else\n").unwrap();
        assert!(matches!(load_value(&vp), Err(Error::Format(_))));
    }
}
