//! Configuration, file formats and hashing.

pub mod config;
pub mod container;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::TwoLevelParams;

pub use config::RunConfig;
pub use container::{load_policy, load_value, save_policy, save_value, GridMetadata};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the model parameters; policies are only usable with a model of
/// the same hash.
pub fn model_hash(p: &TwoLevelParams) -> String {
    sha256_hex(serde_json::to_string(p).expect("params serialize").as_bytes())
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Comma-separated table with a commented header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a rendered table back (comments are dropped).
    pub fn parse(text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| crate::Error::Format("empty table".into()))?;
        let mut table = Table {
            comments: Vec::new(),
            columns: header.split(',').map(str::to_string).collect(),
            rows: Vec::new(),
        };
        for line in lines {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let row = row.map_err(|e| crate::Error::Format(format!("bad table row `{line}`: {e}")))?;
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_is_exact() {
        let mut t = Table::new(&["t", "z"]);
        t.comment("config_hash: abc");
        t.push(vec![0.1, -1.0 / 3.0]);
        t.push(vec![1e-300, 2.0f64.sqrt()]);
        let back = Table::parse(&t.render()).unwrap();
        assert_eq!(back.rows(), t.rows());
        assert_eq!(back.column("z").unwrap()[0], -1.0 / 3.0);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.txt");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        let leftovers = std::fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn model_hash_tracks_parameters() {
        let p = TwoLevelParams::default();
        assert_eq!(model_hash(&p), model_hash(&p.clone()));
        assert_ne!(model_hash(&p), model_hash(&p.with_mu(0.2)));
        assert_eq!(model_hash(&p).len(), 64);
    }
}
