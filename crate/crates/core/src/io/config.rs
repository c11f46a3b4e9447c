use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynprog::GridConfig;
use crate::error::{Error, Result};
use crate::model::TwoLevelParams;

use super::sha256_hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kappa_f: f64,
    pub kappa_s: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
    pub eta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub u_max: f64,
    /// Bloch vector `[x, y, z]` of the initial state, `|r| ≤ 1`.
    pub initial_state: [f64; 3],
}

impl ModelSection {
    pub fn params(&self) -> TwoLevelParams {
        TwoLevelParams {
            kappa_f: self.kappa_f,
            kappa_s: self.kappa_s,
            a: self.a,
            b: self.b,
            c: self.c,
            mu: self.mu,
            eta: self.eta,
            t_final: self.horizon,
            dt: self.dt,
            u_max: self.u_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub master_seed: u64,
}

/// Open-loop control for the master equation: a constant, or a CSV file of
/// `t,u_re,u_im` rows held piecewise constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSection {
    pub control: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_file: Option<PathBuf>,
}

impl Default for MasterSection {
    fn default() -> Self {
        MasterSection {
            control: [0.0, 0.0],
            control_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub dp: GridConfig,
    pub mc: McSection,
    #[serde(default)]
    pub master: MasterSection,
    pub outputs: OutputsSection,
}

/// The part of the configuration that determines results; the output
/// directory is left out so relocating outputs does not change the hash.
#[derive(Serialize)]
struct Hashed<'a> {
    model: &'a ModelSection,
    dp: &'a GridConfig,
    mc: &'a McSection,
    master: &'a MasterSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner().message()))
        })?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Validates everything and makes `dt` divide the horizon.
    pub fn resolved(mut self) -> Result<Self> {
        let wrap = |e: Error| Error::Config(format!("model: {e}"));
        let p = self.model.params();
        p.validate().map_err(wrap)?;
        self.model.dt = p.resolved().dt;
        let r = self.model.initial_state;
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !norm.is_finite() || norm > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "model.initial_state: Bloch vector {r:?} has length {norm} > 1"
            )));
        }
        self.dp.validate().map_err(|e| Error::Config(format!("dp: {e}")))?;
        if self.mc.n_paths < 2 {
            return Err(Error::Config(format!("mc.n_paths = {} must be >= 2", self.mc.n_paths)));
        }
        if self.master.control.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("master.control must be finite".into()));
        }
        Ok(self)
    }

    pub fn params(&self) -> TwoLevelParams {
        self.model.params()
    }

    pub fn initial_state(&self) -> [f64; 3] {
        self.model.initial_state
    }

    pub fn master_control(&self) -> Complex64 {
        Complex64::new(self.master.control[0], self.master.control[1])
    }

    pub fn hash(&self) -> String {
        let hashed = Hashed {
            model: &self.model,
            dp: &self.dp,
            mc: &self.mc,
            master: &self.master,
        };
        sha256_hex(serde_json::to_string(&hashed).expect("config serializes").as_bytes())
    }

    /// A complete configuration with the default model and grid.
    pub fn example() -> Self {
        let p = TwoLevelParams::default();
        RunConfig {
            model: ModelSection {
                kappa_f: p.kappa_f,
                kappa_s: p.kappa_s,
                a: p.a,
                b: p.b,
                c: p.c,
                mu: p.mu,
                eta: p.eta,
                horizon: p.t_final,
                dt: p.dt,
                u_max: p.u_max,
                initial_state: [0.0, 0.0, 1.0],
            },
            dp: GridConfig::default(),
            mc: McSection {
                n_paths: 10_000,
                master_seed: 1,
            },
            master: MasterSection::default(),
            outputs: OutputsSection {
                directory: PathBuf::from("out"),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Reads a `t,u_re,u_im` control table (lines starting with `#` and a
/// non-numeric header line are skipped).
pub fn read_control_file(path: &Path) -> Result<Vec<(f64, Complex64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read control file {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => rows.push((v[0], Complex64::new(v[1], v[2]))),
            Err(_) if rows.is_empty() => continue,
            _ => {
                return Err(Error::Config(format!(
                    "{}:{}: expected `t,u_re,u_im`",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no control rows", path.display())));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config(format!("{}: times must increase", path.display())));
    }
    Ok(rows)
}

/// Piecewise-constant (sample-and-hold) control signal.
pub fn hold_signal(rows: &[(f64, Complex64)], t: f64) -> Complex64 {
    let i = rows.partition_point(|(s, _)| *s <= t + 1e-12);
    rows[i.saturating_sub(1)].1
}
