//! Command implementations behind the `rsqc` binary.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynprog::{backward_solve, Mode, Policy};
use crate::error::{Error, Result};
use crate::filters::FilterKind;
use crate::io::config::{hold_signal, read_control_file, McSection, ModelSection};
use crate::io::{atomic_write, load_policy, model_hash, save_policy, save_value, RunConfig, Table};
use crate::model::two_level_model;
use crate::montecarlo::{
    estimate, estimate_cost_rn, estimate_cost_rs_physical, propagate_master, run_closed_loop,
    ControlLaw, ControllerHandle, CostReport, Estimator, Measure,
};
use crate::operator::{pauli, Operator, StateMatrix};
use crate::stochastic::NoiseStream;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidModel(_) | Error::InvalidGrid(_) | Error::ControlOutOfDomain { .. } => 2,
        Error::Unstable { .. } | Error::SolverNaN { .. } => 3,
        Error::ArtifactMismatch(_) | Error::Format(_) => 4,
        Error::NonFinite { .. }
        | Error::Positivity { .. }
        | Error::Numeric(_)
        | Error::Overflow(_)
        | Error::InvalidState(_)
        | Error::InvalidOperator(_)
        | Error::DimensionMismatch { .. } => 5,
        Error::Io(_) => 1,
    }
}

/// Resolved settings shared by all commands.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    /// Directory of the configuration file; relative paths in it resolve here.
    pub base: PathBuf,
}

impl Context {
    /// Loads the configuration and applies the `--out` and `--seed`
    /// overrides.
    pub fn load(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Context> {
        let mut cfg = RunConfig::load(config)?;
        if let Some(seed) = seed {
            cfg.mc.master_seed = seed;
        }
        let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
        let out = out.unwrap_or_else(|| {
            let dir = &cfg.outputs.directory;
            if dir.is_relative() {
                base.join(dir)
            } else {
                dir.clone()
            }
        });
        Ok(Context { config: cfg, out, base })
    }

    pub fn hash(&self) -> String {
        self.config.hash()
    }

    fn announce(&self) {
        println!("config_hash: {}", self.hash());
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn initial_matrix(r: [f64; 3]) -> Result<StateMatrix> {
    let op = (Operator::identity(2)
        + pauli::sigma_x().scale(r[0])
        + pauli::sigma_y().scale(r[1])
        + pauli::sigma_z().scale(r[2]))
    .scale(0.5);
    StateMatrix::new(op, true)
}

fn mode_tag(mode: Mode) -> &'static str {
    match mode {
        Mode::RiskSensitive => "rs",
        Mode::RiskNeutral => "rn",
    }
}

pub struct SolveOutput {
    pub value_path: PathBuf,
    pub policy_path: PathBuf,
    pub initial_value: f64,
    pub content_hash: String,
}

pub fn cmd_solve(ctx: &Context, mode: Mode) -> Result<SolveOutput> {
    ctx.announce();
    let p = ctx.config.params();
    let (value, policy) = backward_solve(&p, &ctx.config.dp, mode)?;
    let tag = mode_tag(mode);
    let value_path = ctx.path(&format!("value_{tag}.grid"));
    let policy_path = ctx.path(&format!("policy_{tag}.grid"));
    let hash = ctx.hash();
    save_value(&value_path, &value, &hash)?;
    let meta = save_policy(&policy_path, &policy, &hash)?;
    let initial_value = value.initial_value(ctx.config.initial_state());
    println!("value at initial state (t = 0): {initial_value}");
    println!("policy: {} ({})", policy_path.display(), meta.content_hash);
    Ok(SolveOutput {
        value_path,
        policy_path,
        initial_value,
        content_hash: meta.content_hash,
    })
}

/// Loads a policy and checks that it was synthesized for the configured
/// model.
pub fn load_compatible_policy(ctx: &Context, path: &Path) -> Result<(Arc<Policy>, String)> {
    let (policy, meta) = load_policy(path)?;
    let expected = model_hash(&ctx.config.params());
    // The risk parameter may differ; the rest of the model must match.
    let mut rebased = ctx.config.params();
    rebased.mu = policy.params.mu;
    if meta.model_hash != expected && meta.model_hash != model_hash(&rebased) {
        return Err(Error::ArtifactMismatch(format!(
            "{} was synthesized for model {} but the configuration has model {expected}; re-run solve",
            path.display(),
            meta.model_hash
        )));
    }
    Ok((Arc::new(policy), meta.content_hash))
}

/// Which feedback law a simulation or evaluation uses.
#[derive(Clone, Debug)]
pub enum LawChoice {
    PolicyFile(PathBuf),
    Zero,
    Constant(Complex64),
}

fn build_controller(ctx: &Context, law: &LawChoice) -> Result<(ControllerHandle, String)> {
    let p = ctx.config.params();
    let r0 = ctx.config.initial_state();
    Ok(match law {
        LawChoice::PolicyFile(path) => {
            let (policy, hash) = load_compatible_policy(ctx, path)?;
            (ControllerHandle::from_policy(policy, r0).aligned_with(&p), hash)
        }
        LawChoice::Zero => (
            ControllerHandle::new(ControlLaw::Zero, FilterKind::Standard, p, r0),
            "zero".into(),
        ),
        LawChoice::Constant(u) => {
            two_level_model(&p)?.check_control(*u)?;
            (
                ControllerHandle::new(ControlLaw::Constant(*u), FilterKind::Standard, p, r0),
                format!("constant {} {}", u.re, u.im),
            )
        }
    })
}

#[derive(Serialize)]
struct TrajectoryHeader<'a> {
    kind: &'static str,
    config_hash: String,
    seed: u64,
    n_paths: usize,
    law: String,
    model: &'a ModelSection,
    mc: &'a McSection,
}

pub fn cmd_simulate(ctx: &Context, law: &LawChoice, n_paths: Option<usize>) -> Result<PathBuf> {
    ctx.announce();
    let p = ctx.config.params();
    let spec = two_level_model(&p)?;
    let (controller, law_id) = build_controller(ctx, law)?;
    let n_paths = n_paths.unwrap_or(ctx.config.mc.n_paths);
    let seed = ctx.config.mc.master_seed;
    let initial = initial_matrix(ctx.config.initial_state())?;
    let records = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut ctrl = controller.clone();
            let rec = run_closed_loop(&spec, &mut ctrl, &initial, &mut NoiseStream::new(seed, i))?;
            serde_json::to_string(&rec).map_err(|e| Error::Format(e.to_string()))
        })
        .collect::<Result<Vec<String>>>()?;
    let header = TrajectoryHeader {
        kind: "trajectories",
        config_hash: ctx.hash(),
        seed,
        n_paths,
        law: law_id,
        model: &ctx.config.model,
        mc: &ctx.config.mc,
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    for r in records {
        bytes.extend_from_slice(r.as_bytes());
        bytes.push(b'\n');
    }
    let path = ctx.path("trajectories.jsonl");
    atomic_write(&path, &bytes)?;
    println!("wrote {n_paths} trajectories to {}", path.display());
    Ok(path)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config_hash: String,
    law: String,
    report: &'a CostReport,
}

pub fn cmd_evaluate(
    ctx: &Context,
    law: &LawChoice,
    estimator: Estimator,
    n_paths: Option<usize>,
) -> Result<(PathBuf, CostReport)> {
    ctx.announce();
    let p = ctx.config.params();
    let (controller, law_id) = build_controller(ctx, law)?;
    let n_paths = n_paths.unwrap_or(ctx.config.mc.n_paths);
    let report = estimate(
        estimator,
        &p,
        &controller,
        ctx.config.initial_state(),
        n_paths,
        ctx.config.mc.master_seed,
    )?;
    let file = ReportFile {
        config_hash: ctx.hash(),
        law: law_id,
        report: &report,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    let path = ctx.path(&format!("report_{}.json", estimator.name()));
    atomic_write(&path, &bytes)?;
    println!(
        "{}: {} ± {} (n_paths = {}, seed = {}, saturated = {})",
        estimator.name(),
        report.estimate,
        report.std_error,
        report.n_paths,
        report.seed,
        report.saturated
    );
    Ok((path, report))
}

pub fn cmd_master(ctx: &Context) -> Result<(PathBuf, Table)> {
    ctx.announce();
    let p = ctx.config.params();
    let spec = two_level_model(&p)?;
    let rows = match &ctx.config.master.control_file {
        Some(f) => Some(read_control_file(&ctx.base.join(f))?),
        None => None,
    };
    let constant = ctx.config.master_control();
    let signal = |t: f64| match &rows {
        Some(r) => hold_signal(r, t),
        None => constant,
    };
    let steps = (p.t_final / p.dt).round() as usize;
    for k in 0..=steps {
        spec.check_control(signal(k as f64 * p.dt))?;
    }
    let initial = initial_matrix(ctx.config.initial_state())?;
    let path = propagate_master(&spec, &initial, &signal, p.t_final, p.dt)?;
    let mut table = Table::new(&["t", "n", "x", "y", "z"]);
    table.comment("rsqc master");
    table.comment(format!("config_hash: {}", ctx.hash()));
    for (k, rho) in path.iter().enumerate() {
        table.push(vec![
            k as f64 * p.dt,
            rho.trace(),
            rho.expect(&pauli::sigma_x()),
            rho.expect(&pauli::sigma_y()),
            rho.expect(&pauli::sigma_z()),
        ]);
    }
    let out = ctx.path("master.csv");
    atomic_write(&out, table.render().as_bytes())?;
    println!("wrote {} rows to {}", path.len(), out.display());
    Ok((out, table))
}

/// Risk-sensitive cost of two policies over a list of μ with common random
/// numbers. The slope column is `(J^μ − 1)/μ`; on the `μ = 0` row it holds
/// the risk-neutral cost, the limit of that slope.
pub fn cmd_compare(
    ctx: &Context,
    policy_a: &Path,
    policy_b: &Path,
    mus: &[f64],
    n_paths: Option<usize>,
) -> Result<(PathBuf, Table)> {
    ctx.announce();
    if mus.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Config(format!("mu list {mus:?} must be finite and >= 0")));
    }
    let base = ctx.config.params();
    let r0 = ctx.config.initial_state();
    let n_paths = n_paths.unwrap_or(ctx.config.mc.n_paths);
    let seed = ctx.config.mc.master_seed;
    let (pa, ha) = load_compatible_policy(ctx, policy_a)?;
    let (pb, hb) = load_compatible_policy(ctx, policy_b)?;
    let ca = ControllerHandle::from_policy(pa, r0).aligned_with(&base);
    let cb = ControllerHandle::from_policy(pb, r0).aligned_with(&base);
    let mut table = Table::new(&["mu", "j_a", "se_a", "slope_a", "j_b", "se_b", "slope_b"]);
    table.comment("rsqc compare");
    table.comment(format!("config_hash: {}", ctx.hash()));
    table.comment(format!("policy_a: {ha}"));
    table.comment(format!("policy_b: {hb}"));
    table.comment(format!("n_paths: {n_paths}, seed: {seed}"));
    for &mu in mus {
        let p = base.with_mu(mu);
        let mut row = vec![mu];
        for c in [&ca, &cb] {
            let j = estimate_cost_rs_physical(&p, c, r0, n_paths, seed)?;
            let slope = if mu == 0.0 {
                estimate_cost_rn(&p, c, r0, n_paths, seed, Measure::Physical)?.estimate
            } else {
                (j.estimate - 1.0) / mu
            };
            row.extend([j.estimate, j.std_error, slope]);
        }
        table.push(row);
    }
    let out = ctx.path("compare.csv");
    atomic_write(&out, table.render().as_bytes())?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(table.render().as_bytes());
    Ok((out, table))
}
