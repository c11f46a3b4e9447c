//! Closed-loop simulation and Monte Carlo cost estimators for the two-level
//! atom.
//!
//! Path `i` of every estimator draws its noise from `NoiseStream(seed, i)`,
//! so different controllers evaluated with the same seed see common random
//! numbers, and results do not depend on the number of worker threads.

pub mod controller;
pub mod master;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{
    belavkin_step, bloch_normalized_step, bloch_rn_step, bloch_rs_step, BlochState, FilterKind,
};
use crate::model::{ModelSpec, TwoLevelParams};
use crate::operator::{pauli, StateMatrix};
use crate::stochastic::{NoiseStream, TrajectoryRecord};

pub use controller::{ControlLaw, ControllerHandle};
pub use master::propagate_master;

/// Log-payoffs above this are capped before exponentiation.
pub const LOG_PAYOFF_CAP: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Risk-sensitive cost under the reference measure.
    RsRef,
    /// Risk-sensitive cost under the risk-sensitive physical measure.
    RsPhys,
    /// Risk-neutral cost under the physical measure.
    RnPhys,
    /// Risk-neutral cost under the reference measure.
    RnRef,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::RsRef => "rs-ref",
            Estimator::RsPhys => "rs-phys",
            Estimator::RnPhys => "rn-phys",
            Estimator::RnRef => "rn-ref",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rs-ref" => Ok(Estimator::RsRef),
            "rs-phys" => Ok(Estimator::RsPhys),
            "rn-phys" => Ok(Estimator::RnPhys),
            "rn-ref" => Ok(Estimator::RnRef),
            other => Err(Error::Config(format!(
                "unknown estimator `{other}` (expected rs-ref, rs-phys, rn-phys or rn-ref)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Physical,
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub estimator: Estimator,
    pub measure: Measure,
    pub mu: f64,
    pub estimate: f64,
    /// Sample standard deviation over `√n_paths`.
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub model_hash: String,
    /// Paths whose log-payoff hit [`LOG_PAYOFF_CAP`].
    pub saturated: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CostReport {
    /// Half-width of the joint 95% interval for the difference of two
    /// independent-looking estimates.
    pub fn joint_ci95(&self, other: &CostReport) -> f64 {
        1.96 * (self.std_error.powi(2) + other.std_error.powi(2)).sqrt()
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite { step },
        Error::Positivity { min_eig, tol, .. } => Error::Positivity { step, min_eig, tol },
        other => other,
    }
}

struct Sample {
    value: f64,
    saturated: bool,
}

fn capped_exp(log: f64) -> Sample {
    if log > LOG_PAYOFF_CAP {
        Sample {
            value: LOG_PAYOFF_CAP.exp(),
            saturated: true,
        }
    } else {
        Sample {
            value: log.exp(),
            saturated: false,
        }
    }
}

fn plain(value: f64) -> Sample {
    Sample {
        value,
        saturated: false,
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::Config(format!("n_paths = {n_paths} must be at least 2")));
    }
    Ok(())
}

fn run_paths<F>(
    estimator: Estimator,
    measure: Measure,
    p: &TwoLevelParams,
    n_paths: usize,
    seed: u64,
    path: F,
) -> Result<CostReport>
where
    F: Fn(&mut NoiseStream) -> Result<Sample> + Sync,
{
    check_paths(n_paths)?;
    p.validate()?;
    let start = Instant::now();
    let samples: Vec<Sample> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| path(&mut NoiseStream::new(seed, i)))
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !mean.is_finite() || !var.is_finite() {
        return Err(Error::Overflow(format!(
            "{} estimate is not finite; reduce mu or the horizon",
            estimator.name()
        )));
    }
    let saturated = samples.iter().filter(|s| s.saturated).count();
    if saturated > 0 {
        log::warn!(
            "{}: {saturated} of {n_paths} paths hit the log-payoff cap; reduce mu or the horizon",
            estimator.name()
        );
    }
    Ok(CostReport {
        estimator,
        measure,
        mu: p.mu,
        estimate: mean,
        std_error: (var / n).sqrt(),
        n_paths,
        seed,
        model_hash: crate::io::model_hash(p),
        saturated,
        wall_time: start.elapsed(),
    })
}

/// `½(1 + z̄) + ½(1 − z̄)e^{μc}`: the terminal payoff `⟨π, e^{μC2}⟩`.
fn rs_terminal(p: &TwoLevelParams, z: f64) -> f64 {
    0.5 * (1.0 + z) + 0.5 * (1.0 - z) * (p.mu * p.c).exp()
}

/// `J^μ = E⁰[⟨σ^μ_T, e^{μC2}⟩]`: the record is a Wiener process, the
/// risk-sensitive state is carried unnormalized in Bloch form.
pub fn estimate_cost_rs_reference(
    p: &TwoLevelParams,
    controller: &ControllerHandle,
    initial: [f64; 3],
    n_paths: usize,
    seed: u64,
) -> Result<CostReport> {
    let template = controller.aligned_with(p);
    run_paths(Estimator::RsRef, Measure::Reference, p, n_paths, seed, |stream| {
        let mut ctrl = template.clone();
        let mut s = BlochState::from_vector(initial);
        for k in 0..p.n_steps() {
            let u = ctrl.control();
            let dy = stream.wiener_increment(p.dt);
            s = bloch_rs_step(p, &s, u, dy).map_err(|e| at_step(e, k + 1))?;
            ctrl.observe(u, dy).map_err(|e| at_step(e, k + 1))?;
        }
        let payoff = 0.5 * (s.n + s.z) + 0.5 * (s.n - s.z) * (p.mu * p.c).exp();
        if !(payoff > 0.0) {
            return Err(Error::Numeric(format!("non-positive terminal payoff {payoff}")));
        }
        Ok(capped_exp(s.log_factor + payoff.ln()))
    })
}

/// `J^μ = E^μ[exp(μ∫⟨π^μ, C1(u)⟩dt)·⟨π^μ_T, e^{μC2}⟩]`: the normalized
/// risk-sensitive state is driven by its own innovation and the controller
/// sees the reconstructed record.
pub fn estimate_cost_rs_physical(
    p: &TwoLevelParams,
    controller: &ControllerHandle,
    initial: [f64; 3],
    n_paths: usize,
    seed: u64,
) -> Result<CostReport> {
    let template = controller.aligned_with(p);
    run_paths(Estimator::RsPhys, Measure::Physical, p, n_paths, seed, |stream| {
        let mut ctrl = template.clone();
        let mut s = BlochState::from_vector(initial);
        let mut log_w = 0.0;
        for k in 0..p.n_steps() {
            let u = ctrl.control();
            let z = s.z / s.n;
            log_w += p.mu * (0.5 * p.a * (1.0 - z) + 0.5 * p.b * u.norm_sqr()) * p.dt;
            let dw = stream.wiener_increment(p.dt);
            let (next, dy) = bloch_normalized_step(p, &s, u, dw, FilterKind::RiskSensitive)
                .map_err(|e| at_step(e, k + 1))?;
            ctrl.observe(u, dy).map_err(|e| at_step(e, k + 1))?;
            s = next;
        }
        Ok(capped_exp(log_w + rs_terminal(p, s.z).ln()))
    })
}

/// Risk-neutral cost `E[∫⟨π, C1(u)⟩dt + ⟨π_T, C2⟩]` (physical measure) or
/// `E⁰[∫⟨σ, C1(u)⟩dt + ⟨σ_T, C2⟩]` (reference measure).
pub fn estimate_cost_rn(
    p: &TwoLevelParams,
    controller: &ControllerHandle,
    initial: [f64; 3],
    n_paths: usize,
    seed: u64,
    measure: Measure,
) -> Result<CostReport> {
    let template = controller.aligned_with(p);
    match measure {
        Measure::Physical => run_paths(Estimator::RnPhys, measure, p, n_paths, seed, |stream| {
            let mut ctrl = template.clone();
            let mut s = BlochState::from_vector(initial);
            let mut cost = 0.0;
            for k in 0..p.n_steps() {
                let u = ctrl.control();
                cost += (0.5 * p.a * (1.0 - s.z) + 0.5 * p.b * u.norm_sqr()) * p.dt;
                let dw = stream.wiener_increment(p.dt);
                let (next, dy) = bloch_normalized_step(p, &s, u, dw, FilterKind::Standard)
                    .map_err(|e| at_step(e, k + 1))?;
                ctrl.observe(u, dy).map_err(|e| at_step(e, k + 1))?;
                s = next;
            }
            Ok(plain(cost + 0.5 * p.c * (1.0 - s.z)))
        }),
        Measure::Reference => run_paths(Estimator::RnRef, measure, p, n_paths, seed, |stream| {
            let mut ctrl = template.clone();
            let mut s = BlochState::from_vector(initial);
            let mut cost = 0.0;
            for k in 0..p.n_steps() {
                let u = ctrl.control();
                cost += (0.5 * p.a * (s.n - s.z) + 0.5 * p.b * u.norm_sqr() * s.n) * p.dt;
                let dy = stream.wiener_increment(p.dt);
                s = bloch_rn_step(p, &s, u, dy).map_err(|e| at_step(e, k + 1))?;
                ctrl.observe(u, dy).map_err(|e| at_step(e, k + 1))?;
            }
            Ok(plain(cost + 0.5 * p.c * (s.n - s.z)))
        }),
    }
}

/// Dispatches on the estimator name.
pub fn estimate(
    estimator: Estimator,
    p: &TwoLevelParams,
    controller: &ControllerHandle,
    initial: [f64; 3],
    n_paths: usize,
    seed: u64,
) -> Result<CostReport> {
    match estimator {
        Estimator::RsRef => estimate_cost_rs_reference(p, controller, initial, n_paths, seed),
        Estimator::RsPhys => estimate_cost_rs_physical(p, controller, initial, n_paths, seed),
        Estimator::RnPhys => estimate_cost_rn(p, controller, initial, n_paths, seed, Measure::Physical),
        Estimator::RnRef => estimate_cost_rn(p, controller, initial, n_paths, seed, Measure::Reference),
    }
}

fn bloch_vector(s: &StateMatrix) -> [f64; 3] {
    [
        s.expect(&pauli::sigma_x()),
        s.expect(&pauli::sigma_y()),
        s.expect(&pauli::sigma_z()),
    ]
}

/// Simulates the closed loop: the truth is the normalized conditional state
/// in matrix form, driven by its innovation; the controller only sees the
/// record increments it generates.
pub fn run_closed_loop(
    spec: &ModelSpec,
    controller: &mut ControllerHandle,
    initial: &StateMatrix,
    stream: &mut NoiseStream,
) -> Result<TrajectoryRecord> {
    let n = spec.n_steps();
    let dt = spec.dt();
    let mut pi = initial.normalize()?;
    let mut rec = TrajectoryRecord {
        master_seed: stream.master_seed(),
        stream_index: stream.stream_index(),
        times: Vec::with_capacity(n + 1),
        y_increments: Vec::with_capacity(n),
        truth: Vec::with_capacity(n + 1),
        filter: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n),
        running_cost: Vec::with_capacity(n + 1),
    };
    let mut cost = 0.0;
    rec.times.push(0.0);
    rec.truth.push(bloch_vector(&pi));
    rec.filter.push(controller.state().to_array());
    rec.running_cost.push(cost);
    for k in 0..n {
        let u: Complex64 = controller.control();
        spec.check_control(u)?;
        cost += pi.expect(&spec.c1(u)) * dt;
        let dw = stream.wiener_increment(dt);
        let (next, dy) = belavkin_step(spec, &pi, u, dw).map_err(|e| at_step(e, k + 1))?;
        controller.observe(u, dy).map_err(|e| at_step(e, k + 1))?;
        pi = next;
        rec.times.push((k + 1) as f64 * dt);
        rec.y_increments.push(dy);
        rec.controls.push(u);
        rec.truth.push(bloch_vector(&pi));
        rec.filter.push(controller.state().to_array());
        rec.running_cost.push(cost);
    }
    Ok(rec)
}
