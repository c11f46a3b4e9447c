//! Backward dynamic programming for the two-level atom on the normalized
//! Bloch ball.
//!
//! The unnormalized value is positively homogeneous in σ, so it is stored as
//! a function of `r̄ = (x, y, z)/n` alone: `S(σ, t) = n·e^ℓ·V(r̄, t)` in the
//! risk-sensitive case and `S(σ, t) = n·w(r̄, t)` in the risk-neutral case.
//! Each backward step is a controlled two-point Markov chain
//!
//! ```text
//! r̄± = proj(r̄ + b(r̄, u)Δt ± s(r̄)√Δt)
//! V(r̄, t) = min_u exp(Δt(½μa(1−z̄) + ½μb|u|²)) · ½[V(r̄⁺, t+Δt) + V(r̄⁻, t+Δt)]
//! w(r̄, t) = min_u ½(a(1−z̄) + b|u|²)Δt + ½[w(r̄⁺, t+Δt) + w(r̄⁻, t+Δt)]
//! ```
//!
//! with trilinear interpolation between lattice nodes.

pub mod control;
pub mod generator;
pub mod lattice;
pub mod reduced;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoLevelParams;

pub use control::{clamp_control, control_grid, optimal_u_rn, optimal_u_rs, ControlChoice};
pub use generator::{generator_oracle, Cylindrical, GeneratorEstimate};
pub use lattice::Lattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RiskSensitive,
    RiskNeutral,
}

/// Terminal condition of the risk-neutral problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RnTerminal {
    /// `½(1 − z̄)·c`
    #[default]
    LinearC,
    /// `½(1 − z̄)·e^c`
    ExpC,
}

/// How the per-node minimization over controls is carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlSearch {
    /// Closed-form stationary point from the interpolant gradient, checked
    /// against `u = 0` and the 3×3 control-grid points around it.
    #[default]
    Guarded,
    /// Full control grid, then the closed-form candidate.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    GridSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dt: f64,
    /// Points per axis of the square control grid over `|u| ≤ u_max`.
    pub control_points: usize,
    /// Keep every `store_stride`-th time slice (plus the terminal one).
    pub store_stride: usize,
    pub rn_terminal: RnTerminal,
    pub search: ControlSearch,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 41,
            ny: 41,
            nz: 41,
            dt: 2.5e-3,
            control_points: 21,
            store_stride: 20,
            rn_terminal: RnTerminal::LinearC,
            search: ControlSearch::Guarded,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 21 || self.ny < 21 || self.nz < 21 {
            return Err(Error::InvalidGrid(format!(
                "lattice {}x{}x{} below the 21^3 minimum",
                self.nx, self.ny, self.nz
            )));
        }
        if self.control_points < 17 {
            return Err(Error::InvalidGrid(format!(
                "control grid {0}x{0} below the 17x17 minimum",
                self.control_points
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dp time step {} must be > 0", self.dt)));
        }
        if self.store_stride == 0 {
            return Err(Error::InvalidGrid("store_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.nx, self.ny, self.nz)
    }

    pub fn n_steps(&self, horizon: f64) -> usize {
        (horizon / self.dt).round().max(1.0) as usize
    }
}

/// Value function on stored time slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub lattice: Lattice,
    pub mode: Mode,
    pub params: TwoLevelParams,
    pub config: GridConfig,
    /// DP step index of each stored slice, increasing, ending at `n_steps`.
    pub steps: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

/// Minimizing control on stored time slices (every stored step but the last).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub lattice: Lattice,
    pub mode: Mode,
    pub params: TwoLevelParams,
    pub config: GridConfig,
    pub provenance: Provenance,
    pub steps: Vec<usize>,
    pub u_re: Vec<Vec<f64>>,
    pub u_im: Vec<Vec<f64>>,
}

/// Index of the stored slice nearest to `t` (ties go to the earlier slice).
fn slice_nearest(steps: &[usize], dt: f64, t: f64) -> usize {
    let k = t / dt;
    let i = steps.partition_point(|&s| (s as f64) <= k + 1e-9);
    match i {
        0 => 0,
        i if i == steps.len() => i - 1,
        i => {
            if k - steps[i - 1] as f64 <= steps[i] as f64 - k {
                i - 1
            } else {
                i
            }
        }
    }
}

impl ValueGrid {
    pub fn time(&self, slice: usize) -> f64 {
        self.steps[slice] as f64 * self.config.dt
    }

    /// `V(r̄, t)` (risk-sensitive) or `w(r̄, t)` (risk-neutral), interpolated
    /// in space on the stored slice nearest to `t`.
    pub fn value_at(&self, t: f64, r: [f64; 3]) -> f64 {
        let s = slice_nearest(&self.steps, self.config.dt, t);
        self.lattice.interpolate(&self.values[s], reduced::project(r))
    }

    /// Value of the unnormalized state `σ = ½e^ℓ(nI + xσ_x + yσ_y + zσ_z)`.
    pub fn unnormalized_value(&self, t: f64, n: f64, x: f64, y: f64, z: f64, log_factor: f64) -> f64 {
        let v = self.value_at(t, [x / n, y / n, z / n]);
        match self.mode {
            Mode::RiskSensitive => n * log_factor.exp() * v,
            Mode::RiskNeutral => n * v,
        }
    }

    pub fn initial_value(&self, r: [f64; 3]) -> f64 {
        self.value_at(0.0, r)
    }
}

impl Policy {
    /// Feedback law `u(t, r̄)`: trilinear in space, sample-and-hold in time.
    pub fn control(&self, t: f64, r: [f64; 3]) -> Complex64 {
        let s = slice_nearest(&self.steps, self.config.dt, t);
        let q = reduced::project(r);
        let u = Complex64::new(
            self.lattice.interpolate(&self.u_re[s], q),
            self.lattice.interpolate(&self.u_im[s], q),
        );
        clamp_control(u, self.params.u_max).u
    }
}

/// Terminal slice value at `r̄`.
pub fn terminal_value(p: &TwoLevelParams, cfg: &GridConfig, mode: Mode, r: [f64; 3]) -> f64 {
    let z = r[2];
    match mode {
        Mode::RiskSensitive => 0.5 * (1.0 + z) + 0.5 * (1.0 - z) * (p.mu * p.c).exp(),
        Mode::RiskNeutral => match cfg.rn_terminal {
            RnTerminal::LinearC => 0.5 * (1.0 - z) * p.c,
            RnTerminal::ExpC => 0.5 * (1.0 - z) * p.c.exp(),
        },
    }
}

/// Largest admissible DP step: the drift may move a node by at most one
/// lattice spacing per step.
pub fn max_stable_dt(p: &TwoLevelParams, lattice: &Lattice, mode: Mode) -> f64 {
    let mu = effective_mu(p, mode);
    let mut speed: f64 = 0.0;
    for node in 0..lattice.len() {
        if !lattice.is_active(node) {
            continue;
        }
        let r = reduced::project(lattice.coords(node));
        let b = reduced::drift0(p, mu, r);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let b_norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        speed = speed.max(b_norm + p.u_max * 2.0 * std::f64::consts::SQRT_2 * p.kappa_f * norm);
    }
    lattice.min_spacing() / speed
}

fn effective_mu(p: &TwoLevelParams, mode: Mode) -> f64 {
    match mode {
        Mode::RiskSensitive => p.mu,
        Mode::RiskNeutral => 0.0,
    }
}

/// One backward step of the controlled chain; holds everything that does
/// not depend on the value slice.
pub struct BackwardStep {
    params: TwoLevelParams,
    config: GridConfig,
    lattice: Lattice,
    mode: Mode,
    mu: f64,
    grid: Vec<Complex64>,
    active: Vec<usize>,
    inactive: Vec<usize>,
}

/// Outcome of the minimization at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeSolution {
    pub value: f64,
    pub u: Complex64,
}

impl BackwardStep {
    pub fn new(params: &TwoLevelParams, config: &GridConfig, mode: Mode) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let lattice = config.lattice()?;
        let (active, inactive): (Vec<usize>, Vec<usize>) =
            (0..lattice.len()).partition(|&n| lattice.is_active(n));
        Ok(BackwardStep {
            params: *params,
            config: *config,
            lattice,
            mode,
            mu: effective_mu(params, mode),
            grid: control_grid(params.u_max, config.control_points),
            active,
            inactive,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Nodes updated by the scheme (the others are filled from the sphere).
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    /// Point at which a node is evaluated: its radial projection.
    pub fn evaluation_point(&self, node: usize) -> [f64; 3] {
        reduced::project(self.lattice.coords(node))
    }

    fn successors(&self, r: [f64; 3], u: Complex64) -> ([f64; 3], [f64; 3]) {
        let dt = self.config.dt;
        let sq = dt.sqrt();
        let b = reduced::drift(&self.params, self.mu, r, u);
        let s = reduced::diffusion(&self.params, r);
        let plus = std::array::from_fn(|i| r[i] + b[i] * dt + s[i] * sq);
        let minus = std::array::from_fn(|i| r[i] + b[i] * dt - s[i] * sq);
        (reduced::project(plus), reduced::project(minus))
    }

    /// The quantity minimized over `u` at point `r̄` given the next slice.
    pub fn objective_at(&self, next: &[f64], r: [f64; 3], u: Complex64) -> f64 {
        let p = &self.params;
        let dt = self.config.dt;
        let (a, b) = self.successors(r, u);
        let mean = 0.5 * (self.lattice.interpolate(next, a) + self.lattice.interpolate(next, b));
        match self.mode {
            Mode::RiskSensitive => {
                let rate = reduced::mass_rate(p, self.mu, r) + 0.5 * self.mu * p.b * u.norm_sqr();
                (rate * dt).exp() * mean
            }
            Mode::RiskNeutral => 0.5 * (p.a * (1.0 - r[2]) + p.b * u.norm_sqr()) * dt + mean,
        }
    }

    pub fn objective(&self, next: &[f64], node: usize, u: Complex64) -> f64 {
        self.objective_at(next, self.evaluation_point(node), u)
    }

    /// Gradient of `W` from the interpolant at the uncontrolled successors:
    /// `∇V/(μV)` in the risk-sensitive case, `∇w` in the risk-neutral case.
    fn w_gradient(&self, next: &[f64], r: [f64; 3]) -> Option<[f64; 3]> {
        let (a, b) = self.successors(r, Complex64::new(0.0, 0.0));
        let (va, ga) = self.lattice.interpolate_with_gradient(next, a);
        let (vb, gb) = self.lattice.interpolate_with_gradient(next, b);
        let g: [f64; 3] = std::array::from_fn(|i| 0.5 * (ga[i] + gb[i]));
        match self.mode {
            Mode::RiskSensitive => {
                let v = 0.5 * (va + vb);
                let scale = self.mu * v;
                (scale > 0.0).then(|| g.map(|c| c / scale))
            }
            Mode::RiskNeutral => Some(g),
        }
    }

    /// Closed-form control at `r̄` from the next slice.
    pub fn closed_form_at(&self, next: &[f64], r: [f64; 3]) -> ControlChoice {
        let zero = ControlChoice {
            u: Complex64::new(0.0, 0.0),
            clamped: false,
        };
        let Some(g) = self.w_gradient(next, r) else {
            return zero;
        };
        let choice = match self.mode {
            Mode::RiskSensitive => optimal_u_rs(&self.params, 1.0, r[0], r[1], r[2], g),
            Mode::RiskNeutral => optimal_u_rn(&self.params, 1.0, r[0], r[1], r[2], g),
        };
        choice.unwrap_or(zero)
    }

    /// Brute-force minimizer over the control grid.
    pub fn grid_argmin(&self, next: &[f64], node: usize) -> NodeSolution {
        let r = self.evaluation_point(node);
        let mut best = NodeSolution {
            value: f64::INFINITY,
            u: Complex64::new(0.0, 0.0),
        };
        for &u in &self.grid {
            let v = self.objective_at(next, r, u);
            if v < best.value {
                best = NodeSolution { value: v, u };
            }
        }
        best
    }

    pub fn solve_node(&self, next: &[f64], node: usize) -> NodeSolution {
        let r = self.evaluation_point(node);
        let closed = self.closed_form_at(next, r).u;
        let mut best = NodeSolution {
            value: self.objective_at(next, r, closed),
            u: closed,
        };
        let mut consider = |u: Complex64| {
            let v = self.objective_at(next, r, u);
            if v < best.value {
                best = NodeSolution { value: v, u };
            }
        };
        match self.config.search {
            ControlSearch::Guarded => {
                consider(Complex64::new(0.0, 0.0));
                for u in control::grid_neighbours(closed, self.params.u_max, self.config.control_points) {
                    consider(u);
                }
            }
            ControlSearch::Exhaustive => {
                for &u in &self.grid {
                    consider(u);
                }
            }
        }
        best
    }

    /// Maps the slice at step `k + 1` to the slice at step `k` together with
    /// the minimizing controls.
    pub fn step(&self, next: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.lattice.len();
        let solved: Vec<NodeSolution> = self
            .active
            .par_iter()
            .map(|&node| self.solve_node(next, node))
            .collect();
        let mut values = vec![0.0; n];
        let mut u_re = vec![0.0; n];
        let mut u_im = vec![0.0; n];
        for (&node, s) in self.active.iter().zip(&solved) {
            values[node] = s.value;
            u_re[node] = s.u.re;
            u_im[node] = s.u.im;
        }
        // Nodes outside the active shell take the value at their projection.
        for &node in &self.inactive {
            let q = self.evaluation_point(node);
            values[node] = self.lattice.interpolate(&values, q);
            u_re[node] = self.lattice.interpolate(&u_re, q);
            u_im[node] = self.lattice.interpolate(&u_im, q);
        }
        self.check_slice(&values, k)?;
        Ok((values, u_re, u_im))
    }

    fn check_slice(&self, values: &[f64], k: usize) -> Result<()> {
        let bad = values.iter().position(|v| {
            !v.is_finite() || (self.mode == Mode::RiskSensitive && *v <= 0.0)
        });
        match bad {
            Some(node) => Err(Error::SolverNaN {
                time: k as f64 * self.config.dt,
                node,
            }),
            None => Ok(()),
        }
    }

    pub fn terminal_slice(&self) -> Vec<f64> {
        (0..self.lattice.len())
            .map(|node| terminal_value(&self.params, &self.config, self.mode, self.evaluation_point(node)))
            .collect()
    }
}

/// Full backward induction; see the module docs.
pub fn backward_solve(p: &TwoLevelParams, cfg: &GridConfig, mode: Mode) -> Result<(ValueGrid, Policy)> {
    let stepper = BackwardStep::new(p, cfg, mode)?;
    let max_dt = max_stable_dt(p, stepper.lattice(), mode);
    if cfg.dt > max_dt {
        return Err(Error::Unstable { dt: cfg.dt, max_dt });
    }
    let n_steps = cfg.n_steps(p.t_final);
    let terminal = stepper.terminal_slice();
    backward_from(&stepper, terminal, n_steps, n_steps)
}

/// Backward induction from a given slice at step `from` down to step 0,
/// storing slices on the multiples of the stride.
pub fn backward_from(
    stepper: &BackwardStep,
    terminal: Vec<f64>,
    from: usize,
    n_steps: usize,
) -> Result<(ValueGrid, Policy)> {
    let cfg = stepper.config;
    let stride = cfg.store_stride;
    let mut steps = vec![from];
    let mut values = vec![terminal];
    let mut pol_steps = Vec::new();
    let mut u_re = Vec::new();
    let mut u_im = Vec::new();
    let mut current = values[0].clone();
    for k in (0..from).rev() {
        let (v, ur, ui) = stepper.step(&current, k)?;
        if k % stride == 0 {
            steps.push(k);
            values.push(v.clone());
            pol_steps.push(k);
            u_re.push(ur);
            u_im.push(ui);
        }
        current = v;
        log::debug!("dp step {k} of {n_steps}");
    }
    steps.reverse();
    values.reverse();
    pol_steps.reverse();
    u_re.reverse();
    u_im.reverse();
    let provenance = match cfg.search {
        ControlSearch::Guarded => Provenance::ClosedForm,
        ControlSearch::Exhaustive => Provenance::GridSearch,
    };
    Ok((
        ValueGrid {
            lattice: stepper.lattice,
            mode: stepper.mode,
            params: stepper.params,
            config: cfg,
            steps,
            values,
        },
        Policy {
            lattice: stepper.lattice,
            mode: stepper.mode,
            params: stepper.params,
            config: cfg,
            provenance,
            steps: pol_steps,
            u_re,
            u_im,
        },
    ))
}

/// Risk-sensitive synthesis: value `V` with `S^μ = n·e^ℓ·V` and its policy.
pub fn rs_backward_solve(p: &TwoLevelParams, cfg: &GridConfig) -> Result<(ValueGrid, Policy)> {
    backward_solve(p, cfg, Mode::RiskSensitive)
}

/// Risk-neutral synthesis: value `w` with `S = n·w` and its policy.
pub fn rn_backward_solve(p: &TwoLevelParams, cfg: &GridConfig) -> Result<(ValueGrid, Policy)> {
    backward_solve(p, cfg, Mode::RiskNeutral)
}
