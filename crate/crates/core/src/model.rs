//! Problem definition: system operators, cost operators, couplings and the
//! derived drift operators `K(u)`, `K^μ(u)`.
//!
//! Units: ℏ = 1. For the two-level atom the total decay rate
//! `κ_f² + κ_s² = 1` fixes the time unit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{decoherence_apply, pauli, Operator};

const COST_POSITIVITY_TOL: f64 = 1e-12;

/// An operator that depends affinely on a complex control:
/// `A(u) = base + Re(u)·re + Im(u)·im`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlAffine {
    pub base: Operator,
    pub re: Operator,
    pub im: Operator,
}

impl ControlAffine {
    pub fn constant(op: Operator) -> Self {
        let z = Operator::zeros(op.dim());
        ControlAffine {
            base: op,
            re: z,
            im: z,
        }
    }

    pub fn eval(&self, u: Complex64) -> Operator {
        self.base + self.re.scale(u.re) + self.im.scale(u.im)
    }
}

/// Inputs to [`ModelSpec::new`].
#[derive(Clone, Copy, Debug)]
pub struct ModelParts {
    /// Coupling to the unmonitored channel.
    pub l: Operator,
    /// Coupling to the monitored channel.
    pub m: Operator,
    pub hamiltonian: ControlAffine,
    /// State part of the running cost; `C1(u) = c1_state + c1_effort·|u|²·I`.
    pub c1_state: Operator,
    pub c1_effort: f64,
    pub c2: Operator,
    pub mu: f64,
    pub eta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub u_max: f64,
}

/// A validated, immutable problem definition.
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    parts: ModelParts,
    n_steps: usize,
}

fn check_nonnegative_hermitian(name: &str, op: &Operator) -> Result<()> {
    let dev = op.hermiticity_defect();
    if dev > COST_POSITIVITY_TOL {
        return Err(Error::InvalidModel(format!(
            "{name} is not Hermitian (defect {dev:e})"
        )));
    }
    let lam = op.min_eigenvalue();
    if lam < -COST_POSITIVITY_TOL {
        return Err(Error::InvalidModel(format!(
            "{name} has negative eigenvalue {lam:e}"
        )));
    }
    Ok(())
}

impl ModelSpec {
    pub fn new(mut parts: ModelParts) -> Result<Self> {
        let d = parts.l.dim();
        for (name, op) in [
            ("M", parts.m),
            ("H base", parts.hamiltonian.base),
            ("H re", parts.hamiltonian.re),
            ("H im", parts.hamiltonian.im),
            ("C1", parts.c1_state),
            ("C2", parts.c2),
        ] {
            if op.dim() != d {
                return Err(Error::InvalidModel(format!(
                    "{name} has dimension {} but L has {d}",
                    op.dim()
                )));
            }
        }
        for (name, op) in [
            ("H base", parts.hamiltonian.base),
            ("H re", parts.hamiltonian.re),
            ("H im", parts.hamiltonian.im),
        ] {
            if op.hermiticity_defect() > 1e-12 {
                return Err(Error::InvalidModel(format!("{name} is not Hermitian")));
            }
        }
        check_nonnegative_hermitian("C1", &parts.c1_state)?;
        check_nonnegative_hermitian("C2", &parts.c2)?;
        if !(parts.c1_effort >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "control-effort weight {} must be >= 0",
                parts.c1_effort
            )));
        }
        if !(parts.mu >= 0.0) || !parts.mu.is_finite() {
            return Err(Error::InvalidModel(format!("mu = {} must be >= 0", parts.mu)));
        }
        if !(0.0..=1.0).contains(&parts.eta) {
            return Err(Error::InvalidModel(format!("eta = {} outside [0, 1]", parts.eta)));
        }
        if !(parts.horizon > 0.0) || !(parts.dt > 0.0) || parts.dt > parts.horizon {
            return Err(Error::InvalidModel(format!(
                "need 0 < dt <= T, got dt = {}, T = {}",
                parts.dt, parts.horizon
            )));
        }
        if !(parts.u_max > 0.0) {
            return Err(Error::InvalidModel(format!("u_max = {} must be > 0", parts.u_max)));
        }
        let n_steps = resolve_steps(parts.horizon, &mut parts.dt);
        Ok(ModelSpec { parts, n_steps })
    }

    pub fn dim(&self) -> usize {
        self.parts.l.dim()
    }
    pub fn l(&self) -> &Operator {
        &self.parts.l
    }
    pub fn m(&self) -> &Operator {
        &self.parts.m
    }
    pub fn c2(&self) -> &Operator {
        &self.parts.c2
    }
    pub fn c1_state(&self) -> &Operator {
        &self.parts.c1_state
    }
    pub fn c1_effort(&self) -> f64 {
        self.parts.c1_effort
    }
    pub fn mu(&self) -> f64 {
        self.parts.mu
    }
    pub fn eta(&self) -> f64 {
        self.parts.eta
    }
    pub fn horizon(&self) -> f64 {
        self.parts.horizon
    }
    pub fn dt(&self) -> f64 {
        self.parts.dt
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn u_max(&self) -> f64 {
        self.parts.u_max
    }
    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    /// Same model with a different risk parameter.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(ModelParts { mu, ..self.parts })
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(ModelParts { eta, ..self.parts })
    }

    pub fn with_time_grid(&self, horizon: f64, dt: f64) -> Result<Self> {
        Self::new(ModelParts {
            horizon,
            dt,
            ..self.parts
        })
    }

    pub fn check_control(&self, u: Complex64) -> Result<()> {
        if !(u.norm() <= self.parts.u_max * (1.0 + 1e-12)) {
            return Err(Error::ControlOutOfDomain {
                u,
                u_max: self.parts.u_max,
            });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, u: Complex64) -> Operator {
        self.parts.hamiltonian.eval(u)
    }

    /// Full running-cost operator `C1(u)`.
    pub fn c1(&self, u: Complex64) -> Operator {
        self.parts.c1_state + Operator::identity(self.dim()).scale(self.c1_effort_scalar(u))
    }

    /// Scalar coefficient of the identity part of `C1(u)`.
    #[inline]
    pub fn c1_effort_scalar(&self, u: Complex64) -> f64 {
        self.parts.c1_effort * u.norm_sqr()
    }

    /// `K(u) = iH(u) + ½L†L + ½M†M`.
    pub fn k_of_u(&self, u: Complex64) -> Result<Operator> {
        self.check_control(u)?;
        Ok(self.k_unchecked(u))
    }

    /// `K^μ(u) = K(u) − ½μ C1(u)`.
    pub fn k_mu_of_u(&self, u: Complex64) -> Result<Operator> {
        self.check_control(u)?;
        Ok(self.k_unchecked(u) - self.c1(u).scale(0.5 * self.parts.mu))
    }

    pub(crate) fn k_unchecked(&self, u: Complex64) -> Operator {
        let l = &self.parts.l;
        let m = &self.parts.m;
        let h = self.hamiltonian(u);
        h * Complex64::new(0.0, 1.0) + (l.adjoint() * *l + m.adjoint() * *m).scale(0.5)
    }

    /// `K(u) − ½μ·c1_state`: the drift operator of the risk-sensitive filter
    /// with the identity part of `C1(u)` left out. That part only rescales
    /// the state and is applied separately as an exact scalar factor.
    pub(crate) fn k_mu_state(&self, u: Complex64, mu: f64) -> Operator {
        self.k_unchecked(u) - self.parts.c1_state.scale(0.5 * mu)
    }

    /// Master-equation right-hand side
    /// `−i[H(u), ρ] + 𝒟[L]ρ + 𝒟[M]ρ`.
    pub fn master_rhs(&self, rho: &Operator, u: Complex64) -> Result<Operator> {
        self.parts.l.check_dim(rho)?;
        let h = self.hamiltonian(u);
        Ok(h.commutator(rho) * Complex64::new(0.0, -1.0)
            + decoherence_apply(&self.parts.l, rho)?
            + decoherence_apply(&self.parts.m, rho)?)
    }
}

fn resolve_steps(horizon: f64, dt: &mut f64) -> usize {
    let ratio = horizon / *dt;
    let steps = ratio.round().max(1.0);
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        let adjusted = horizon / steps;
        log::warn!(
            "T/dt = {ratio} is not an integer; using {steps} steps with dt = {adjusted}"
        );
        *dt = adjusted;
    }
    steps as usize
}

/// Parameters of the two-level atom under laser control with homodyne
/// monitoring of a second channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelParams {
    /// Amplitude coupling to the control channel.
    pub kappa_f: f64,
    /// Amplitude coupling to the measured channel.
    pub kappa_s: f64,
    /// Weight of the running excited-state-miss penalty.
    pub a: f64,
    /// Weight of the control effort penalty.
    pub b: f64,
    /// Weight of the terminal penalty.
    pub c: f64,
    pub mu: f64,
    pub eta: f64,
    #[serde(rename = "horizon")]
    pub t_final: f64,
    pub dt: f64,
    pub u_max: f64,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        TwoLevelParams {
            kappa_f: k,
            kappa_s: k,
            a: 1.0,
            b: 0.5,
            c: 1.0,
            mu: 0.1,
            eta: 1.0,
            t_final: 5.0,
            dt: 1e-3,
            u_max: 5.0,
        }
    }
}

impl TwoLevelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let all = [
            self.kappa_f,
            self.kappa_s,
            self.a,
            self.b,
            self.c,
            self.mu,
            self.eta,
            self.t_final,
            self.dt,
            self.u_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.kappa_f < 0.0 || self.kappa_s < 0.0 {
            return bad("couplings must be >= 0".into());
        }
        let norm = self.kappa_f * self.kappa_f + self.kappa_s * self.kappa_s;
        if (norm - 1.0).abs() > 1e-12 {
            return bad(format!("kappa_f² + kappa_s² = {norm} must equal 1"));
        }
        if self.a < 0.0 || self.c < 0.0 {
            return bad("cost weights a, c must be >= 0".into());
        }
        if !(self.b > 0.0) {
            return bad(format!("control weight b = {} must be > 0", self.b));
        }
        if self.mu < 0.0 {
            return bad(format!("mu = {} must be >= 0", self.mu));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta = {} outside [0, 1]", self.eta));
        }
        if !(self.t_final > 0.0) || !(self.dt > 0.0) || self.dt > self.t_final {
            return bad(format!("need 0 < dt <= T (dt = {}, T = {})", self.dt, self.t_final));
        }
        if !(self.u_max > 0.0) {
            return bad(format!("u_max = {} must be > 0", self.u_max));
        }
        Ok(())
    }

    /// Number of integration steps; `dt` is assumed already consistent.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// Returns a copy whose `dt` divides `T` exactly (warning if changed).
    pub fn resolved(mut self) -> Self {
        resolve_steps(self.t_final, &mut self.dt);
        self
    }

    pub fn with_mu(self, mu: f64) -> Self {
        TwoLevelParams { mu, ..self }
    }
}

/// Builds the two-level model: `L = κ_f σ₋`, `M = κ_s σ₋`,
/// `H(u) = i(u* L − u L†)`, `C1(u) = a|↓⟩⟨↓| + ½b|u|² I`, `C2 = c|↓⟩⟨↓|`.
pub fn two_level_model(p: &TwoLevelParams) -> Result<ModelSpec> {
    p.validate()?;
    let sm = pauli::sigma_minus();
    let l = sm.scale(p.kappa_f);
    let m = sm.scale(p.kappa_s);
    // i(u* L − u L†) = i·u_r (L − L†) + u_i (L + L†)
    let i = Complex64::new(0.0, 1.0);
    let hamiltonian = ControlAffine {
        base: Operator::zeros(2),
        re: (l - l.adjoint()) * i,
        im: l + l.adjoint(),
    };
    ModelSpec::new(ModelParts {
        l,
        m,
        hamiltonian,
        c1_state: pauli::proj_down().scale(p.a),
        c1_effort: 0.5 * p.b,
        c2: pauli::proj_down().scale(p.c),
        mu: p.mu,
        eta: p.eta,
        horizon: p.t_final,
        dt: p.dt,
        u_max: p.u_max,
    })
}
