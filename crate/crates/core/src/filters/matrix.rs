//! Matrix-form conditional-state filters for an arbitrary (small) system.
//!
//! All unnormalized filters advance the linear SDE
//!
//! ```text
//! dσ = (−Kσ − σK† + LσL† + MσM†) dt + g (Mσ + σM†) dy
//! ```
//!
//! by Euler–Maruyama, with `K` one of `K(u)` or `K^μ(u)` and `g = √η`. The
//! identity part `c1_effort·|u|²·I` of `C1(u)` commutes with everything and
//! only rescales σ, so it is applied as the exact factor
//! `exp(μ·c1_effort·|u|²·dt)` rather than through the Euler drift.
//!
//! Normalized filters take the same linear step, driven by the record
//! reconstructed from the innovation, and renormalize.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operator::{decoherence_apply, h_apply, h_tilde_apply, Operator, StateMatrix};
use crate::stochastic::em_step;

/// Result of a normalized filter step.
#[derive(Clone, Copy, Debug)]
pub struct NormalizedStep {
    pub state: StateMatrix,
    /// Record increment `dy₂` generated by the innovation.
    pub dy: f64,
    /// `tr(C1(u) π)` at the start of the step.
    pub running_cost_rate: f64,
}

/// Admissible negative eigenvalue (relative to the trace) after an Euler step.
///
/// Euler on the linear filter loses `O(dt·ξ²)` of positivity near pure states
/// (the `MσM†` term enters with `dt` instead of `dy²`), so the guard scales
/// with `dt` and only trips for grossly oversized steps.
pub fn positivity_tolerance(spec: &ModelSpec) -> f64 {
    let m = spec.m();
    1e-6 + 50.0 * spec.dt() * (m.adjoint() * *m).trace().re
}

fn linear_drift(spec: &ModelSpec, k: &Operator, sigma: &Operator) -> Operator {
    let l = spec.l();
    let m = spec.m();
    -(*k * *sigma) - *sigma * k.adjoint() + *l * *sigma * l.adjoint() + *m * *sigma * m.adjoint()
}

fn measurement(spec: &ModelSpec, sigma: &Operator) -> Operator {
    let m = spec.m();
    *m * *sigma + *sigma * m.adjoint()
}

fn guard(spec: &ModelSpec, sigma: Operator) -> Result<Operator> {
    let sigma = sigma.hermitian_part();
    let tr = sigma.trace().re;
    let tol = positivity_tolerance(spec);
    let lam = sigma.min_eigenvalue();
    if !(tr > 0.0) || lam < -tol * tr {
        return Err(Error::Positivity {
            step: 0,
            min_eig: lam,
            tol: tol * tr.abs(),
        });
    }
    Ok(sigma)
}

fn linear_step(
    spec: &ModelSpec,
    sigma: &Operator,
    k: &Operator,
    gain: f64,
    dy: f64,
    scalar_rate: f64,
) -> Result<Operator> {
    spec.l().check_dim(sigma)?;
    let next = em_step(
        sigma,
        |s| linear_drift(spec, k, s),
        |s| measurement(spec, s).scale(gain),
        dy,
        spec.dt(),
        0,
    )?;
    guard(spec, next.scale((scalar_rate * spec.dt()).exp()))
}

/// Unnormalized Belavkin filter step (standard conditional state σ).
pub fn belavkin_unnormalized_step(
    spec: &ModelSpec,
    sigma: &StateMatrix,
    u: Complex64,
    dy: f64,
) -> Result<StateMatrix> {
    let k = spec.k_unchecked(u);
    let next = linear_step(spec, sigma.op(), &k, 1.0, dy, 0.0)?;
    Ok(StateMatrix::from_step(next, false))
}

fn rs_linear(
    spec: &ModelSpec,
    sigma: &Operator,
    u: Complex64,
    gain: f64,
    dy: f64,
) -> Result<Operator> {
    let mu = spec.mu();
    let k = spec.k_mu_state(u, mu);
    linear_step(spec, sigma, &k, gain, dy, mu * spec.c1_effort_scalar(u))
}

/// Risk-sensitive filter step for the unnormalized state σ^μ.
pub fn rs_filter_step(
    spec: &ModelSpec,
    sigma_mu: &StateMatrix,
    u: Complex64,
    dy: f64,
) -> Result<StateMatrix> {
    Ok(StateMatrix::from_step(rs_linear(spec, sigma_mu.op(), u, 1.0, dy)?, false))
}

/// Risk-sensitive filter step when the monitored channel is detected with
/// efficiency η: the measurement term is scaled by `√η` and driven by the
/// detected record increment `dz`.
pub fn rs_filter_eta_step(
    spec: &ModelSpec,
    sigma_mu: &StateMatrix,
    u: Complex64,
    dz: f64,
) -> Result<StateMatrix> {
    let eta = spec.eta();
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidModel(format!("eta = {eta} outside [0, 1]")));
    }
    Ok(StateMatrix::from_step(
        rs_linear(spec, sigma_mu.op(), u, eta.sqrt(), dz)?,
        false,
    ))
}

fn normalized_step(
    spec: &ModelSpec,
    pi: &StateMatrix,
    u: Complex64,
    dw: f64,
    mu: f64,
) -> Result<NormalizedStep> {
    let spec_mu;
    let spec = if mu == spec.mu() {
        spec
    } else {
        spec_mu = spec.with_mu(mu)?;
        &spec_mu
    };
    let gain = spec.eta().sqrt();
    let m = spec.m();
    let beta = pi.expect(&(*m + m.adjoint()));
    let dy = gain * beta * spec.dt() + dw;
    let running_cost_rate = pi.expect(&spec.c1(u));
    let k = spec.k_mu_state(u, mu);
    let next = linear_step(spec, pi.op(), &k, gain, dy, 0.0)?;
    let tr = next.trace().re;
    Ok(NormalizedStep {
        state: StateMatrix::from_step(next.scale(1.0 / tr), true),
        dy,
        running_cost_rate,
    })
}

/// Normalized conditional state π_t driven by the innovation `dw`.
///
/// Returns the updated state and the generated record increment
/// `dy₂ = √η·tr[(M+M†)π]dt + dw`.
pub fn belavkin_step(
    spec: &ModelSpec,
    pi: &StateMatrix,
    u: Complex64,
    dw: f64,
) -> Result<(StateMatrix, f64)> {
    let out = normalized_step(spec, pi, u, dw, 0.0)?;
    Ok((out.state, out.dy))
}

/// Normalized risk-sensitive state π^μ driven by its own innovation `dw^μ`.
pub fn rs_filter_normalized_step(
    spec: &ModelSpec,
    pi_mu: &StateMatrix,
    u: Complex64,
    dw_mu: f64,
) -> Result<NormalizedStep> {
    normalized_step(spec, pi_mu, u, dw_mu, spec.mu())
}

/// Direct Euler–Maruyama step of the normalized equation written with 𝓗:
/// `dπ = (−i[H,π] + 𝒟[L]π + 𝒟[M]π + ½μ𝓗[C1]π)dt + √η𝓗[M]π dw`,
/// followed by renormalization. Converges to the same solution as
/// [`rs_filter_normalized_step`] as `dt → 0`.
pub fn normalized_innovation_euler_step(
    spec: &ModelSpec,
    pi: &StateMatrix,
    u: Complex64,
    dw: f64,
    mu: f64,
) -> Result<NormalizedStep> {
    let gain = spec.eta().sqrt();
    let m = spec.m();
    let beta = pi.expect(&(*m + m.adjoint()));
    let dy = gain * beta * spec.dt() + dw;
    let c1 = spec.c1(u);
    let running_cost_rate = pi.expect(&c1);
    let drift = spec.master_rhs(pi.op(), u)? + h_apply(&c1, pi)?.scale(0.5 * mu);
    let diffusion = h_apply(m, pi)?.scale(gain);
    let next = *pi.op() + drift.scale(spec.dt()) + diffusion.scale(dw);
    if !next.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let next = guard(spec, next)?;
    let tr = next.trace().re;
    Ok(NormalizedStep {
        state: StateMatrix::from_step(next.scale(1.0 / tr), true),
        dy,
        running_cost_rate,
    })
}

/// Drift of the σ^μ equation assembled from `K^μ(u)`:
/// `−K^μσ − σK^{μ†} + LσL† + MσM†`.
pub fn rs_drift(spec: &ModelSpec, sigma: &Operator, u: Complex64) -> Result<Operator> {
    let k = spec.k_mu_of_u(u)?;
    spec.l().check_dim(sigma)?;
    Ok(linear_drift(spec, &k, sigma))
}

/// Drift of the σ^μ equation assembled from superoperators:
/// `−i[H,σ] + 𝒟[L]σ + 𝒟[M]σ + ½μ𝓗̃[C1(u)]σ`.
pub fn rs_drift_superop(spec: &ModelSpec, sigma: &Operator, u: Complex64) -> Result<Operator> {
    spec.check_control(u)?;
    let h = spec.hamiltonian(u);
    Ok(h.commutator(sigma) * Complex64::new(0.0, -1.0)
        + decoherence_apply(spec.l(), sigma)?
        + decoherence_apply(spec.m(), sigma)?
        + h_tilde_apply(&spec.c1(u), sigma)?.scale(0.5 * spec.mu()))
}
