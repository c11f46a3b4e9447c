use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operator::{Operator, StateMatrix};

/// Integrates the master equation with classical RK4 under an open-loop
/// control signal. Returns `round(T/dt) + 1` states starting with `rho0`.
pub fn propagate_master(
    spec: &ModelSpec,
    rho0: &StateMatrix,
    control: &dyn Fn(f64) -> Complex64,
    horizon: f64,
    dt: f64,
) -> Result<Vec<StateMatrix>> {
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(Error::InvalidModel(format!("need 0 < dt <= T (dt = {dt}, T = {horizon})")));
    }
    let rho0 = rho0.normalize()?;
    let steps = (horizon / dt).round() as usize;
    let rhs = |rho: &Operator, t: f64| spec.master_rhs(rho, control(t));
    let mut out = Vec::with_capacity(steps + 1);
    out.push(rho0);
    let mut rho = *rho0.op();
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = rhs(&rho, t)?;
        let k2 = rhs(&(rho + k1.scale(0.5 * dt)), t + 0.5 * dt)?;
        let k3 = rhs(&(rho + k2.scale(0.5 * dt)), t + 0.5 * dt)?;
        let k4 = rhs(&(rho + k3.scale(dt)), t + dt)?;
        rho = (rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)).hermitian_part();
        if !rho.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        let drift = (rho.trace().re - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::Numeric(format!("trace drifted by {drift:e} at step {}", k + 1)));
        }
        out.push(StateMatrix::new(rho, true)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_level_model, TwoLevelParams};
    use crate::operator::pauli::*;

    fn zero(_: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn excited_state_decays() {
        let spec = two_level_model(&TwoLevelParams::default()).unwrap();
        let up = StateMatrix::new(proj_up(), true).unwrap();
        let path = propagate_master(&spec, &up, &zero, 5.0, 1e-3).unwrap();
        assert_eq!(path.len(), 5001);
        for (k, rho) in path.iter().enumerate() {
            let t = k as f64 * 1e-3;
            assert!((rho.expect(&sigma_z()) - (-1.0 + 2.0 * (-t).exp())).abs() < 1e-6);
            assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let spec = two_level_model(&TwoLevelParams::default()).unwrap();
        let down = StateMatrix::new(proj_down(), true).unwrap();
        let path = propagate_master(&spec, &down, &zero, 1.0, 1e-2).unwrap();
        assert!(path.iter().all(|r| r.op().max_abs_diff(&proj_down()) == 0.0));
    }

    #[test]
    fn driven_evolution_stays_physical() {
        let spec = two_level_model(&TwoLevelParams::default()).unwrap();
        let up = StateMatrix::new(proj_up(), true).unwrap();
        let drive = |t: f64| Complex64::new(2.0 * t.cos(), 1.0);
        let path = propagate_master(&spec, &up, &drive, 3.0, 1e-3).unwrap();
        for rho in &path {
            assert!(rho.op().min_eigenvalue() > -1e-9);
        }
    }
}
