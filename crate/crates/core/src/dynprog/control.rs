use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::TwoLevelParams;

/// A minimizer candidate together with whether it was clamped to the disc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlChoice {
    pub u: Complex64,
    pub clamped: bool,
}

/// Radial clamp onto `|u| ≤ u_max`.
pub fn clamp_control(u: Complex64, u_max: f64) -> ControlChoice {
    let r = u.norm();
    if r > u_max {
        ControlChoice {
            u: u * (u_max / r),
            clamped: true,
        }
    } else {
        ControlChoice { u, clamped: false }
    }
}

fn stationary(p: &TwoLevelParams, n: f64, x: f64, y: f64, z: f64, g: [f64; 3]) -> Result<ControlChoice> {
    if !(n > 0.0) {
        return Err(Error::InvalidState(format!("mass n = {n} must be > 0")));
    }
    let k = 2.0 * p.kappa_f / (p.b * n);
    let u = Complex64::new(k * (x * g[2] - z * g[0]), k * (z * g[1] - y * g[2]));
    if !(u.re.is_finite() && u.im.is_finite()) {
        return Err(Error::Numeric(format!("non-finite stationary control {u}")));
    }
    Ok(clamp_control(u, p.u_max))
}

/// Stationary point of the risk-sensitive Hamiltonian,
/// `u_r = (2κ_f/bn)(x W_z − z W_x)`, `u_i = (2κ_f/bn)(z W_y − y W_z)`,
/// clamped to the control disc.
pub fn optimal_u_rs(p: &TwoLevelParams, n: f64, x: f64, y: f64, z: f64, grad_w: [f64; 3]) -> Result<ControlChoice> {
    stationary(p, n, x, y, z, grad_w)
}

/// Risk-neutral counterpart of [`optimal_u_rs`]; the same algebraic form with
/// the gradient of the risk-neutral value.
pub fn optimal_u_rn(p: &TwoLevelParams, n: f64, x: f64, y: f64, z: f64, grad_w: [f64; 3]) -> Result<ControlChoice> {
    stationary(p, n, x, y, z, grad_w)
}

/// Points of the square control grid that lie in the disc.
pub fn control_grid(u_max: f64, points: usize) -> Vec<Complex64> {
    let step = control_spacing(u_max, points);
    let mut out = Vec::with_capacity(points * points);
    for j in 0..points {
        for i in 0..points {
            let u = Complex64::new(-u_max + i as f64 * step, -u_max + j as f64 * step);
            if u.norm() <= u_max * (1.0 + 1e-12) {
                out.push(u);
            }
        }
    }
    out
}

pub fn control_spacing(u_max: f64, points: usize) -> f64 {
    2.0 * u_max / (points - 1) as f64
}

/// The (up to) 3×3 grid points around the grid point nearest to `u`.
pub fn grid_neighbours(u: Complex64, u_max: f64, points: usize) -> impl Iterator<Item = Complex64> {
    let step = control_spacing(u_max, points);
    let last = (points - 1) as i64;
    let ci = ((u.re + u_max) / step).round() as i64;
    let cj = ((u.im + u_max) / step).round() as i64;
    (-1..=1).flat_map(move |dj| {
        (-1..=1).filter_map(move |di| {
            let (i, j) = (ci + di, cj + dj);
            if i < 0 || j < 0 || i > last || j > last {
                return None;
            }
            let v = Complex64::new(-u_max + i as f64 * step, -u_max + j as f64 * step);
            (v.norm() <= u_max * (1.0 + 1e-12)).then_some(v)
        })
    })
}
