//! Dynamics of the normalized Bloch vector `r̄ = (x, y, z)/n`.
//!
//! Under the measure in which `dw̃ = dy − √η κ_s x̄ dt` is a Wiener process the
//! normalized coordinates of the (risk-sensitive) filter solve
//!
//! ```text
//! dx̄ = (−½x̄ + ½μa z̄x̄ + 2κ_f u_r z̄) dt              + g(1 + z̄ − x̄²) dw̃
//! dȳ = (−½ȳ + ½μa z̄ȳ − 2κ_f u_i z̄) dt              − g x̄ȳ dw̃
//! dz̄ = (−(1+z̄) − ½μa(1−z̄²) − 2κ_f(u_r x̄ − u_i ȳ)) dt − g x̄(1+z̄) dw̃
//! ```
//!
//! with `g = √η κ_s`, while the mass grows as `dn = n(½μa(1−z̄)dt + g x̄ dy)`.

use num_complex::Complex64;

use crate::model::TwoLevelParams;

/// Drift at `u = 0`.
pub fn drift0(p: &TwoLevelParams, mu: f64, r: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = r;
    let ma = mu * p.a;
    [
        -0.5 * x + 0.5 * ma * z * x,
        -0.5 * y + 0.5 * ma * z * y,
        -(1.0 + z) - 0.5 * ma * (1.0 - z * z),
    ]
}

/// Derivatives of the drift with respect to `u_r` and `u_i`.
pub fn drift_control(p: &TwoLevelParams, r: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let [x, y, z] = r;
    let k = 2.0 * p.kappa_f;
    ([k * z, 0.0, -k * x], [0.0, -k * z, k * y])
}

pub fn drift(p: &TwoLevelParams, mu: f64, r: [f64; 3], u: Complex64) -> [f64; 3] {
    let b0 = drift0(p, mu, r);
    let (br, bi) = drift_control(p, r);
    std::array::from_fn(|i| b0[i] + u.re * br[i] + u.im * bi[i])
}

pub fn diffusion(p: &TwoLevelParams, r: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = r;
    let g = p.eta.sqrt() * p.kappa_s;
    [g * (1.0 + z - x * x), -g * x * y, -g * x * (1.0 + z)]
}

/// Rate of `log n` apart from the martingale part: `½μa(1 − z̄)`.
pub fn mass_rate(p: &TwoLevelParams, mu: f64, r: [f64; 3]) -> f64 {
    0.5 * mu * p.a * (1.0 - r[2])
}

/// Radial projection into the closed unit ball.
pub fn project(r: [f64; 3]) -> [f64; 3] {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if norm > 1.0 {
        r.map(|v| v / norm)
    } else {
        r
    }
}
