//! Closed-form filters for the two-level atom in Bloch coordinates.
//!
//! A 2×2 Hermitian σ is written `σ = ½·e^ℓ·(n I + x σ_x + y σ_y + z σ_z)`,
//! where `ℓ` (`log_factor`) carries the exactly integrated effort term of the
//! risk-sensitive filter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoLevelParams;
use crate::operator::{Operator, StateMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub n: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub log_factor: f64,
}

impl BlochState {
    pub fn new(n: f64, x: f64, y: f64, z: f64) -> Self {
        BlochState {
            n,
            x,
            y,
            z,
            log_factor: 0.0,
        }
    }

    /// Normalized state with Bloch vector `r`.
    pub fn from_vector(r: [f64; 3]) -> Self {
        BlochState::new(1.0, r[0], r[1], r[2])
    }

    /// Excited state |↑⟩.
    pub fn up() -> Self {
        BlochState::new(1.0, 0.0, 0.0, 1.0)
    }

    /// Ground state |↓⟩.
    pub fn down() -> Self {
        BlochState::new(1.0, 0.0, 0.0, -1.0)
    }

    pub fn from_operator(op: &Operator) -> Result<Self> {
        if op.dim() != 2 {
            return Err(Error::DimensionMismatch {
                left: op.dim(),
                right: 2,
            });
        }
        let d = op.get(0, 0).re;
        let e = op.get(1, 1).re;
        let off = op.get(1, 0);
        Ok(BlochState::new(d + e, 2.0 * off.re, 2.0 * off.im, d - e))
    }

    pub fn from_state(s: &StateMatrix) -> Result<Self> {
        BlochState::from_operator(s.op())
    }

    /// The matrix `σ` including the factor `e^ℓ`.
    pub fn reconstruct(&self) -> Operator {
        let f = 0.5 * self.log_factor.exp();
        let mut op = Operator::zeros(2);
        op.set(0, 0, Complex64::new(f * (self.n + self.z), 0.0));
        op.set(1, 1, Complex64::new(f * (self.n - self.z), 0.0));
        op.set(0, 1, Complex64::new(f * self.x, -f * self.y));
        op.set(1, 0, Complex64::new(f * self.x, f * self.y));
        op
    }

    /// Trace including the factor `e^ℓ`.
    pub fn trace(&self) -> f64 {
        self.n * self.log_factor.exp()
    }

    /// Bloch vector of the normalized state.
    pub fn vector(&self) -> [f64; 3] {
        [self.x / self.n, self.y / self.n, self.z / self.n]
    }

    /// `[n, x, y, z, log_factor]`
    pub fn to_array(&self) -> [f64; 5] {
        [self.n, self.x, self.y, self.z, self.log_factor]
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Same tolerance as the matrix filters: `1e-6 + 50·dt·κ_s²`.
fn guard(p: &TwoLevelParams, s: BlochState) -> Result<BlochState> {
    if !s.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let tol = 1e-6 + 50.0 * p.dt * p.kappa_s * p.kappa_s;
    let r = (s.x * s.x + s.y * s.y + s.z * s.z).sqrt();
    let lam = 0.5 * (s.n - r);
    if !(s.n > 0.0) || lam < -tol * s.n {
        return Err(Error::Positivity {
            step: 0,
            min_eig: lam,
            tol: tol * s.n.abs(),
        });
    }
    Ok(s)
}

/// One Euler–Maruyama step of the risk-sensitive filter in Bloch form,
/// driven by the record increment `dy` (detected with gain `√η`).
pub fn bloch_rs_step(p: &TwoLevelParams, s: &BlochState, u: Complex64, dy: f64) -> Result<BlochState> {
    let dt = p.dt;
    let g = p.eta.sqrt();
    let ma = p.mu * p.a;
    let (ur, ui) = (u.re, u.im);
    let (n, x, y, z) = (s.n, s.x, s.y, s.z);
    let ks = g * p.kappa_s;
    let kf2 = 2.0 * p.kappa_f;

    let dn = 0.5 * ma * (n - z) * dt + ks * x * dy;
    let dx = -0.5 * (1.0 - ma) * x * dt + kf2 * ur * z * dt + ks * (n + z) * dy;
    let dyy = -0.5 * (1.0 - ma) * y * dt - kf2 * ui * z * dt;
    let dz = -(1.0 - 0.5 * ma) * z * dt - (1.0 + 0.5 * ma) * n * dt - kf2 * (ur * x - ui * y) * dt
        - ks * x * dy;

    guard(
        p,
        BlochState {
            n: n + dn,
            x: x + dx,
            y: y + dyy,
            z: z + dz,
            log_factor: s.log_factor + 0.5 * p.mu * p.b * u.norm_sqr() * dt,
        },
    )
}

/// One Euler–Maruyama step of the standard (risk-neutral) unnormalized
/// filter in Bloch form.
pub fn bloch_rn_step(p: &TwoLevelParams, s: &BlochState, u: Complex64, dy: f64) -> Result<BlochState> {
    let dt = p.dt;
    let ks = p.eta.sqrt() * p.kappa_s;
    let kf2 = 2.0 * p.kappa_f;
    let (n, x, y, z) = (s.n, s.x, s.y, s.z);

    let n1 = n + ks * x * dy;
    let x1 = x + (-0.5 * x * dt + kf2 * u.re * z * dt + ks * (n + z) * dy);
    let y1 = y + (-0.5 * y * dt - kf2 * u.im * z * dt);
    let z1 = z + (-z * dt - n * dt - kf2 * (u.re * x - u.im * y) * dt - ks * x * dy);

    guard(
        p,
        BlochState {
            n: n1,
            x: x1,
            y: y1,
            z: z1,
            log_factor: s.log_factor,
        },
    )
}

/// Which conditional state a Bloch filter tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// The risk-sensitive state π^μ.
    RiskSensitive,
    /// The standard conditional state π.
    Standard,
}

/// Normalized filter step driven by the innovation `dw`.
///
/// The record increment `dy = √η·κ_s·x̄·dt + dw` is reconstructed from the
/// current estimate, the unnormalized step is taken and the result is
/// renormalized (`n = 1`, `log_factor = 0`). Returns the new state and `dy`.
pub fn bloch_normalized_step(
    p: &TwoLevelParams,
    s: &BlochState,
    u: Complex64,
    dw: f64,
    kind: FilterKind,
) -> Result<(BlochState, f64)> {
    let [x, y, z] = s.vector();
    let unit = BlochState::new(1.0, x, y, z);
    let dy = p.eta.sqrt() * p.kappa_s * x * p.dt + dw;
    let next = match kind {
        FilterKind::RiskSensitive => bloch_rs_step(p, &unit, u, dy)?,
        FilterKind::Standard => bloch_rn_step(p, &unit, u, dy)?,
    };
    let r = next.vector();
    Ok((BlochState::from_vector(r), dy))
}
