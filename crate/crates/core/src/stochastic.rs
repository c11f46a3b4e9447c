//! Reproducible noise streams, Wiener increments and the Euler–Maruyama
//! stepping contract shared by every SDE in the crate.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::Operator;

/// A Gaussian stream fully determined by `(master_seed, stream_index)`.
///
/// Streams are ChaCha12 keyed by the master seed, with the stream index
/// selecting the ChaCha stream. Distinct indices therefore never overlap and
/// can be consumed on different threads in any order.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    master_seed: u64,
    stream_index: u64,
    position: u64,
    rng: ChaCha12Rng,
}

impl NoiseStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        NoiseStream {
            master_seed,
            stream_index,
            position: 0,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Number of draws taken so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// A standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.position += 1;
        StandardNormal.sample(&mut self.rng)
    }

    /// A Wiener increment `N(0, dt)`.
    pub fn wiener_increment(&mut self, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        dt.sqrt() * self.standard_normal()
    }
}

/// State types the Euler–Maruyama step can advance.
pub trait EmState: Sized {
    /// `self + a·x`
    fn axpy(&self, a: f64, x: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

impl EmState for f64 {
    fn axpy(&self, a: f64, x: &f64) -> f64 {
        self + a * x
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl<const N: usize> EmState for [f64; N] {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        let mut out = *self;
        for (o, v) in out.iter_mut().zip(x) {
            *o += a * v;
        }
        out
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl EmState for Operator {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        *self + x.scale(a)
    }
    fn is_finite(&self) -> bool {
        Operator::is_finite(self)
    }
}

/// One Euler–Maruyama step `X + f(X)·dt + g(X)·dW` for a scalar noise.
///
/// `step` is only used to label a non-finite result.
pub fn em_step<S, F, G>(state: &S, drift: F, diffusion: G, dw: f64, dt: f64, step: usize) -> Result<S>
where
    S: EmState,
    F: FnOnce(&S) -> S,
    G: FnOnce(&S) -> S,
{
    let f = drift(state);
    let g = diffusion(state);
    let next = state.axpy(dt, &f).axpy(dw, &g);
    if !next.is_finite() {
        return Err(Error::NonFinite { step });
    }
    Ok(next)
}

/// One simulated closed-loop path.
///
/// State series have `n_steps + 1` entries, increment/control series
/// `n_steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub master_seed: u64,
    pub stream_index: u64,
    pub times: Vec<f64>,
    /// Measured record increments `dy₂`.
    pub y_increments: Vec<f64>,
    /// Bloch vector `(x, y, z)` of the normalized conditional state.
    pub truth: Vec<[f64; 3]>,
    /// Controller filter state `(n, x, y, z, log_factor)`.
    pub filter: Vec<[f64; 5]>,
    pub controls: Vec<Complex64>,
    /// Running `∫⟨π_t, C1(u)⟩dt` along the truth path.
    pub running_cost: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.y_increments.len()
    }

    /// Checks the length invariant of the series.
    pub fn is_consistent(&self) -> bool {
        let n = self.n_steps();
        self.times.len() == n + 1
            && self.truth.len() == n + 1
            && self.filter.len() == n + 1
            && self.running_cost.len() == n + 1
            && self.controls.len() == n
    }
}
