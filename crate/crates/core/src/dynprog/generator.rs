//! Monte Carlo check of the generator of the risk-sensitive filter on
//! cylindrical test functions `f(σ) = g(⟨σ, X_1⟩, …, ⟨σ, X_m⟩)`.
//!
//! The analytic value is
//!
//! ```text
//! ℒf(σ) = Σ_j ∂_j g ⟨X_j, −K^μσ − σK^{μ†} + LσL† + MσM†⟩
//!       + ½η Σ_jk ∂_jk g ⟨X_j, Mσ + σM†⟩⟨X_k, Mσ + σM†⟩
//! ```

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::filters::{rs_drift, rs_filter_eta_step};
use crate::model::ModelSpec;
use crate::operator::{h_tilde_apply, Operator, StateMatrix};
use crate::stochastic::NoiseStream;

type Scalar<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
type Vector<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);
type Matrix<'a> = &'a (dyn Fn(&[f64]) -> Vec<Vec<f64>> + Sync);

/// `g` with its first and second derivatives, applied to `⟨σ, X_j⟩`.
pub struct Cylindrical<'a> {
    pub observables: Vec<Operator>,
    pub g: Scalar<'a>,
    pub gradient: Vector<'a>,
    pub hessian: Matrix<'a>,
}

impl Cylindrical<'_> {
    fn arguments(&self, sigma: &Operator) -> Vec<f64> {
        self.observables.iter().map(|x| pair(x, sigma)).collect()
    }

    pub fn eval(&self, sigma: &Operator) -> f64 {
        (self.g)(&self.arguments(sigma))
    }
}

fn pair(x: &Operator, sigma: &Operator) -> f64 {
    (*x * *sigma).trace().re
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
}

/// Analytic generator value at `σ` under control `u`.
pub fn generator_analytic(spec: &ModelSpec, f: &Cylindrical, sigma: &Operator, u: Complex64) -> Result<f64> {
    let args = f.arguments(sigma);
    let grad = (f.gradient)(&args);
    let hess = (f.hessian)(&args);
    let drift = rs_drift(spec, sigma, u)?;
    let noise = h_tilde_apply(spec.m(), sigma)?;
    let d: Vec<f64> = f.observables.iter().map(|x| pair(x, &drift)).collect();
    let s: Vec<f64> = f.observables.iter().map(|x| pair(x, &noise)).collect();
    let mut value = 0.0;
    for j in 0..d.len() {
        value += grad[j] * d[j];
        for k in 0..d.len() {
            value += 0.5 * spec.eta() * hess[j][k] * s[j] * s[k];
        }
    }
    Ok(value)
}

/// Estimates `(E⁰[f(σ^μ_h)] − f(σ))/h` from `n_paths` antithetic pairs of
/// reference-measure paths (steps of `spec.dt()`), alongside the analytic
/// value.
pub fn generator_oracle(
    spec: &ModelSpec,
    f: &Cylindrical,
    sigma: &StateMatrix,
    u: Complex64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<GeneratorEstimate> {
    let substeps = (h / spec.dt()).round().max(1.0) as usize;
    let step_spec = spec.with_time_grid(h, h / substeps as f64)?;
    let f0 = f.eval(sigma.op());
    let run = |index: usize| -> Result<f64> {
        let mut stream = NoiseStream::new(seed, index as u64);
        let dys: Vec<f64> = (0..substeps)
            .map(|_| stream.wiener_increment(step_spec.dt()))
            .collect();
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let mut s = *sigma;
            for dy in &dys {
                s = rs_filter_eta_step(&step_spec, &s, u, sign * dy)?;
            }
            total += 0.5 * f.eval(s.op());
        }
        Ok((total - f0) / h)
    };
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(run)
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(GeneratorEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
        analytic: generator_analytic(spec, f, sigma.op(), u)?,
    })
}
