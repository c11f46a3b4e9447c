use std::sync::Arc;

use num_complex::Complex64;

use crate::dynprog::Policy;
use crate::error::Result;
use crate::filters::{bloch_rn_step, bloch_rs_step, BlochState, FilterKind};
use crate::model::TwoLevelParams;

/// Feedback law applied to the controller's normalized filter estimate.
#[derive(Clone, Debug)]
pub enum ControlLaw {
    Zero,
    Constant(Complex64),
    Policy(Arc<Policy>),
}

impl ControlLaw {
    pub fn eval(&self, t: f64, r: [f64; 3]) -> Complex64 {
        match self {
            ControlLaw::Zero => Complex64::new(0.0, 0.0),
            ControlLaw::Constant(u) => *u,
            ControlLaw::Policy(p) => p.control(t, r),
        }
    }
}

/// A causal controller: an unnormalized Bloch filter fed with record
/// increments in time order, and a law applied to its normalized estimate.
///
/// Call [`control`](Self::control) for the current step, then
/// [`observe`](Self::observe) with that control and the step's increment.
#[derive(Clone, Debug)]
pub struct ControllerHandle {
    law: ControlLaw,
    kind: FilterKind,
    params: TwoLevelParams,
    state: BlochState,
    step: usize,
}

impl ControllerHandle {
    /// `params` are the filter's model (its μ for the risk-sensitive kind);
    /// `initial` is the normalized Bloch vector the filter starts from.
    pub fn new(law: ControlLaw, kind: FilterKind, params: TwoLevelParams, initial: [f64; 3]) -> Self {
        ControllerHandle {
            law,
            kind,
            params,
            state: BlochState::from_vector(initial),
            step: 0,
        }
    }

    /// The optimal controller for a synthesized policy: its own model and a
    /// filter of the matching kind.
    pub fn from_policy(policy: Arc<Policy>, initial: [f64; 3]) -> Self {
        let kind = match policy.mode {
            crate::dynprog::Mode::RiskSensitive => FilterKind::RiskSensitive,
            crate::dynprog::Mode::RiskNeutral => FilterKind::Standard,
        };
        let params = policy.params;
        ControllerHandle::new(ControlLaw::Policy(policy), kind, params, initial)
    }

    /// Copy whose filter uses the time grid and detection efficiency of the
    /// simulation it is plugged into.
    pub fn aligned_with(&self, sim: &TwoLevelParams) -> Self {
        let mut c = self.clone();
        c.params.dt = sim.dt;
        c.params.t_final = sim.t_final;
        c.params.eta = sim.eta;
        c
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }

    pub fn state(&self) -> &BlochState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    /// Control for the current step from the record observed so far.
    pub fn control(&self) -> Complex64 {
        self.law.eval(self.time(), self.state.vector())
    }

    /// Advances the filter over one step with the applied control `u` and
    /// record increment `dy`.
    pub fn observe(&mut self, u: Complex64, dy: f64) -> Result<()> {
        self.state = match self.kind {
            FilterKind::RiskSensitive => bloch_rs_step(&self.params, &self.state, u, dy)?,
            FilterKind::Standard => bloch_rn_step(&self.params, &self.state, u, dy)?,
        };
        self.step += 1;
        Ok(())
    }
}
