//! Conditional-state filters.

pub mod bloch;
pub mod matrix;

pub use bloch::{bloch_normalized_step, bloch_rn_step, bloch_rs_step, BlochState, FilterKind};
pub use matrix::{
    belavkin_step, belavkin_unnormalized_step, normalized_innovation_euler_step,
    positivity_tolerance, rs_drift, rs_drift_superop, rs_filter_eta_step,
    rs_filter_normalized_step, rs_filter_step, NormalizedStep,
};
