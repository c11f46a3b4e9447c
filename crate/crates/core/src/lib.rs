//! Risk-sensitive optimal feedback control of continuously monitored open
//! quantum systems.

pub mod cli;
pub mod dynprog;
pub mod error;
pub mod filters;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod operator;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{two_level_model, ModelSpec, TwoLevelParams};
pub use operator::{Operator, StateMatrix};
