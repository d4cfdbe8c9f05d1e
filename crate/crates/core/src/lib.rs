//! Simulation and learning core for a liquid-crystal RIS assisted mmWave
//! downlink: channel model, LC phase-transition timing, user mobility,
//! the decision-process environment, a DDPG controller, reference
//! controllers and an experiment harness.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod agent;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod lc_dynamics;
pub mod scene;

pub use error::{Error, Result};
