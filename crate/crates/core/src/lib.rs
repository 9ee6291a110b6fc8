//! PID-advised goal-conditioned actor-critic control workbench.
//!
//! A PID adviser rewrites the error slot of the actor's observation with a
//! synthetic error so that a learned policy with residual steady-state error
//! is steered onto the true goal. The crate bundles the adviser, three
//! goal-conditioned simulators plus a 1-D oracle environment, a from-scratch
//! SAC/HER stack, and the stability and contraction analysis used to pick
//! adviser gains.

pub mod adviser;
pub mod cli;
pub mod config;
pub mod envs;
pub mod error;
pub mod goal;
pub mod nn;
pub mod ode;
pub mod report;
pub mod rl;
pub mod stability;

pub use error::{AacError, Result};
