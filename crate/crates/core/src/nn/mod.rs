//! Dense networks with hand-written reverse-mode gradients, Adam and a binary
//! checkpoint format.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::{adam_step, OptimizerState, ScalarAdam};
pub use mlp::{topology, Activation, Dense, ForwardCache, MlpGradients, MlpParameters};
