//! Off-policy learning on adviser-mediated observations: replay, hindsight
//! relabelling, the soft actor-critic agent, and the train/evaluate loops.

mod buffer;
mod her;
mod sac;
mod train;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use her::{her_relabel, relabel};
pub use sac::{
    soft_targets, squashed_gaussian_grad, temperature_gradient, FrozenPolicy, Policy, SacAgent, SacConfig,
    UpdateReport, LOG_STD_MAX, LOG_STD_MIN,
};
pub use train::{
    evaluate, median, run_episode, train, EpisodeSummary, EpochLog, EvalMetrics, LinePdPolicy, Mediator,
    INTEGRAL_CLAMP_SCALE, TAIL_STEPS,
};
