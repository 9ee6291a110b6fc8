use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::buffer::{ReplayBuffer, Transition};
use super::her::her_relabel;
use super::sac::{Policy, SacAgent};
use crate::adviser::{AdviserGains, AdviserState};
use crate::envs::GoalEnv;
use crate::goal::{norm, unadvised_observation, ExtendedObservation, GoalObservation, RealVector};
use crate::Result;

/// Adviser integral clamp as a multiple of the environment's goal half-width.
pub const INTEGRAL_CLAMP_SCALE: f64 = 10.0;
/// Number of trailing steps averaged for the settled-error metric.
pub const TAIL_STEPS: usize = 50;

/// Builds the actor/critic input from raw observations, with or without an
/// adviser in the loop.
pub enum Mediator {
    Free,
    Advised(AdviserState),
}

impl Mediator {
    pub fn new(gains: Option<AdviserGains>, env: &dyn GoalEnv) -> Result<Self> {
        Ok(match gains {
            None => Mediator::Free,
            Some(g) => Mediator::Advised(AdviserState::new(
                g,
                env.goal_dim(),
                env.dt(),
                INTEGRAL_CLAMP_SCALE * env.goal_half_width(),
            )?),
        })
    }

    pub fn reset(&mut self) {
        if let Mediator::Advised(state) = self {
            *state = state.reset();
        }
    }

    pub fn observe(&mut self, obs: &GoalObservation) -> Result<ExtendedObservation> {
        match self {
            Mediator::Free => unadvised_observation(obs),
            Mediator::Advised(state) => {
                let (s_e, next) = state.advise(obs)?;
                *state = next;
                Ok(s_e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub ret: f64,
    pub final_goal_error: f64,
    /// Mean goal distance over the last [`TAIL_STEPS`] steps.
    pub tail_goal_error: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_return: f64,
    pub median_final_goal_error: f64,
    pub success_rate: f64,
    pub alpha: f64,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha_loss: f64,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub median_final_goal_error: f64,
    pub median_tail_goal_error: f64,
    pub mean_return: f64,
    /// Set when no episodes were run; the other fields are then NaN.
    pub empty: bool,
}

impl EvalMetrics {
    pub fn from_episodes(episodes: &[EpisodeSummary]) -> Self {
        if episodes.is_empty() {
            return Self {
                episodes: 0,
                success_rate: f64::NAN,
                median_final_goal_error: f64::NAN,
                median_tail_goal_error: f64::NAN,
                mean_return: f64::NAN,
                empty: true,
            };
        }
        let n = episodes.len() as f64;
        Self {
            episodes: episodes.len(),
            success_rate: episodes.iter().filter(|e| e.success).count() as f64 / n,
            median_final_goal_error: median(episodes.iter().map(|e| e.final_goal_error)),
            median_tail_goal_error: median(episodes.iter().map(|e| e.tail_goal_error)),
            mean_return: episodes.iter().map(|e| e.ret).sum::<f64>() / n,
            empty: false,
        }
    }
}

/// Median of a non-empty sequence (mean of the middle pair for even counts).
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn goal_distance(obs: &GoalObservation) -> f64 {
    let d: Vec<f64> = obs.desired_goal.iter().zip(obs.achieved_goal.iter()).map(|(a, b)| a - b).collect();
    norm(&d)
}

struct Tracker {
    steps: usize,
    ret: f64,
    errors: Vec<f64>,
    success: bool,
}

impl Tracker {
    fn new() -> Self {
        Self {
            steps: 0,
            ret: 0.0,
            errors: Vec::new(),
            success: false,
        }
    }

    fn record(&mut self, reward: f64, obs: &GoalObservation, success: bool) {
        self.steps += 1;
        self.ret += reward;
        self.errors.push(goal_distance(obs));
        self.success = success;
    }

    fn finish(self, initial: &GoalObservation) -> EpisodeSummary {
        let final_goal_error = self.errors.last().copied().unwrap_or_else(|| goal_distance(initial));
        let tail = &self.errors[self.errors.len().saturating_sub(TAIL_STEPS)..];
        let tail_goal_error = if tail.is_empty() {
            final_goal_error
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        EpisodeSummary {
            steps: self.steps,
            ret: self.ret,
            final_goal_error,
            tail_goal_error,
            success: self.success,
        }
    }
}

fn random_action(env: &dyn GoalEnv, rng: &mut ChaCha8Rng) -> Vec<f64> {
    env.action_low()
        .iter()
        .zip(env.action_high())
        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

/// Collect `epochs × episodes_per_epoch` episodes with the adviser (if any)
/// mediating observations, performing one update per environment step once
/// the buffer holds `min_fill` transitions. Until then actions are uniform in
/// the action box.
pub fn train(
    agent: &mut SacAgent,
    env: &mut dyn GoalEnv,
    gains: Option<AdviserGains>,
    epochs: usize,
) -> Result<Vec<EpochLog>> {
    let config = agent.config().clone();
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut mediator = Mediator::new(gains, env)?;
    let mut episode_id = 0u64;
    let mut log = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let mut summaries = Vec::with_capacity(config.episodes_per_epoch);
        let (mut cl, mut pl, mut al, mut updates) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..config.episodes_per_epoch {
            let seed: u64 = agent.rng().random();
            let mut obs = env.reset(seed);
            let initial = obs.clone();
            mediator.reset();
            let mut s_e = mediator.observe(&obs)?;
            let mut tracker = Tracker::new();
            let mut episode: Vec<Transition> = Vec::new();
            loop {
                let raw = if buffer.len() < config.min_fill {
                    random_action(env, agent.rng())
                } else {
                    agent.sample_action(&s_e, false)?
                };
                let action = env.clamp_action(&raw);
                let r = env.step(&action)?;
                let s_e_next = mediator.observe(&r.obs)?;
                tracker.record(r.reward, &r.obs, r.success);
                let t = Transition {
                    s_e: s_e.clone(),
                    action: RealVector::new(action)?,
                    reward: r.reward,
                    s_e_next: s_e_next.clone(),
                    terminated: r.terminated,
                    episode: episode_id,
                    step: episode.len() as u32,
                    obs,
                    next_obs: r.obs.clone(),
                };
                if config.her {
                    episode.push(t);
                } else {
                    buffer.push(t);
                }
                let rep = agent.update(&buffer)?;
                if rep.performed {
                    cl += rep.critic_loss;
                    pl += rep.policy_loss;
                    al += rep.alpha_loss;
                    updates += 1;
                }
                obs = r.obs;
                s_e = s_e_next;
                if r.terminated || r.truncated {
                    break;
                }
            }
            if config.her {
                let k = config.her_k;
                for t in her_relabel(&*env, &episode, k, agent.rng())? {
                    buffer.push(t);
                }
            }
            summaries.push(tracker.finish(&initial));
            episode_id += 1;
        }
        let m = EvalMetrics::from_episodes(&summaries);
        let per = |x: f64| if updates > 0 { x / updates as f64 } else { 0.0 };
        log.push(EpochLog {
            epoch,
            mean_return: m.mean_return,
            median_final_goal_error: m.median_final_goal_error,
            success_rate: m.success_rate,
            alpha: agent.alpha(),
            critic_loss: per(cl),
            policy_loss: per(pl),
            alpha_loss: per(al),
            updates,
        });
    }
    Ok(log)
}

/// Roll out one episode with `policy` acting on mediated observations.
pub fn run_episode(
    policy: &mut dyn Policy,
    env: &mut dyn GoalEnv,
    mediator: &mut Mediator,
    seed: u64,
    deterministic: bool,
) -> Result<EpisodeSummary> {
    let mut obs = env.reset(seed);
    let initial = obs.clone();
    mediator.reset();
    let mut tracker = Tracker::new();
    loop {
        let s_e = mediator.observe(&obs)?;
        let action = policy.act(&s_e, deterministic)?;
        let r = env.step(&action)?;
        tracker.record(r.reward, &r.obs, r.success);
        obs = r.obs;
        if r.terminated || r.truncated {
            break;
        }
    }
    Ok(tracker.finish(&initial))
}

/// Deterministic rollouts through the evaluation adviser. Episode seeds are
/// drawn from `seed`, independently of any training stream.
pub fn evaluate(
    policy: &mut dyn Policy,
    env: &mut dyn GoalEnv,
    gains: Option<AdviserGains>,
    episodes: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    let mut mediator = Mediator::new(gains, env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summaries = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let s: u64 = rng.random();
        summaries.push(run_episode(policy, env, &mut mediator, s, true)?);
    }
    Ok(EvalMetrics::from_episodes(&summaries))
}

/// Hand-written proportional-derivative controller for the 1-D line task,
/// acting on the third slot (`-e` unadvised): `a = -k·slot - c·v`.
#[derive(Debug, Clone, Copy)]
pub struct LinePdPolicy {
    pub k: f64,
    pub c: f64,
}

impl Policy for LinePdPolicy {
    fn act(&mut self, s_e: &[f64], _deterministic: bool) -> Result<Vec<f64>> {
        crate::error::check_dim("extended observation", 4, s_e.len())?;
        Ok(vec![-self.k * s_e[3] - self.c * s_e[1]])
    }
}
