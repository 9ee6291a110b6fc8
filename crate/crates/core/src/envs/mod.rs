//! Goal-conditioned simulators behind a single [`GoalEnv`] contract.
//!
//! Every environment clamps actions into its box, advances one `dt` with RK4,
//! and reports `terminated` (success or failure bound) separately from
//! `truncated` (step budget). Rewards come from [`GoalEnv::compute_reward`],
//! which is a pure function of its arguments so that hindsight relabeling can
//! recompute them.

mod line1d;
mod planar_arm;
mod point_mass;
mod quad_vel;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, AacError, Result};
use crate::goal::{GoalObservation, RealVector};
use crate::ode::rk4_step;

pub use line1d::{Line1d, Line1dParams};
pub use planar_arm::{PlanarArm, PlanarArmParams};
pub use point_mass::{PointMass, PointMassParams};
pub use quad_vel::{QuadVel, QuadVelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PointMass,
    PlanarArm,
    QuadVel,
    Line1d,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::PointMass,
        EnvKind::PlanarArm,
        EnvKind::QuadVel,
        EnvKind::Line1d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::PointMass => "point_mass",
            EnvKind::PlanarArm => "planar_arm",
            EnvKind::QuadVel => "quad_vel",
            EnvKind::Line1d => "line1d",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = AacError;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AacError::InvalidConfig {
                key: "env.name".into(),
                reason: format!("unknown environment `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvKind,
    pub max_steps: usize,
    pub point_mass: PointMassParams,
    pub planar_arm: PlanarArmParams,
    pub quad_vel: QuadVelParams,
    pub line1d: Line1dParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            name: EnvKind::PointMass,
            max_steps: 1000,
            point_mass: PointMassParams::default(),
            planar_arm: PlanarArmParams::default(),
            quad_vel: QuadVelParams::default(),
            line1d: Line1dParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn new(name: EnvKind) -> Self {
        Self {
            name,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(AacError::InvalidConfig {
                key: "env.max_steps".into(),
                reason: "must be at least 1".into(),
            });
        }
        let (key, dt) = match self.name {
            EnvKind::PointMass => ("env.point_mass.dt", self.point_mass.dt),
            EnvKind::PlanarArm => ("env.planar_arm.dt", self.planar_arm.dt),
            EnvKind::QuadVel => ("env.quad_vel.dt", self.quad_vel.dt),
            EnvKind::Line1d => ("env.line1d.dt", self.line1d.dt),
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(AacError::InvalidConfig {
                key: key.into(),
                reason: format!("must be finite and positive, got {dt}"),
            });
        }
        Ok(())
    }
}

pub fn make_env(config: &EnvConfig) -> Result<Box<dyn GoalEnv>> {
    config.validate()?;
    let steps = config.max_steps;
    Ok(match config.name {
        EnvKind::PointMass => Box::new(Simulator::new(PointMass::new(config.point_mass.clone()), steps)),
        EnvKind::PlanarArm => Box::new(Simulator::new(PlanarArm::new(config.planar_arm.clone()), steps)),
        EnvKind::QuadVel => Box::new(Simulator::new(QuadVel::new(config.quad_vel.clone()), steps)),
        EnvKind::Line1d => Box::new(Simulator::new(Line1d::new(config.line1d.clone()), steps)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStepResult {
    pub obs: GoalObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Termination was caused by reaching the goal (as opposed to a bound).
    pub success: bool,
}

pub trait GoalEnv: Send {
    fn kind(&self) -> EnvKind;
    fn obs_dim(&self) -> usize;
    fn goal_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_low(&self) -> &[f64];
    fn action_high(&self) -> &[f64];
    fn dt(&self) -> f64;
    fn max_steps(&self) -> usize;
    /// Half-width of the desired-goal box, used to size the adviser's clamp.
    fn goal_half_width(&self) -> f64;

    fn reset(&mut self, seed: u64) -> GoalObservation;
    fn step(&mut self, action: &[f64]) -> Result<EnvStepResult>;
    fn steps_taken(&self) -> usize;

    fn compute_reward(&self, achieved: &[f64], desired: &[f64], observation: &[f64], action: &[f64]) -> f64;
    fn is_success(&self, achieved: &[f64], desired: &[f64], observation: &[f64]) -> bool;
    fn is_failure(&self, observation: &[f64]) -> bool;

    fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low().iter().zip(self.action_high()))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }
}

/// Physics of one environment; [`Simulator`] supplies the shared episode logic.
pub(crate) trait Plant: Send {
    const KIND: EnvKind;
    const STATE_DIM: usize;
    const OBS_DIM: usize;
    const GOAL_DIM: usize;

    fn action_low(&self) -> &[f64];
    fn action_high(&self) -> &[f64];
    fn dt(&self) -> f64;
    fn goal_half_width(&self) -> f64;

    /// Initial state and desired goal.
    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>);
    /// Time derivative of the state under an already-clamped action.
    fn derivatives(&self, state: &[f64], action: &[f64], out: &mut [f64]);
    /// Observation and achieved goal for a state; `action` is the action in force.
    fn observe(&self, state: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>);

    fn reward(&self, achieved: &[f64], desired: &[f64], observation: &[f64], action: &[f64]) -> f64;
    fn success(&self, achieved: &[f64], desired: &[f64], observation: &[f64]) -> bool;
    fn failure(&self, observation: &[f64]) -> bool;
}

pub(crate) struct Simulator<P: Plant> {
    plant: P,
    max_steps: usize,
    state: Vec<f64>,
    goal: Vec<f64>,
    steps: usize,
}

impl<P: Plant> Simulator<P> {
    pub(crate) fn new(plant: P, max_steps: usize) -> Self {
        let mut sim = Self {
            plant,
            max_steps,
            state: Vec::new(),
            goal: Vec::new(),
            steps: 0,
        };
        sim.reset(0);
        sim
    }

    fn goal_observation(&self, action: &[f64]) -> GoalObservation {
        let (obs, achieved) = self.plant.observe(&self.state, action);
        GoalObservation {
            observation: RealVector::from_vec_unchecked(obs),
            desired_goal: RealVector::from_vec_unchecked(self.goal.clone()),
            achieved_goal: RealVector::from_vec_unchecked(achieved),
        }
    }

    #[cfg(test)]
    pub(crate) fn set_state(&mut self, state: Vec<f64>, goal: Vec<f64>) {
        self.state = state;
        self.goal = goal;
    }
}

impl<P: Plant> GoalEnv for Simulator<P> {
    fn kind(&self) -> EnvKind {
        P::KIND
    }

    fn obs_dim(&self) -> usize {
        P::OBS_DIM
    }

    fn goal_dim(&self) -> usize {
        P::GOAL_DIM
    }

    fn action_dim(&self) -> usize {
        self.plant.action_low().len()
    }

    fn action_low(&self) -> &[f64] {
        self.plant.action_low()
    }

    fn action_high(&self) -> &[f64] {
        self.plant.action_high()
    }

    fn dt(&self) -> f64 {
        self.plant.dt()
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }

    fn goal_half_width(&self) -> f64 {
        self.plant.goal_half_width()
    }

    fn reset(&mut self, seed: u64) -> GoalObservation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (state, goal) = self.plant.sample_initial(&mut rng);
        debug_assert_eq!(state.len(), P::STATE_DIM);
        self.state = state;
        self.goal = goal;
        self.steps = 0;
        let idle = vec![0.0; self.action_dim()];
        self.goal_observation(&idle)
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStepResult> {
        check_dim("action", self.action_dim(), action.len())?;
        check_finite("action", action)?;
        let action = self.clamp_action(action);
        let dt = self.plant.dt();
        let plant = &self.plant;
        rk4_step(&mut self.state, 0.0, dt, |_, s, ds| plant.derivatives(s, &action, ds));
        self.steps += 1;

        let obs = self.goal_observation(&action);
        let reward = self.compute_reward(&obs.achieved_goal, &obs.desired_goal, &obs.observation, &action);
        let success = self.plant.success(&obs.achieved_goal, &obs.desired_goal, &obs.observation);
        let failure = self.plant.failure(&obs.observation);
        if !obs.observation.iter().all(|v| v.is_finite()) {
            return Err(AacError::NonFinite("environment state"));
        }
        Ok(EnvStepResult {
            obs,
            reward,
            terminated: success || failure,
            truncated: self.steps >= self.max_steps,
            success,
        })
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn compute_reward(&self, achieved: &[f64], desired: &[f64], observation: &[f64], action: &[f64]) -> f64 {
        self.plant.reward(achieved, desired, observation, action)
    }

    fn is_success(&self, achieved: &[f64], desired: &[f64], observation: &[f64]) -> bool {
        self.plant.success(achieved, desired, observation)
    }

    fn is_failure(&self, observation: &[f64]) -> bool {
        self.plant.failure(observation)
    }
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    lo + (hi - lo) * rng.random::<f64>()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
