//! Unit point mass on a line pushed by a force action with a constant
//! actuator bias. Under a proportional policy `a = k·e - c·v` the rest point
//! satisfies `k·e + bias = 0`, so the residual error is exactly `-bias / k`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform, EnvKind, Plant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Line1dParams {
    pub dt: f64,
    pub force_scale: f64,
    pub damping: f64,
    pub action_bias: f64,
    pub position_bound: f64,
    pub success_tolerance: f64,
}

impl Default for Line1dParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            force_scale: 1.0,
            damping: 1.0,
            action_bias: 0.0,
            position_bound: 5.0,
            success_tolerance: 0.01,
        }
    }
}

pub struct Line1d {
    params: Line1dParams,
}

impl Line1d {
    pub fn new(params: Line1dParams) -> Self {
        Self { params }
    }
}

const LOW: [f64; 1] = [-1.0];
const HIGH: [f64; 1] = [1.0];

impl Plant for Line1d {
    const KIND: EnvKind = EnvKind::Line1d;
    const STATE_DIM: usize = 2;
    const OBS_DIM: usize = 2;
    const GOAL_DIM: usize = 1;

    fn action_low(&self) -> &[f64] {
        &LOW
    }

    fn action_high(&self) -> &[f64] {
        &HIGH
    }

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn goal_half_width(&self) -> f64 {
        1.0
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let x = uniform(rng, -1.0, 1.0);
        let goal = uniform(rng, -1.0, 1.0);
        (vec![x, 0.0], vec![goal])
    }

    fn derivatives(&self, s: &[f64], a: &[f64], ds: &mut [f64]) {
        let p = &self.params;
        ds[0] = s[1];
        ds[1] = p.force_scale * (a[0] + p.action_bias) - p.damping * s[1];
    }

    fn observe(&self, state: &[f64], _action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (state.to_vec(), vec![state[0]])
    }

    fn reward(&self, achieved: &[f64], desired: &[f64], _observation: &[f64], action: &[f64]) -> f64 {
        -(achieved[0] - desired[0]).abs() - 0.1 * action[0].abs()
    }

    fn success(&self, achieved: &[f64], desired: &[f64], observation: &[f64]) -> bool {
        let tol = self.params.success_tolerance;
        (achieved[0] - desired[0]).abs() < tol && observation[1].abs() < tol
    }

    fn failure(&self, observation: &[f64]) -> bool {
        observation[0].abs() > self.params.position_bound
    }
}
