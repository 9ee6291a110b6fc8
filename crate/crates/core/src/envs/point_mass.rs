//! 2-D mass-spring-damper position control.
//!
//! State `[x, y, vx, vy]`; the goal is `[x*, y*, 0, 0]` so the achieved goal
//! is the full state. The spring pulls toward the origin, so holding an
//! off-centre goal needs a constant force.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dist, uniform, EnvKind, Plant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassParams {
    pub dt: f64,
    pub mass: f64,
    pub spring: f64,
    pub damping: f64,
    pub force_scale: f64,
    pub position_bound: f64,
    pub success_tolerance: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            mass: 1.0,
            spring: 0.5,
            damping: 0.1,
            force_scale: 10.0,
            position_bound: 4.8,
            success_tolerance: 0.01,
        }
    }
}

pub struct PointMass {
    params: PointMassParams,
}

impl PointMass {
    pub fn new(params: PointMassParams) -> Self {
        Self { params }
    }
}

const LOW: [f64; 2] = [-1.0, -1.0];
const HIGH: [f64; 2] = [1.0, 1.0];

impl Plant for PointMass {
    const KIND: EnvKind = EnvKind::PointMass;
    const STATE_DIM: usize = 4;
    const OBS_DIM: usize = 4;
    const GOAL_DIM: usize = 4;

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
        2.4
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let state = vec![
            uniform(rng, -2.4, 2.4),
            uniform(rng, -2.4, 2.4),
            uniform(rng, -0.1, 0.1),
            uniform(rng, -0.1, 0.1),
        ];
        let goal = vec![uniform(rng, -2.4, 2.4), uniform(rng, -2.4, 2.4), 0.0, 0.0];
        (state, goal)
    }

    fn derivatives(&self, s: &[f64], a: &[f64], ds: &mut [f64]) {
        let p = &self.params;
        for axis in 0..2 {
            let force = p.force_scale * a[axis] - p.spring * s[axis] - p.damping * s[axis + 2];
            ds[axis] = s[axis + 2];
            ds[axis + 2] = force / p.mass;
        }
    }

    fn observe(&self, state: &[f64], _action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (state.to_vec(), state.to_vec())
    }

    fn reward(&self, achieved: &[f64], desired: &[f64], _observation: &[f64], action: &[f64]) -> f64 {
        let pos = dist(&achieved[..2], &desired[..2]);
        let vel = dist(&achieved[2..], &desired[2..]);
        let effort = action.iter().map(|a| a * a).sum::<f64>().sqrt();
        -(pos * pos) - 0.5 * vel * vel - 0.1 * effort
    }

    fn success(&self, achieved: &[f64], desired: &[f64], _observation: &[f64]) -> bool {
        let tol = self.params.success_tolerance;
        dist(&achieved[..2], &desired[..2]) < tol && dist(&achieved[2..], &desired[2..]) < tol
    }

    fn failure(&self, observation: &[f64]) -> bool {
        let b = self.params.position_bound;
        observation[0].abs() > b || observation[1].abs() > b
    }
}
