//! 3-DoF arm reaching task: a base yaw joint carries a two-link planar chain
//! mounted on a short vertical column. Joints are decoupled unit inertias
//! with viscous damping; actions are normalised torques.
//!
//! Observation: `[cos q, sin q, q̇]` (9). Achieved goal: end-effector position.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dist, uniform, EnvKind, Plant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarArmParams {
    pub dt: f64,
    pub inertia: f64,
    pub damping: f64,
    pub torque_scale: f64,
    pub column_height: f64,
    pub upper_link: f64,
    pub lower_link: f64,
    pub max_joint_velocity: f64,
    pub success_tolerance: f64,
}

impl Default for PlanarArmParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            inertia: 1.0,
            damping: 0.5,
            torque_scale: 5.0,
            column_height: 0.2,
            upper_link: 0.8,
            lower_link: 0.8,
            max_joint_velocity: 10.0,
            success_tolerance: 0.1,
        }
    }
}

pub struct PlanarArm {
    params: PlanarArmParams,
}

impl PlanarArm {
    pub fn new(params: PlanarArmParams) -> Self {
        Self { params }
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> [f64; 3] {
        let p = &self.params;
        let radial = p.upper_link * q[1].cos() + p.lower_link * (q[1] + q[2]).cos();
        let height = p.column_height + p.upper_link * q[1].sin() + p.lower_link * (q[1] + q[2]).sin();
        [radial * q[0].cos(), radial * q[0].sin(), height]
    }

    pub fn reach(&self) -> f64 {
        self.params.upper_link + self.params.lower_link
    }
}

const LOW: [f64; 3] = [-1.0; 3];
const HIGH: [f64; 3] = [1.0; 3];

impl Plant for PlanarArm {
    const KIND: EnvKind = EnvKind::PlanarArm;
    const STATE_DIM: usize = 6;
    const OBS_DIM: usize = 9;
    const GOAL_DIM: usize = 3;

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
        0.25
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let mut state = Vec::with_capacity(6);
        for _ in 0..3 {
            state.push(uniform(rng, -PI, PI));
        }
        for _ in 0..3 {
            state.push(uniform(rng, -0.005, 0.005));
        }
        let goal = vec![uniform(rng, 0.5, 1.0), uniform(rng, 0.5, 1.0), uniform(rng, 0.0, 0.3)];
        (state, goal)
    }

    fn derivatives(&self, s: &[f64], a: &[f64], ds: &mut [f64]) {
        let p = &self.params;
        for j in 0..3 {
            ds[j] = s[j + 3];
            ds[j + 3] = (p.torque_scale * a[j] - p.damping * s[j + 3]) / p.inertia;
        }
    }

    fn observe(&self, state: &[f64], _action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut obs = Vec::with_capacity(9);
        obs.extend(state[..3].iter().map(|q| q.cos()));
        obs.extend(state[..3].iter().map(|q| q.sin()));
        obs.extend_from_slice(&state[3..]);
        (obs, self.forward_kinematics(&state[..3]).to_vec())
    }

    fn reward(&self, achieved: &[f64], desired: &[f64], observation: &[f64], action: &[f64]) -> f64 {
        let velocity = observation[6..9].iter().map(|w| w * w).sum::<f64>().sqrt();
        let effort = action.iter().map(|a| a * a).sum::<f64>().sqrt();
        -dist(achieved, desired) - 0.1 * velocity - 0.1 * effort
    }

    fn success(&self, achieved: &[f64], desired: &[f64], _observation: &[f64]) -> bool {
        dist(achieved, desired) < self.params.success_tolerance
    }

    fn failure(&self, observation: &[f64]) -> bool {
        observation[6..9]
            .iter()
            .any(|w| w.abs() > self.params.max_joint_velocity)
    }
}
