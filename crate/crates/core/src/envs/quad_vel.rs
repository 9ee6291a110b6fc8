//! Quadcopter velocity tracking with an idealised inner loop.
//!
//! The action is `[vz setpoint, roll, pitch, yaw setpoints]`. Attitude follows
//! its setpoint as a first-order lag; horizontal acceleration is the
//! small-angle thrust tilt `g·tan(attitude)` rotated by yaw, minus linear drag;
//! vertical velocity tracks its setpoint as a first-order lag.
//!
//! State `[v(3), roll, pitch, yaw]`; observation
//! `[v(3), acceleration(3), angular rates(3), attitude(3)]`.

use std::f64::consts::FRAC_PI_2;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dist, uniform, EnvKind, Plant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadVelParams {
    pub dt: f64,
    pub gravity: f64,
    pub attitude_time_constant: f64,
    pub vertical_time_constant: f64,
    pub drag: f64,
    pub max_speed: f64,
    pub max_attitude: f64,
    pub initial_attitude: f64,
    pub success_tolerance: f64,
}

impl Default for QuadVelParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            gravity: 9.81,
            attitude_time_constant: 0.15,
            vertical_time_constant: 0.3,
            drag: 0.1,
            max_speed: 4.0,
            max_attitude: FRAC_PI_2,
            initial_attitude: 0.05,
            success_tolerance: 0.05,
        }
    }
}

pub struct QuadVel {
    params: QuadVelParams,
}

impl QuadVel {
    pub fn new(params: QuadVelParams) -> Self {
        Self { params }
    }
}

const LOW: [f64; 4] = [-2.0, -0.2, -0.2, -0.2];
const HIGH: [f64; 4] = [2.0, 0.2, 0.2, 0.2];

impl Plant for QuadVel {
    const KIND: EnvKind = EnvKind::QuadVel;
    const STATE_DIM: usize = 6;
    const OBS_DIM: usize = 12;
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
        1.0
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let att = self.params.initial_attitude;
        let state = vec![
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
            uniform(rng, -1.0, 1.0),
            uniform(rng, -att, att),
            uniform(rng, -att, att),
            uniform(rng, -att, att),
        ];
        let goal = (0..3).map(|_| uniform(rng, -1.0, 1.0)).collect();
        (state, goal)
    }

    fn derivatives(&self, s: &[f64], a: &[f64], ds: &mut [f64]) {
        let p = &self.params;
        let (roll, pitch, yaw) = (s[3], s[4], s[5]);
        let (tr, tp) = (roll.tan(), pitch.tan());
        let (sy, cy) = yaw.sin_cos();
        ds[0] = p.gravity * (tp * cy + tr * sy) - p.drag * s[0];
        ds[1] = p.gravity * (tp * sy - tr * cy) - p.drag * s[1];
        ds[2] = (a[0] - s[2]) / p.vertical_time_constant;
        for k in 0..3 {
            ds[3 + k] = (a[1 + k] - s[3 + k]) / p.attitude_time_constant;
        }
    }

    fn observe(&self, state: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ds = [0.0; 6];
        self.derivatives(state, action, &mut ds);
        let mut obs = Vec::with_capacity(12);
        obs.extend_from_slice(&state[..3]);
        obs.extend_from_slice(&ds[..3]);
        obs.extend_from_slice(&ds[3..]);
        obs.extend_from_slice(&state[3..]);
        (obs, state[..3].to_vec())
    }

    fn reward(&self, achieved: &[f64], desired: &[f64], _observation: &[f64], _action: &[f64]) -> f64 {
        -dist(achieved, desired)
    }

    fn success(&self, achieved: &[f64], desired: &[f64], _observation: &[f64]) -> bool {
        dist(achieved, desired) < self.params.success_tolerance
    }

    fn failure(&self, observation: &[f64]) -> bool {
        let p = &self.params;
        observation[..3].iter().any(|v| v.abs() > p.max_speed)
            || observation[9..12].iter().any(|a| a.abs() > p.max_attitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GoalEnv, Simulator};
    use rand::{Rng, SeedableRng};

    fn env() -> Simulator<QuadVel> {
        Simulator::new(QuadVel::new(QuadVelParams::default()), 1000)
    }

    #[test]
    fn reset_inside_table_ranges() {
        let mut env = env();
        for seed in 0..100 {
            let o = env.reset(seed);
            assert!(o.observation[..3].iter().all(|v| v.abs() <= 1.0));
            assert!(o.observation[9..].iter().all(|a| a.abs() <= 0.05));
            assert!(o.desired_goal.iter().all(|g| g.abs() <= 1.0));
            assert_eq!(&o.achieved_goal[..], &o.observation[..3]);
        }
    }

    #[test]
    fn reward_substitution() {
        let env = env();
        let r = env.compute_reward(&[1.0, 0.0, 0.0], &[0.0; 3], &[0.0; 12], &[0.0; 4]);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn level_hover_holds_velocity_without_drag() {
        let mut p = QuadVelParams::default();
        p.drag = 0.0;
        let mut env = Simulator::new(QuadVel::new(p), 1000);
        env.set_state(vec![0.5, -0.3, 0.2, 0.0, 0.0, 0.0], vec![0.0; 3]);
        let r = env.step(&[0.2, 0.0, 0.0, 0.0]).unwrap();
        assert!((r.obs.observation[0] - 0.5).abs() < 1e-12);
        assert!((r.obs.observation[1] + 0.3).abs() < 1e-12);
        assert!((r.obs.observation[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn pitch_accelerates_forward() {
        let mut env = env();
        env.set_state(vec![0.0; 6], vec![1.0, 0.0, 0.0]);
        let mut last = 0.0;
        for _ in 0..50 {
            let r = env.step(&[0.0, 0.0, 0.2, 0.0]).unwrap();
            assert!(r.obs.observation[0] >= last);
            last = r.obs.observation[0];
        }
        assert!(last > 0.5);
    }

    #[test]
    fn bounded_states_under_random_actions() {
        let mut env = env();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            env.reset(seed);
            for _ in 0..1000 {
                let a: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let r = env.step(&a).unwrap();
                assert!(r.obs.observation[9..].iter().all(|x| x.abs() <= 0.2 + 0.05));
                assert!(r.obs.observation.iter().all(|x| x.is_finite()));
                if r.terminated || r.truncated {
                    break;
                }
            }
        }
    }

    #[test]
    fn overspeed_terminates() {
        let mut env = env();
        env.set_state(vec![4.1, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 3]);
        let r = env.step(&[0.0; 4]).unwrap();
        assert!(r.terminated && !r.success);
    }
}
