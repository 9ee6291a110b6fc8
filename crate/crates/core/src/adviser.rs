//! PID adviser.
//!
//! The adviser turns the true goal error `e` into a synthetic error
//! `ε = -(kp·e + ki·∫e + kd·ė)` and writes it into the third slot of the
//! extended observation in place of `-e`. With gains `(1, 0, 0)` the result is
//! bit-identical to the unadvised observation.
//!
//! Discretisation: the integral is accumulated (backward Euler) before use and
//! clamped symmetrically to `±integral_clamp`; the derivative is a backward
//! difference and is zero on the first step after a reset.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, AacError, Result};
use crate::goal::{build_extended_observation, error, ExtendedObservation, GoalObservation, RealVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviserGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl AdviserGains {
    pub const IDENTITY: AdviserGains = AdviserGains {
        kp: 1.0,
        ki: 0.0,
        kd: 0.0,
    };

    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        let gains = Self { kp, ki, kd };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(AacError::InvalidConfig {
                    key: name.to_string(),
                    reason: format!("gain must be finite and non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

impl Default for AdviserGains {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdviserState {
    gains: AdviserGains,
    integral: Vec<f64>,
    prev_error: Option<Vec<f64>>,
    dt: f64,
    integral_clamp: f64,
}

impl AdviserState {
    /// Fresh state for a `goal_dim`-dimensional goal. `integral_clamp` may be
    /// `f64::INFINITY` to disable anti-windup.
    pub fn new(gains: AdviserGains, goal_dim: usize, dt: f64, integral_clamp: f64) -> Result<Self> {
        gains.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(AacError::InvalidConfig {
                key: "dt".into(),
                reason: format!("must be finite and positive, got {dt}"),
            });
        }
        if integral_clamp.is_nan() || integral_clamp <= 0.0 {
            return Err(AacError::InvalidConfig {
                key: "integral_clamp".into(),
                reason: format!("must be positive, got {integral_clamp}"),
            });
        }
        Ok(Self {
            gains,
            integral: vec![0.0; goal_dim],
            prev_error: None,
            dt,
            integral_clamp,
        })
    }

    pub fn gains(&self) -> AdviserGains {
        self.gains
    }

    pub fn integral(&self) -> &[f64] {
        &self.integral
    }

    pub fn prev_error(&self) -> Option<&[f64]> {
        self.prev_error.as_deref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn integral_clamp(&self) -> f64 {
        self.integral_clamp
    }

    pub fn reset(&self) -> AdviserState {
        AdviserState {
            integral: vec![0.0; self.integral.len()],
            prev_error: None,
            ..self.clone()
        }
    }

    /// One PID evaluation. Returns `ε` and the advanced state.
    pub fn fake_error(&self, e: &[f64]) -> Result<(RealVector, AdviserState)> {
        check_dim("adviser error", self.integral.len(), e.len())?;
        check_finite("adviser error", e)?;
        let AdviserGains { kp, ki, kd } = self.gains;
        let mut integral = Vec::with_capacity(e.len());
        let mut eps = Vec::with_capacity(e.len());
        for (i, &ei) in e.iter().enumerate() {
            let acc = (self.integral[i] + ei * self.dt).clamp(-self.integral_clamp, self.integral_clamp);
            let derivative = match &self.prev_error {
                Some(prev) => (ei - prev[i]) / self.dt,
                None => 0.0,
            };
            // Zero gains add nothing, so (1, 0, 0) yields exactly -e (signed zeros included).
            let mut u = kp * ei;
            if ki != 0.0 {
                u += ki * acc;
            }
            if kd != 0.0 {
                u += kd * derivative;
            }
            integral.push(acc);
            eps.push(-u);
        }
        check_finite("synthetic error", &eps)?;
        let next = AdviserState {
            integral,
            prev_error: Some(e.to_vec()),
            ..self.clone()
        };
        Ok((RealVector::from_vec_unchecked(eps), next))
    }

    /// Computes `e`, runs the PID and returns `[s | g_a | ε]`.
    pub fn advise(&self, obs: &GoalObservation) -> Result<(ExtendedObservation, AdviserState)> {
        let e = error(obs)?;
        let (eps, next) = self.fake_error(&e)?;
        Ok((build_extended_observation(obs, &eps)?, next))
    }
}

/// Waypoint `g_f = g_a - ε` whose unadvised third slot reproduces `ε`.
pub fn fake_goal(obs: &GoalObservation, eps: &[f64]) -> Result<RealVector> {
    check_dim("fake goal", obs.achieved_goal.len(), eps.len())?;
    let g = obs
        .achieved_goal
        .iter()
        .zip(eps)
        .map(|(a, e)| a - e)
        .collect();
    RealVector::new(g)
}
