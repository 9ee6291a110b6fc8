//! Goal-conditioned observation records and the extended observation layout
//! `[s | g_a | third_slot]` consumed by the actor and critics.

use std::ops::Deref;

use crate::error::{check_dim, check_finite, AacError, Result};

/// Fixed-length vector of finite reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("vector", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = AacError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl TryFrom<&[f64]> for RealVector {
    type Error = AacError;

    fn try_from(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}

pub fn norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Per-step record returned by a goal-conditioned environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalObservation {
    pub observation: RealVector,
    pub desired_goal: RealVector,
    pub achieved_goal: RealVector,
}

impl GoalObservation {
    pub fn new(
        observation: RealVector,
        desired_goal: RealVector,
        achieved_goal: RealVector,
    ) -> Result<Self> {
        check_dim("goal", desired_goal.len(), achieved_goal.len())?;
        Ok(Self {
            observation,
            desired_goal,
            achieved_goal,
        })
    }

    pub fn goal_dim(&self) -> usize {
        self.desired_goal.len()
    }

    /// Same observation with the desired goal replaced.
    pub fn with_desired_goal(&self, desired_goal: RealVector) -> Result<Self> {
        Self::new(
            self.observation.clone(),
            desired_goal,
            self.achieved_goal.clone(),
        )
    }
}

/// Flat actor/critic input laid out as `[s | g_a | third_slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedObservation(RealVector);

impl ExtendedObservation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The trailing goal-sized slot (`-e` unadvised, `ε` advised).
    pub fn third_slot(&self, goal_dim: usize) -> &[f64] {
        &self.0[self.0.len() - goal_dim..]
    }
}

impl Deref for ExtendedObservation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `e = g_d - g_a`.
pub fn error(obs: &GoalObservation) -> Result<RealVector> {
    check_dim(
        "goal error",
        obs.desired_goal.len(),
        obs.achieved_goal.len(),
    )?;
    let e = obs
        .desired_goal
        .iter()
        .zip(obs.achieved_goal.iter())
        .map(|(d, a)| d - a)
        .collect();
    Ok(RealVector::from_vec_unchecked(e))
}

pub fn build_extended_observation(
    obs: &GoalObservation,
    third_slot: &[f64],
) -> Result<ExtendedObservation> {
    check_dim("third slot", obs.achieved_goal.len(), third_slot.len())?;
    check_finite("third slot", third_slot)?;
    let mut values =
        Vec::with_capacity(obs.observation.len() + obs.achieved_goal.len() + third_slot.len());
    values.extend_from_slice(&obs.observation);
    values.extend_from_slice(&obs.achieved_goal);
    values.extend_from_slice(third_slot);
    Ok(ExtendedObservation(RealVector::from_vec_unchecked(values)))
}

/// Unadvised layout `[s | g_a | -e]`.
pub fn unadvised_observation(obs: &GoalObservation) -> Result<ExtendedObservation> {
    let neg: Vec<f64> = error(obs)?.iter().map(|e| -e).collect();
    build_extended_observation(obs, &neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    fn obs(s: &[f64], gd: &[f64], ga: &[f64]) -> GoalObservation {
        GoalObservation::new(rv(s), rv(gd), rv(ga)).unwrap()
    }

    #[test]
    fn error_is_desired_minus_achieved() {
        assert_eq!(error(&obs(&[], &[1.0], &[1.0])).unwrap().as_slice(), &[0.0]);
        assert_eq!(error(&obs(&[], &[5.0], &[3.0])).unwrap().as_slice(), &[2.0]);
        assert_eq!(
            error(&obs(&[], &[0.0, 0.0], &[0.5, -0.5])).unwrap().as_slice(),
            &[-0.5, 0.5]
        );
    }

    #[test]
    fn mismatched_goal_dims_rejected() {
        let r = GoalObservation::new(rv(&[]), rv(&[1.0]), rv(&[1.0, 2.0]));
        assert!(matches!(r, Err(AacError::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_vector_rejected() {
        assert!(RealVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn extended_observation_layout() {
        let o = obs(&[0.1, 0.2], &[1.0], &[1.0]);
        let se = build_extended_observation(&o, &[0.0]).unwrap();
        assert_eq!(se.values(), &[0.1, 0.2, 1.0, 0.0]);

        let o = obs(&[1.0, 2.0], &[5.0], &[3.0]);
        let se = build_extended_observation(&o, &[-2.0]).unwrap();
        assert_eq!(se.values(), &[1.0, 2.0, 3.0, -2.0]);
        assert_eq!(unadvised_observation(&o).unwrap(), se);

        let o = obs(&[], &[0.0, 0.0], &[0.5, -0.5]);
        let se = build_extended_observation(&o, &[0.5, -0.5]).unwrap();
        assert_eq!(se.values(), &[0.5, -0.5, 0.5, -0.5]);
        assert_eq!(se.third_slot(2), &[0.5, -0.5]);
    }

    #[test]
    fn third_slot_dim_checked() {
        let o = obs(&[0.0], &[1.0], &[0.0]);
        assert!(build_extended_observation(&o, &[0.0, 0.0]).is_err());
    }
}
