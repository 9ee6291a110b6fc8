use rand::Rng;

use super::buffer::Transition;
use crate::envs::GoalEnv;
use crate::goal::{unadvised_observation, RealVector};
use crate::Result;

/// Rebuild a transition as if `goal` had been the desired goal. Dynamics,
/// action and episode bookkeeping are untouched; the observation slots are
/// rebuilt unadvised.
pub fn relabel(env: &dyn GoalEnv, t: &Transition, goal: &RealVector) -> Result<Transition> {
    let obs = t.obs.with_desired_goal(goal.clone())?;
    let next_obs = t.next_obs.with_desired_goal(goal.clone())?;
    let reward = env.compute_reward(&next_obs.achieved_goal, goal, &next_obs.observation, &t.action);
    let terminated =
        env.is_success(&next_obs.achieved_goal, goal, &next_obs.observation) || env.is_failure(&next_obs.observation);
    Ok(Transition {
        s_e: unadvised_observation(&obs)?,
        action: t.action.clone(),
        reward,
        s_e_next: unadvised_observation(&next_obs)?,
        terminated,
        episode: t.episode,
        step: t.step,
        obs,
        next_obs,
    })
}

/// "Future" hindsight relabelling: each transition is emitted followed by up
/// to `k` copies whose goal is the achieved goal at a uniformly drawn strictly
/// later step of the same episode.
pub fn her_relabel<R: Rng + ?Sized>(
    env: &dyn GoalEnv,
    episode: &[Transition],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(episode.len() * (k + 1));
    for (i, t) in episode.iter().enumerate() {
        out.push(t.clone());
        if i + 1 >= episode.len() {
            continue;
        }
        for _ in 0..k {
            let j = rng.random_range(i + 1..episode.len());
            out.push(relabel(env, t, &episode[j].obs.achieved_goal)?);
        }
    }
    Ok(out)
}
