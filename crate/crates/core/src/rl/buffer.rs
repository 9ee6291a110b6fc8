use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::goal::{ExtendedObservation, GoalObservation, RealVector};

/// One environment step as seen by the learner, plus the raw goal
/// observations needed to relabel it later.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s_e: ExtendedObservation,
    /// Action actually applied, in environment units.
    pub action: RealVector,
    pub reward: f64,
    pub s_e_next: ExtendedObservation,
    pub terminated: bool,
    pub episode: u64,
    pub step: u32,
    pub obs: GoalObservation,
    pub next_obs: GoalObservation,
}

/// Column-stacked minibatch. Actions are rescaled to `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub s_e: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub s_e_next: Array2<f64>,
    pub terminated: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// FIFO experience store with a fixed capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform sample with replacement. `center`/`half` map stored actions
    /// into `[-1, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, center: &[f64], half: &[f64], rng: &mut R) -> Batch {
        let first = &self.items[0];
        let (d, m) = (first.s_e.len(), first.action.len());
        let mut batch = Batch {
            s_e: Array2::zeros((size, d)),
            actions: Array2::zeros((size, m)),
            rewards: Array1::zeros(size),
            s_e_next: Array2::zeros((size, d)),
            terminated: Array1::zeros(size),
        };
        for row in 0..size {
            let t = &self.items[rng.random_range(0..self.items.len())];
            for (dst, src) in batch.s_e.row_mut(row).iter_mut().zip(t.s_e.iter()) {
                *dst = *src;
            }
            for (dst, src) in batch.s_e_next.row_mut(row).iter_mut().zip(t.s_e_next.iter()) {
                *dst = *src;
            }
            for (j, dst) in batch.actions.row_mut(row).iter_mut().enumerate() {
                *dst = (t.action[j] - center[j]) / half[j];
            }
            batch.rewards[row] = t.reward;
            batch.terminated[row] = if t.terminated { 1.0 } else { 0.0 };
        }
        batch
    }
}
