use serde::{Deserialize, Serialize};

use crate::noise::NoiseVector;
use crate::scalar::Scalar;

/// One outer iteration of an optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceEntry<T> {
    pub iteration: usize,
    /// Rewards of the candidates evaluated this iteration, in particle order.
    pub candidate_rewards: Vec<T>,
    pub mean_reward: T,
    pub control_norm: T,
    /// Norm of the chain state after the update.
    pub noise_norm: T,
    /// Distance moved by the chain state this iteration.
    pub update_norm: T,
    /// Reward of the chain state after the update.
    pub state_reward: T,
    pub best_so_far: T,
}

/// Full record of an optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunTrace<T> {
    pub entries: Vec<TraceEntry<T>>,
    /// Highest-reward noise among every candidate and chain state evaluated.
    pub best_noise: NoiseVector<T>,
    pub best_reward: T,
    /// Chain state after the last iteration.
    pub final_noise: NoiseVector<T>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn best_so_far_is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far)
    }

    pub fn mean_update_norm(&self) -> T {
        if self.entries.is_empty() {
            return T::zero();
        }
        self.entries.iter().map(|e| e.update_norm).sum::<T>() / T::from_usize_lossy(self.entries.len())
    }
}

/// Tracks the arg-max over evaluations in evaluation order; ties keep the
/// earliest.
#[derive(Debug, Clone)]
pub(crate) struct BestTracker<T, S> {
    best: Option<(T, S)>,
}

impl<T: Scalar, S: Clone> BestTracker<T, S> {
    pub fn new() -> Self {
        Self { best: None }
    }

    pub fn offer(&mut self, reward: T, state: &S) {
        match &self.best {
            Some((r, _)) if reward <= *r => {}
            _ => self.best = Some((reward, state.clone())),
        }
    }

    pub fn reward(&self) -> T {
        self.best.as_ref().map(|(r, _)| *r).unwrap_or_else(T::neg_infinity)
    }

    pub fn into_inner(self) -> Option<(T, S)> {
        self.best
    }
}
