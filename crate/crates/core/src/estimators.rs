//! Zeroth-order control estimators.
//!
//! Each estimator maps a batch of one-step perturbations and the rewards they
//! produced to a control direction in noise space. All reductions run over
//! particle index in a fixed order.
//!
//! Rewards enter only through differences to a reference particle, so a
//! constant reward offset cancels before any rounding can see it.

use crate::config::EstimatorKind;
use crate::error::{Error, Result};
use crate::model::RewardValue;
use crate::scalar::{vecops, Scalar};

/// Perturbations `eps^(n)` and the rewards `r^(n)` of the proposals they induced.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBatch<T> {
    perturbations: Vec<Vec<T>>,
    rewards: Vec<T>,
    dim: usize,
}

impl<T: Scalar> ParticleBatch<T> {
    pub fn new(perturbations: Vec<Vec<T>>, rewards: Vec<T>) -> Result<Self> {
        if perturbations.len() != rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: perturbations.len(),
                actual: rewards.len(),
            });
        }
        if perturbations.len() < 2 {
            return Err(Error::param("particles", "a batch needs at least 2 particles"));
        }
        let dim = perturbations[0].len();
        if dim == 0 {
            return Err(Error::InvalidDimension("perturbations must be non-empty".into()));
        }
        for p in &perturbations {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.len(),
                });
            }
            if !vecops::all_finite(p) {
                return Err(Error::NonFinite("perturbation".into()));
            }
        }
        for &r in &rewards {
            RewardValue::new(r)?;
        }
        Ok(Self {
            perturbations,
            rewards,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn perturbations(&self) -> &[Vec<T>] {
        &self.perturbations
    }

    /// Mean reward, accumulated as an offset from the first particle.
    pub fn mean_reward(&self) -> T {
        self.rewards[0] + self.mean_offset()
    }

    fn mean_offset(&self) -> T {
        let r0 = self.rewards[0];
        self.rewards.iter().map(|&r| r - r0).sum::<T>() / T::from_usize_lossy(self.len())
    }

    /// `r^(n) - mean(r)`. Exactly zero when all rewards are equal.
    pub fn advantages(&self) -> Vec<T> {
        let r0 = self.rewards[0];
        let offset = self.mean_offset();
        self.rewards.iter().map(|&r| (r - r0) - offset).collect()
    }

    fn weighted_sum(&self, weights: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.dim];
        for (w, eps) in weights.iter().zip(&self.perturbations) {
            for (a, &e) in acc.iter_mut().zip(eps) {
                *a += *w * e;
            }
        }
        acc
    }
}

/// Control direction `u` in noise space.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector<T>(Vec<T>);

impl<T: Scalar> ControlVector<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if !vecops::all_finite(&data) {
            return Err(Error::NonFinite("control vector".into()));
        }
        Ok(Self(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        vecops::norm(&self.0)
    }
}

/// `(1/N) sum_n (r^(n) - r_bar) eps^(n)`.
pub fn linearized_control<T: Scalar>(batch: &ParticleBatch<T>) -> Result<ControlVector<T>> {
    let n = T::from_usize_lossy(batch.len());
    let sum = batch.weighted_sum(&batch.advantages());
    ControlVector::new(sum.into_iter().map(|x| x / n).collect())
}

/// Softmax weights `exp((r - r_max) / lambda)`; the largest weight is exactly 1.
fn softmax_weights<T: Scalar>(shifted: &[T], lambda: T) -> Vec<T> {
    let max = shifted.iter().copied().fold(T::neg_infinity(), T::max);
    shifted.iter().map(|&r| ((r - max) / lambda).exp()).collect()
}

fn ratio_control<T: Scalar>(batch: &ParticleBatch<T>, weights: &[T]) -> Result<ControlVector<T>> {
    let total: T = weights.iter().copied().sum();
    let sum = batch.weighted_sum(weights);
    ControlVector::new(sum.into_iter().map(|x| x / total).collect())
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param("lambda", format!("must be positive, got {lambda}")))
    }
}

/// `sum_n w_n eps^(n) / sum_n w_n` with `w_n = exp(r^(n) / lambda)`.
///
/// The maximum reward is subtracted inside the exponent; the normalized
/// weights are unchanged by it.
pub fn exponential_control<T: Scalar>(batch: &ParticleBatch<T>, lambda: T) -> Result<ControlVector<T>> {
    check_lambda(lambda)?;
    let r0 = batch.rewards[0];
    let offsets: Vec<T> = batch.rewards.iter().map(|&r| r - r0).collect();
    ratio_control(batch, &softmax_weights(&offsets, lambda))
}

/// [`exponential_control`] on the mean-centered rewards `r^(n) - r_bar`.
pub fn centered_exponential_control<T: Scalar>(batch: &ParticleBatch<T>, lambda: T) -> Result<ControlVector<T>> {
    check_lambda(lambda)?;
    ratio_control(batch, &softmax_weights(&batch.advantages(), lambda))
}

pub fn estimate_control<T: Scalar>(
    kind: EstimatorKind,
    batch: &ParticleBatch<T>,
    lambda: T,
) -> Result<ControlVector<T>> {
    match kind {
        EstimatorKind::Linearized => linearized_control(batch),
        EstimatorKind::Exponential => exponential_control(batch, lambda),
        EstimatorKind::CenteredExponential => centered_exponential_control(batch, lambda),
    }
}
