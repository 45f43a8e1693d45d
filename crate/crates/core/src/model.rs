//! Black-box generator and reward contracts.
//!
//! Both are deterministic, side-effect free and callable from many threads at
//! once. The optimizer only ever sees them through these traits.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Deterministic map from noise to a sample.
pub trait Generator<T>: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn generate(&self, z: &[T]) -> Result<Vec<T>>;
}

/// Scalar score of a generated sample; higher is better.
pub trait Reward<T>: Sync {
    /// Expected sample dimension, if the reward cares.
    fn input_dim(&self) -> Option<usize> {
        None
    }
    fn reward(&self, x: &[T]) -> Result<T>;
}

/// A finite reward. NaN or infinite evaluations never become a `RewardValue`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RewardValue<T>(T);

impl<T: Scalar> RewardValue<T> {
    pub fn new(value: T) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::NonFinite(format!("reward evaluation ({value})")))
        }
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// `G(z) = z`.
#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub dim: usize,
}

impl<T: Scalar> Generator<T> for Identity {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        Ok(z.to_vec())
    }
}

/// Adapts a closure into a [`Generator`] with declared dimensions.
pub struct FnGenerator<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnGenerator<F> {
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<T, F> Generator<T> for FnGenerator<F>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        Ok((self.f)(z))
    }
}

/// Adapts a closure into a [`Reward`].
pub struct FnReward<F>(pub F);

impl<T, F> Reward<T> for FnReward<F>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    fn reward(&self, x: &[T]) -> Result<T> {
        Ok((self.0)(x))
    }
}

/// Checks that a generator/reward pair can be driven from noise of dimension `d`.
pub fn check_dimensions<T, G, R>(generator: &G, reward: &R, d: usize) -> Result<()>
where
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    if generator.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: generator.input_dim(),
            actual: d,
        });
    }
    if let Some(expected) = reward.input_dim() {
        if expected != generator.output_dim() {
            return Err(Error::DimensionMismatch {
                expected,
                actual: generator.output_dim(),
            });
        }
    }
    Ok(())
}

/// `r(G(z))`, with the output dimension and finiteness checked.
pub fn evaluate<T, G, R>(generator: &G, reward: &R, z: &[T]) -> Result<RewardValue<T>>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    let x = generator.generate(z)?;
    if x.len() != generator.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: generator.output_dim(),
            actual: x.len(),
        });
    }
    RewardValue::new(reward.reward(&x)?)
}
