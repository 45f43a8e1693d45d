//! Benchmarks: a generator and a reward with a fixed noise dimension, plus
//! helpers to run fleets of seeded chains against them.

use rayon::prelude::*;

use crate::config::ZenoConfig;
use crate::error::{Error, Result};
use crate::model::{Generator, Identity, Reward};
use crate::noise::{sample_standard_gaussian, NoiseVector};
use crate::optimizer::zeno_optimize;
use crate::rng::{stream_for, Purpose};
use crate::scalar::Scalar;
use crate::trace::RunTrace;

pub trait Bench<T: Scalar>: Sync {
    type Gen: Generator<T>;
    type Rew: Reward<T>;

    fn generator(&self) -> &Self::Gen;
    fn reward(&self) -> &Self::Rew;

    fn noise_dim(&self) -> usize {
        self.generator().input_dim()
    }

    /// The starting noise of seed `seed`, shared by every method.
    fn initial_noise(&self, seed: u64) -> Result<NoiseVector<T>> {
        sample_standard_gaussian(self.noise_dim(), &mut stream_for(seed, Purpose::Initial, 0, 0))
    }
}

/// Runs one ZeNO chain per seed, each from [`Bench::initial_noise`].
pub fn run_zeno_fleet<T, B>(bench: &B, config: &ZenoConfig<T>, seeds: &[u64]) -> Result<Vec<RunTrace<T>>>
where
    T: Scalar,
    B: Bench<T> + ?Sized,
{
    config.validate()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let z0 = bench.initial_noise(seed)?;
            zeno_optimize(bench.generator(), bench.reward(), &z0, &config.clone().with_seed(seed))
        })
        .collect()
}

/// `r(x) = -||x - mu||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticReward<T> {
    pub target: Vec<T>,
}

impl<T: Scalar> Reward<T> for QuadraticReward<T> {
    fn input_dim(&self) -> Option<usize> {
        Some(self.target.len())
    }
    fn reward(&self, x: &[T]) -> Result<T> {
        Ok(-x.iter().zip(&self.target).map(|(a, b)| (*a - *b).powi(2)).sum::<T>())
    }
}

/// Identity generator with a quadratic reward peaked at `(sqrt(d), 0, ..., 0)`,
/// a point on the sphere the renormalized chain lives on.
#[derive(Debug, Clone)]
pub struct SphereQuadratic<T> {
    generator: Identity,
    reward: QuadraticReward<T>,
}

impl<T: Scalar> SphereQuadratic<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("sphere benchmark needs d >= 1".into()));
        }
        let mut target = vec![T::zero(); dim];
        target[0] = T::from_usize_lossy(dim).sqrt();
        Ok(Self {
            generator: Identity { dim },
            reward: QuadraticReward { target },
        })
    }

    pub fn target(&self) -> &[T] {
        &self.reward.target
    }
}

impl<T: Scalar> Bench<T> for SphereQuadratic<T> {
    type Gen = Identity;
    type Rew = QuadraticReward<T>;

    fn generator(&self) -> &Identity {
        &self.generator
    }
    fn reward(&self) -> &QuadraticReward<T> {
        &self.reward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_target_is_on_sphere() {
        let b = SphereQuadratic::<f64>::new(16).unwrap();
        assert_eq!(b.target()[0], 4.0);
        assert_eq!(b.reward().reward(b.target()).unwrap(), 0.0);
        assert!(SphereQuadratic::<f64>::new(0).is_err());
    }

    #[test]
    fn fleet_is_seed_deterministic() {
        let b = SphereQuadratic::<f64>::new(4).unwrap();
        let cfg = ZenoConfig {
            iterations: 5,
            ..ZenoConfig::default()
        };
        let a = run_zeno_fleet(&b, &cfg, &[3, 4]).unwrap();
        let c = run_zeno_fleet(&b, &cfg, &[4]).unwrap();
        assert_eq!(a[1], c[0]);
        assert_ne!(a[0].final_noise, a[1].final_noise);
    }
}
