//! Comparison methods: Best-of-N and a first-order Langevin chain whose
//! gradient comes from central finite differences of `r(G(z))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dimensions, evaluate, Generator, Reward, RewardValue};
use crate::noise::{renormalize_to_sqrt_d, sample_standard_gaussian, NoiseVector};
use crate::rng::{gaussian_vec, stream_for, Purpose};
use crate::scalar::{vecops, Scalar};
use crate::trace::{BestTracker, RunTrace, TraceEntry};

/// Draws `n` independent standard-Gaussian noises and keeps the best one.
///
/// Draw `i` comes from its own stream, so the first `n` draws of a run with
/// `2n` candidates are exactly the draws of the run with `n`.
pub fn best_of_n<T, G, R>(
    generator: &G,
    reward: &R,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<(NoiseVector<T>, RewardValue<T>)>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::param("n", "need at least one candidate"));
    }
    check_dimensions(generator, reward, d)?;
    let scored: Vec<(NoiseVector<T>, RewardValue<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = sample_standard_gaussian(d, &mut stream_for(seed, Purpose::BestOfN, 0, i as u64))?;
            let r = evaluate(generator, reward, z.as_slice())?;
            Ok((z, r))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, r)) in scored.iter().enumerate() {
        if r.value() > scored[best].1.value() {
            best = i;
        }
    }
    Ok(scored.into_iter().nth(best).expect("n >= 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct FdLangevinConfig<T> {
    pub steps: usize,
    pub step_size: T,
    /// Scale of the injected Gaussian noise. `None` means `sqrt(2 step_size)`.
    pub noise_scale: Option<T>,
    pub fd_epsilon: T,
    pub renormalize: bool,
    pub seed: u64,
}

impl<T: Scalar> Default for FdLangevinConfig<T> {
    fn default() -> Self {
        Self {
            steps: 200,
            step_size: T::lit(0.01),
            noise_scale: None,
            fd_epsilon: T::lit(1e-4),
            renormalize: true,
            seed: 0,
        }
    }
}

impl<T: Scalar> FdLangevinConfig<T> {
    pub fn noise_scale(&self) -> T {
        self.noise_scale
            .unwrap_or_else(|| (T::lit(2.0) * self.step_size).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fd_epsilon > T::zero()) {
            return Err(Error::param("fd_epsilon", "must be positive"));
        }
        if !(self.step_size >= T::zero() && self.step_size.is_finite()) {
            return Err(Error::param("step_size", "must be non-negative"));
        }
        if !(self.noise_scale() >= T::zero()) {
            return Err(Error::param("noise_scale", "must be non-negative"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be positive"));
        }
        Ok(())
    }
}

/// Central-difference gradient of `r(G(.))` at `z`, plus the `2d` rewards it
/// evaluated (`+e_0, -e_0, +e_1, ...`).
pub fn fd_gradient<T, G, R>(generator: &G, reward: &R, z: &[T], epsilon: T) -> Result<(Vec<T>, Vec<T>)>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    let d = z.len();
    let evals: Vec<(T, T)> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut plus = z.to_vec();
            let mut minus = z.to_vec();
            plus[i] += epsilon;
            minus[i] -= epsilon;
            Ok((
                evaluate(generator, reward, &plus)?.value(),
                evaluate(generator, reward, &minus)?.value(),
            ))
        })
        .collect::<Result<_>>()?;
    let two_eps = T::lit(2.0) * epsilon;
    let grad = evals.iter().map(|(p, m)| (*p - *m) / two_eps).collect();
    let rewards = evals.iter().flat_map(|(p, m)| [*p, *m]).collect();
    Ok((grad, rewards))
}

/// `z <- z + step_size grad + noise_scale eps`, gradient by central
/// differences, optionally renormalized to `sqrt(d)` after every step.
pub fn fd_gradient_langevin<T, G, R>(
    generator: &G,
    reward: &R,
    z0: &NoiseVector<T>,
    config: &FdLangevinConfig<T>,
) -> Result<RunTrace<T>>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    config.validate()?;
    check_dimensions(generator, reward, z0.dim())?;
    let d = z0.dim();
    let noise = config.noise_scale();
    let mut best = BestTracker::new();
    best.offer(
        evaluate(generator, reward, z0.as_slice())
            .map_err(|e| e.at_iteration(0))?
            .value(),
        z0,
    );
    let mut z = z0.clone();
    let mut entries = Vec::with_capacity(config.steps);
    for m in 0..config.steps {
        let (grad, fd_rewards) =
            fd_gradient(generator, reward, z.as_slice(), config.fd_epsilon).map_err(|e| e.at_iteration(m))?;
        let eps: Vec<T> = gaussian_vec(d, &mut stream_for(config.seed, Purpose::Baseline, m as u64, 0));
        let stepped: Vec<T> = (0..d)
            .map(|i| z.as_slice()[i] + config.step_size * grad[i] + noise * eps[i])
            .collect();
        let mut next = NoiseVector::new(stepped).map_err(|e| e.at_iteration(m))?;
        if config.renormalize {
            next = renormalize_to_sqrt_d(&next).map_err(|e| e.at_iteration(m))?;
        }
        let state_reward = evaluate(generator, reward, next.as_slice())
            .map_err(|e| e.at_iteration(m))?
            .value();
        best.offer(state_reward, &next);
        let n = T::from_usize_lossy(fd_rewards.len());
        entries.push(TraceEntry {
            iteration: m,
            mean_reward: fd_rewards.iter().copied().sum::<T>() / n,
            candidate_rewards: fd_rewards,
            control_norm: vecops::norm(&grad),
            noise_norm: next.norm(),
            update_norm: vecops::norm(&vecops::sub(next.as_slice(), z.as_slice())),
            state_reward,
            best_so_far: best.reward(),
        });
        z = next;
    }
    let (best_reward, best_noise) = best.into_inner().expect("z0 evaluated");
    Ok(RunTrace {
        entries,
        best_noise,
        best_reward,
        final_noise: z,
    })
}

/// Outcome of matching the baseline's step size to a reference update norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMatch<T> {
    pub step_size: T,
    pub achieved_update_norm: T,
    pub target_update_norm: T,
}

impl<T: Scalar> StepMatch<T> {
    pub fn relative_error(&self) -> T {
        ((self.achieved_update_norm - self.target_update_norm) / self.target_update_norm).abs()
    }
}

/// Finds the step size whose mean per-step update norm (as measured by
/// `measure`) is within `tolerance` of `target`, by bisection in log space.
///
/// `measure` must be non-decreasing in the step size.
pub fn match_step_size<T, F>(target: T, tolerance: T, mut measure: F) -> Result<StepMatch<T>>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    if !(target > T::zero()) {
        return Err(Error::param("target", "update norm to match must be positive"));
    }
    let mut lo = T::lit(1e-8).ln();
    let mut hi = T::lit(1e2).ln();
    let mut best: Option<StepMatch<T>> = None;
    for _ in 0..60 {
        let mid = (lo + hi) / T::lit(2.0);
        let step_size = mid.exp();
        let achieved = measure(step_size)?;
        let candidate = StepMatch {
            step_size,
            achieved_update_norm: achieved,
            target_update_norm: target,
        };
        if best.is_none_or(|b| candidate.relative_error() < b.relative_error()) {
            best = Some(candidate);
        }
        if candidate.relative_error() <= tolerance {
            break;
        }
        if achieved < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = best.expect("at least one probe");
    if best.relative_error() > tolerance {
        return Err(Error::param(
            "step_size",
            format!(
                "could not match update norm {} within {}; closest {}",
                target, tolerance, best.achieved_update_norm
            ),
        ));
    }
    Ok(best)
}
