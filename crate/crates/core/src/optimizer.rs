//! The ZeNO outer loop.
//!
//! Each iteration draws `N` one-step proposals from the uncontrolled OU
//! reference dynamics around the current noise, scores them through the
//! black-box generator and reward, turns the scores into a control with the
//! configured estimator, and takes one controlled OU step:
//!
//! ```text
//! z_n   = sqrt(1 - beta) z + sqrt(beta) eps_n          n = 0..N
//! u     = estimator(eps, r(G(z_n)))
//! z'    = sqrt(1 - beta) z + sqrt(beta) eps + eta u    (eps fresh)
//! z'    = z' * sqrt(d) / |z'|                           (optional)
//! ```

use rayon::prelude::*;

use crate::config::{EstimatorKind, ZenoConfig};
use crate::error::{Error, Result};
use crate::estimators::{estimate_control, linearized_control, ControlVector, ParticleBatch};
use crate::model::{check_dimensions, evaluate, Generator, Reward};
use crate::noise::{renormalize_to_sqrt_d, NoiseVector};
use crate::rng::{gaussian_vec, stream_for, Purpose};
use crate::scalar::{vecops, Scalar};
use crate::trace::{BestTracker, RunTrace, TraceEntry};

/// Inputs of one controlled OU step.
#[derive(Debug, Clone)]
pub struct OuStepInputs<'a, T> {
    pub current: &'a NoiseVector<T>,
    pub beta: T,
    pub fresh: &'a [T],
    pub control: &'a ControlVector<T>,
    pub eta: T,
}

/// `sqrt(1 - beta) z + sqrt(beta) eps + eta u`, without renormalization.
///
/// `beta = 0` is accepted so the step degenerates to `z + eta u`.
pub fn ou_step<T: Scalar>(inputs: &OuStepInputs<'_, T>) -> Result<NoiseVector<T>> {
    let d = inputs.current.dim();
    for len in [inputs.fresh.len(), inputs.control.dim()] {
        if len != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: len,
            });
        }
    }
    if !(inputs.beta >= T::zero() && inputs.beta < T::one()) {
        return Err(Error::param("beta", format!("must lie in [0, 1), got {}", inputs.beta)));
    }
    let keep = (T::one() - inputs.beta).sqrt();
    let diffuse = inputs.beta.sqrt();
    let z = inputs.current.as_slice();
    let u = inputs.control.as_slice();
    let next = (0..d)
        .map(|i| keep * z[i] + diffuse * inputs.fresh[i] + inputs.eta * u[i])
        .collect();
    NoiseVector::new(next)
}

/// One-step OU proposal `sqrt(1 - beta) z + sqrt(beta) eps`.
pub(crate) fn propose<T: Scalar>(z: &[T], eps: &[T], beta: T) -> Vec<T> {
    vecops::lincomb((T::one() - beta).sqrt(), z, beta.sqrt(), eps)
}

/// Everything produced by one ZeNO iteration.
#[derive(Debug, Clone)]
pub struct StepRecord<T> {
    pub proposals: Vec<NoiseVector<T>>,
    pub rewards: Vec<T>,
    pub mean_reward: T,
    pub control: ControlVector<T>,
    pub state: NoiseVector<T>,
}

/// Iterator-style driver of the ZeNO chain.
///
/// `zeno_optimize` is built on this; diagnostics use it directly to run long
/// chains without keeping a trace.
pub struct ZenoChain<'a, T, G: ?Sized, R: ?Sized> {
    generator: &'a G,
    reward: &'a R,
    config: ZenoConfig<T>,
    state: NoiseVector<T>,
    iteration: usize,
}

impl<'a, T, G, R> ZenoChain<'a, T, G, R>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    pub fn new(generator: &'a G, reward: &'a R, z0: NoiseVector<T>, config: &ZenoConfig<T>) -> Result<Self> {
        config.validate()?;
        check_dimensions(generator, reward, z0.dim())?;
        Ok(Self {
            generator,
            reward,
            config: config.clone(),
            state: z0,
            iteration: 0,
        })
    }

    pub fn state(&self) -> &NoiseVector<T> {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn step(&mut self) -> Result<StepRecord<T>> {
        let m = self.iteration;
        let cfg = &self.config;
        let d = self.state.dim();
        let z = self.state.as_slice();

        // Particles are independent; collect() keeps particle order.
        let particles: Vec<(Vec<T>, NoiseVector<T>, T)> = (0..cfg.particles)
            .into_par_iter()
            .map(|n| {
                let mut rng = stream_for(cfg.seed, Purpose::Proposal, m as u64, n as u64);
                let eps: Vec<T> = gaussian_vec(d, &mut rng);
                let proposal = NoiseVector::new(propose(z, &eps, cfg.beta))?;
                let r = evaluate(self.generator, self.reward, proposal.as_slice())?;
                Ok((eps, proposal, r.value()))
            })
            .collect::<Result<_>>()
            .map_err(|e| e.at_iteration(m))?;

        let mut perturbations = Vec::with_capacity(particles.len());
        let mut proposals = Vec::with_capacity(particles.len());
        let mut rewards = Vec::with_capacity(particles.len());
        for (eps, p, r) in particles {
            perturbations.push(eps);
            proposals.push(p);
            rewards.push(r);
        }

        let batch = ParticleBatch::new(perturbations, rewards.clone())?;
        let mean_reward = batch.mean_reward();
        let control = estimate_control(cfg.estimator, &batch, cfg.lambda).map_err(|e| e.at_iteration(m))?;

        let fresh: Vec<T> = gaussian_vec(d, &mut stream_for(cfg.seed, Purpose::Fresh, m as u64, 0));
        let mut next = ou_step(&OuStepInputs {
            current: &self.state,
            beta: cfg.beta,
            fresh: &fresh,
            control: &control,
            eta: cfg.eta,
        })
        .map_err(|e| e.at_iteration(m))?;
        if cfg.renormalize {
            next = renormalize_to_sqrt_d(&next).map_err(|e| e.at_iteration(m))?;
        }

        self.state = next.clone();
        self.iteration += 1;
        Ok(StepRecord {
            proposals,
            rewards,
            mean_reward,
            control,
            state: next,
        })
    }
}

/// Runs `config.iterations` ZeNO iterations from `z0`.
///
/// The returned best noise is the arg-max over `z0`, every proposal and every
/// updated chain state, in evaluation order (ties keep the earliest).
pub fn zeno_optimize<T, G, R>(
    generator: &G,
    reward: &R,
    z0: &NoiseVector<T>,
    config: &ZenoConfig<T>,
) -> Result<RunTrace<T>>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
{
    zeno_optimize_observed(generator, reward, z0, config, |_| {})
}

/// [`zeno_optimize`], handing every iteration's [`StepRecord`] to `observe`.
pub fn zeno_optimize_observed<T, G, R, F>(
    generator: &G,
    reward: &R,
    z0: &NoiseVector<T>,
    config: &ZenoConfig<T>,
    mut observe: F,
) -> Result<RunTrace<T>>
where
    T: Scalar,
    G: Generator<T> + ?Sized,
    R: Reward<T> + ?Sized,
    F: FnMut(&StepRecord<T>),
{
    let mut chain = ZenoChain::new(generator, reward, z0.clone(), config)?;
    let mut best = BestTracker::new();
    let r0 = evaluate(generator, reward, z0.as_slice()).map_err(|e| e.at_iteration(0))?;
    best.offer(r0.value(), z0);

    let mut entries = Vec::with_capacity(config.iterations);
    for m in 0..config.iterations {
        let previous = chain.state().clone();
        let step = chain.step()?;
        observe(&step);
        for (p, &r) in step.proposals.iter().zip(&step.rewards) {
            best.offer(r, p);
        }
        let state_reward = evaluate(generator, reward, step.state.as_slice())
            .map_err(|e| e.at_iteration(m))?
            .value();
        best.offer(state_reward, &step.state);
        entries.push(TraceEntry {
            iteration: m,
            candidate_rewards: step.rewards,
            mean_reward: step.mean_reward,
            control_norm: step.control.norm(),
            noise_norm: step.state.norm(),
            update_norm: vecops::norm(&vecops::sub(step.state.as_slice(), previous.as_slice())),
            state_reward,
            best_so_far: best.reward(),
        });
    }

    let (best_reward, best_noise) = best.into_inner().expect("z0 is always evaluated");
    Ok(RunTrace {
        entries,
        best_noise,
        best_reward,
        final_noise: chain.state().clone(),
    })
}

/// Sensitivity of `z_{t+H}` to the noise injected at step `t` under the
/// uncontrolled discretized OU chain: `sqrt(beta) (1 - beta)^((H - 1) / 2)`.
pub fn horizon_decay_coefficient<T: Scalar>(beta: T, horizon: u32) -> Result<T> {
    if !(beta > T::zero() && beta < T::one()) {
        return Err(Error::param("beta", format!("must lie in (0, 1), got {beta}")));
    }
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    let exponent = T::from_u32(horizon - 1).expect("u32 fits") / T::lit(2.0);
    Ok(beta.sqrt() * (T::one() - beta).powf(exponent))
}

/// Small-beta form `sqrt(beta) exp(-beta (H - 1) / 2)` of
/// [`horizon_decay_coefficient`].
pub fn horizon_decay_approx<T: Scalar>(beta: T, horizon: u32) -> T {
    let h = T::from_u32(horizon.saturating_sub(1)).expect("u32 fits");
    beta.sqrt() * (-beta * h / T::lit(2.0)).exp()
}

/// A reward on noise space with a known gradient.
pub trait AnalyticReward<T>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &[T]) -> T;
    fn gradient(&self, z: &[T]) -> Vec<T>;
}

/// Exposes an [`AnalyticReward`] through the black-box [`Reward`] contract.
pub struct AsReward<'a, A: ?Sized>(pub &'a A);

impl<T: Scalar, A: AnalyticReward<T> + ?Sized> Reward<T> for AsReward<'_, A> {
    fn input_dim(&self) -> Option<usize> {
        Some(self.0.dim())
    }
    fn reward(&self, x: &[T]) -> Result<T> {
        Ok(self.0.value(x))
    }
}

/// Mean one-step ZeNO drift against the matching Langevin drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport<T> {
    /// Temperature implied by `beta = 2 lambda eta`.
    pub lambda: T,
    /// Monte-Carlo estimate of `E[z' - z]`.
    pub zeno_drift: Vec<T>,
    /// Per-coordinate standard error of `zeno_drift`.
    pub stderr: Vec<T>,
    /// `lambda eta grad log p*(z)` with `grad log p*(z) = -z + grad r(z) / lambda`.
    pub langevin_drift: Vec<T>,
    /// `|zeno - langevin| / |langevin|`.
    pub relative_discrepancy: T,
}

/// Rescales the linearized control into score units.
///
/// By Stein's identity `E[(r - r_bar) eps] = sqrt(beta) E[grad r]` for
/// proposals at scale `sqrt(beta)`, so dividing by `sqrt(beta)` turns the
/// estimator into an estimate of the reward gradient, which is the control
/// the Langevin correspondence is stated in.
fn score_unit_config<T: Scalar>(config: &ZenoConfig<T>) -> ZenoConfig<T> {
    ZenoConfig {
        eta: config.eta / config.beta.sqrt(),
        estimator: EstimatorKind::Linearized,
        renormalize: false,
        ..config.clone()
    }
}

/// Compares the expected one-step ZeNO update at `z` with the Langevin drift
/// on the reward-tilted prior `p*(z) ~ N(z; 0, I) exp(r(z) / lambda)`.
///
/// `lambda` is not free: it is fixed by `beta = 2 lambda eta`. The update is
/// the linearized ZeNO step with renormalization off and the control in
/// score units. `samples` independent batches of `config.particles`
/// particles are drawn; each contributes one update `z' - z` with the fresh
/// Gaussian term replaced by its mean, zero.
pub fn langevin_drift_check<T, A>(
    world: &A,
    z: &NoiseVector<T>,
    config: &ZenoConfig<T>,
    samples: usize,
) -> Result<DriftReport<T>>
where
    T: Scalar,
    A: AnalyticReward<T> + ?Sized,
{
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2 batches"));
    }
    config.validate()?;
    let d = z.dim();
    if world.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: world.dim(),
            actual: d,
        });
    }
    let cfg = score_unit_config(config);
    let lambda = config.beta / (T::lit(2.0) * config.eta);
    let keep = (T::one() - cfg.beta).sqrt();

    let updates: Vec<Vec<T>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_for(cfg.seed, Purpose::Diagnostic, s as u64, 0);
            let mut perturbations = Vec::with_capacity(cfg.particles);
            let mut rewards = Vec::with_capacity(cfg.particles);
            for _ in 0..cfg.particles {
                let eps: Vec<T> = gaussian_vec(d, &mut rng);
                rewards.push(world.value(&propose(z.as_slice(), &eps, cfg.beta)));
                perturbations.push(eps);
            }
            let u = linearized_control(&ParticleBatch::new(perturbations, rewards)?)?;
            Ok((0..d)
                .map(|i| (keep - T::one()) * z.as_slice()[i] + cfg.eta * u.as_slice()[i])
                .collect())
        })
        .collect::<Result<_>>()?;

    let n = T::from_usize_lossy(samples);
    let mut mean = vec![T::zero(); d];
    for u in &updates {
        for (m, &x) in mean.iter_mut().zip(u) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); d];
    for u in &updates {
        for i in 0..d {
            var[i] += (u[i] - mean[i]).powi(2);
        }
    }
    let stderr = var.into_iter().map(|v| (v / (n - T::one()) / n).sqrt()).collect();

    let grad = world.gradient(z.as_slice());
    let step = lambda * config.eta;
    let langevin: Vec<T> = (0..d).map(|i| step * (-z.as_slice()[i] + grad[i] / lambda)).collect();
    let diff = vecops::norm(&vecops::sub(&mean, &langevin));
    let scale = vecops::norm(&langevin);
    Ok(DriftReport {
        lambda,
        zeno_drift: mean,
        stderr,
        langevin_drift: langevin,
        relative_discrepancy: if scale > T::zero() { diff / scale } else { diff },
    })
}

/// Long-run mean of the score-unit ZeNO chain used by [`langevin_drift_check`].
///
/// Runs `burn_in + steps` iterations from `z0` and averages the last `steps`
/// states. For a linear reward `a . z` the tilted prior is `N(a / lambda, I)`.
pub fn tilted_chain_mean<T, A>(
    world: &A,
    z0: &NoiseVector<T>,
    config: &ZenoConfig<T>,
    burn_in: usize,
    steps: usize,
) -> Result<Vec<T>>
where
    T: Scalar,
    A: AnalyticReward<T> + ?Sized,
{
    if steps == 0 {
        return Err(Error::param("steps", "must be positive"));
    }
    let cfg = score_unit_config(config);
    let generator = crate::model::Identity { dim: z0.dim() };
    let reward = AsReward(world);
    let mut chain = ZenoChain::new(&generator, &reward, z0.clone(), &cfg)?;
    for _ in 0..burn_in {
        chain.step()?;
    }
    let mut sum = vec![T::zero(); z0.dim()];
    for _ in 0..steps {
        let rec = chain.step()?;
        for (s, &x) in sum.iter_mut().zip(rec.state.as_slice()) {
            *s += x;
        }
    }
    let n = T::from_usize_lossy(steps);
    Ok(sum.into_iter().map(|s| s / n).collect())
}
