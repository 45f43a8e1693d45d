//! Analytic 2-D Gaussian-mixture test-bed.
//!
//! The generator integrates the probability-flow ODE `dx/ds = grad log p(x)`
//! of an isotropic Gaussian mixture from the noise `z`, so each noise lands
//! on (essentially) the mode whose basin it starts in. Each mode carries a
//! fixed reward, which makes the reward-tilted noise distribution
//! `p*(z) ~ N(z; 0, I) exp(r(G(z)) / lambda)` computable by brute force.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fd_gradient_langevin, match_step_size, FdLangevinConfig, StepMatch};
use crate::bench::{run_zeno_fleet, Bench};
use crate::config::ZenoConfig;
use crate::error::{Error, Result};
use crate::model::{Generator, Reward, RewardValue};
use crate::noise::sample_standard_gaussian;
use crate::rng::{stream_for, Purpose};
use crate::scalar::Scalar;

pub type Point<T> = [T; 2];

/// Mode probabilities of the reconstructed tilted target.
pub const DEFAULT_TARGET: [f64; 3] = [0.139, 0.673, 0.188];

fn dist2<T: Scalar>(a: &Point<T>, b: &Point<T>) -> T {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Isotropic Gaussian mixture with a reward per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmWorld<T> {
    pub means: Vec<Point<T>>,
    pub weights: Vec<T>,
    /// Per-mode isotropic variance `sigma^2`.
    pub variance: T,
    pub mode_rewards: Vec<T>,
    /// Tilt temperature.
    pub lambda: T,
}

impl<T: Scalar> GmmWorld<T> {
    pub fn new(means: Vec<Point<T>>, weights: Vec<T>, variance: T, mode_rewards: Vec<T>, lambda: T) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(Error::Empty("mixture needs at least one mode".into()));
        }
        if weights.len() != k || mode_rewards.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: if weights.len() != k {
                    weights.len()
                } else {
                    mode_rewards.len()
                },
            });
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::param("weights", "must be positive"));
        }
        let total: T = weights.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(4 * k));
        if (total - T::one()).abs() > tol {
            return Err(Error::param("weights", format!("must sum to 1, got {total}")));
        }
        if !(variance > T::zero() && variance.is_finite()) {
            return Err(Error::param("variance", "must be positive"));
        }
        if !(lambda > T::zero()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if means.iter().flatten().chain(&mode_rewards).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mixture parameters".into()));
        }
        Ok(Self {
            means,
            weights,
            variance,
            mode_rewards,
            lambda,
        })
    }

    /// Equal-weight modes evenly spaced on a circle, the first at angle pi/2,
    /// with rewards `ln(K t_k)` so that at `lambda = 1` the tilted target's
    /// mode probabilities are exactly `targets`.
    pub fn on_circle(radius: T, sigma: T, targets: &[T], lambda: T) -> Result<Self> {
        let k = targets.len();
        if k < 2 {
            return Err(Error::param("targets", "need at least two modes"));
        }
        if targets.iter().any(|&t| !(t > T::zero())) {
            return Err(Error::param("targets", "probabilities must be positive"));
        }
        let kf = T::from_usize_lossy(k);
        let means = (0..k)
            .map(|i| {
                let angle = T::lit(PI / 2.0) + T::lit(2.0 * PI) * T::from_usize_lossy(i) / kf;
                [radius * angle.cos(), radius * angle.sin()]
            })
            .collect();
        let world = Self::new(
            means,
            vec![T::one() / kf; k],
            sigma * sigma,
            targets.iter().map(|&t| (kf * t).ln()).collect(),
            lambda,
        )?;
        world.ensure_well_separated()?;
        Ok(world)
    }

    /// Three modes on a radius-4 circle, `sigma = 0.5`, `lambda = 1`, tilted
    /// target `(0.139, 0.673, 0.188)`.
    pub fn reconstructed_default() -> Self {
        let targets: Vec<T> = DEFAULT_TARGET.iter().map(|&t| T::lit(t)).collect();
        Self::on_circle(T::lit(4.0), T::lit(0.5), &targets, T::one()).expect("default world is valid")
    }

    pub fn num_modes(&self) -> usize {
        self.means.len()
    }

    pub fn sigma(&self) -> T {
        self.variance.sqrt()
    }

    /// Benchmark worlds need `K >= 2` modes, pairwise at least `6 sigma`
    /// apart, so that flow basins coincide with mixture components.
    pub fn ensure_well_separated(&self) -> Result<()> {
        if self.num_modes() < 2 {
            return Err(Error::param("means", "benchmark world needs at least two modes"));
        }
        let min_sep = T::lit(6.0) * self.sigma();
        for i in 0..self.num_modes() {
            for j in i + 1..self.num_modes() {
                if dist2(&self.means[i], &self.means[j]).sqrt() < min_sep {
                    return Err(Error::param(
                        "means",
                        format!("modes {i} and {j} are closer than 6 sigma"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn log_terms(&self, x: &Point<T>) -> Vec<T> {
        let two_var = T::lit(2.0) * self.variance;
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(mu, &w)| w.ln() - dist2(x, mu) / two_var)
            .collect()
    }

    /// Posterior probability of each component at `x`.
    pub fn responsibilities(&self, x: &Point<T>) -> Vec<T> {
        let terms = self.log_terms(x);
        let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
        let exp: Vec<T> = terms.iter().map(|&t| (t - max).exp()).collect();
        let total: T = exp.iter().copied().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}

/// `log sum_k pi_k N(x; mu_k, sigma^2 I)`, via log-sum-exp.
pub fn gmm_log_density<T: Scalar>(world: &GmmWorld<T>, x: &Point<T>) -> T {
    let terms = world.log_terms(x);
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln() - (T::lit(2.0 * PI) * world.variance).ln()
}

/// `grad log p(x) = sum_k gamma_k(x) (mu_k - x) / sigma^2`.
pub fn gmm_score<T: Scalar>(world: &GmmWorld<T>, x: &Point<T>) -> Point<T> {
    let resp = world.responsibilities(x);
    let mut s = [T::zero(); 2];
    for (g, mu) in resp.iter().zip(&world.means) {
        s[0] += *g * (mu[0] - x[0]);
        s[1] += *g * (mu[1] - x[1]);
    }
    [s[0] / world.variance, s[1] / world.variance]
}

/// Integration settings of the probability-flow generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct FlowSettings<T> {
    pub steps: usize,
    pub step_size: T,
}

impl<T: Scalar> Default for FlowSettings<T> {
    fn default() -> Self {
        Self {
            steps: 200,
            step_size: T::lit(0.05),
        }
    }
}

/// Integrates `dx/ds = gmm_score(x)` from `x(0) = z` with classic RK4.
pub fn flow_generate<T: Scalar>(world: &GmmWorld<T>, z: &[T], steps: usize, step_size: T) -> Result<Point<T>> {
    if z.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: z.len(),
        });
    }
    if steps == 0 || !(step_size > T::zero()) {
        return Err(Error::param("flow", "need steps >= 1 and step_size > 0"));
    }
    let h = step_size;
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let at = |x: &Point<T>, k: &Point<T>, s: T| [x[0] + s * k[0], x[1] + s * k[1]];
    let mut x = [z[0], z[1]];
    for _ in 0..steps {
        let k1 = gmm_score(world, &x);
        let k2 = gmm_score(world, &at(&x, &k1, half));
        let k3 = gmm_score(world, &at(&x, &k2, half));
        let k4 = gmm_score(world, &at(&x, &k3, h));
        for i in 0..2 {
            x[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::NonFinite("flow state".into()));
        }
    }
    Ok(x)
}

/// Index of the nearest mode mean; ties go to the lowest index.
pub fn nearest_mode<T: Scalar>(world: &GmmWorld<T>, x: &Point<T>) -> usize {
    let mut best = 0;
    let mut best_d = dist2(x, &world.means[0]);
    for (k, mu) in world.means.iter().enumerate().skip(1) {
        let d = dist2(x, mu);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Reward of the mode nearest to `x`.
pub fn mode_reward<T: Scalar>(world: &GmmWorld<T>, x: &Point<T>) -> RewardValue<T> {
    RewardValue::new(world.mode_rewards[nearest_mode(world, x)]).expect("world rewards are finite")
}

/// The flow as a black-box [`Generator`] (noise and samples are both 2-D).
#[derive(Debug, Clone)]
pub struct FlowGenerator<T> {
    pub world: GmmWorld<T>,
    pub flow: FlowSettings<T>,
}

impl<T: Scalar> Generator<T> for FlowGenerator<T> {
    fn input_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        Ok(flow_generate(&self.world, z, self.flow.steps, self.flow.step_size)?.to_vec())
    }
}

/// [`mode_reward`] as a black-box [`Reward`].
#[derive(Debug, Clone)]
pub struct ModeReward<T> {
    pub world: GmmWorld<T>,
}

impl<T: Scalar> Reward<T> for ModeReward<T> {
    fn input_dim(&self) -> Option<usize> {
        Some(2)
    }
    fn reward(&self, x: &[T]) -> Result<T> {
        Ok(mode_reward(&self.world, &[x[0], x[1]]).value())
    }
}

/// The toy world wired up as a benchmark.
#[derive(Debug, Clone)]
pub struct ToyBench<T> {
    generator: FlowGenerator<T>,
    reward: ModeReward<T>,
}

impl<T: Scalar> ToyBench<T> {
    pub fn new(world: GmmWorld<T>, flow: FlowSettings<T>) -> Result<Self> {
        world.ensure_well_separated()?;
        Ok(Self {
            generator: FlowGenerator {
                world: world.clone(),
                flow,
            },
            reward: ModeReward { world },
        })
    }

    pub fn world(&self) -> &GmmWorld<T> {
        &self.generator.world
    }

    pub fn flow(&self) -> FlowSettings<T> {
        self.generator.flow
    }

    /// Mode the generator sends `z` to.
    pub fn terminal_mode(&self, z: &[T]) -> Result<usize> {
        let x = flow_generate(self.world(), z, self.flow().steps, self.flow().step_size)?;
        Ok(nearest_mode(self.world(), &x))
    }

    /// Basin counts of `samples` standard-Gaussian noises.
    fn basin_counts(&self, samples: usize, seed: u64) -> Result<Vec<usize>> {
        let modes: Vec<usize> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let z = sample_standard_gaussian::<T, _>(2, &mut stream_for(seed, Purpose::Target, 0, i as u64))?;
                self.terminal_mode(z.as_slice())
            })
            .collect::<Result<_>>()?;
        let mut counts = vec![0usize; self.world().num_modes()];
        for m in modes {
            counts[m] += 1;
        }
        Ok(counts)
    }
}

impl<T: Scalar> Default for ToyBench<T> {
    fn default() -> Self {
        Self::new(GmmWorld::reconstructed_default(), FlowSettings::default()).expect("default bench")
    }
}

impl<T: Scalar> Bench<T> for ToyBench<T> {
    type Gen = FlowGenerator<T>;
    type Rew = ModeReward<T>;

    fn generator(&self) -> &Self::Gen {
        &self.generator
    }
    fn reward(&self) -> &Self::Rew {
        &self.reward
    }
}

/// Probability vector over mixture modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModeDistribution<T> {
    pub probabilities: Vec<T>,
}

impl<T: Scalar> ModeDistribution<T> {
    pub fn new(probabilities: Vec<T>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Empty("mode distribution".into()));
        }
        if probabilities.iter().any(|&p| !(p >= T::zero())) {
            return Err(Error::param("probabilities", "must be non-negative"));
        }
        let total: T = probabilities.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
            return Err(Error::param("probabilities", format!("must sum to 1, got {total}")));
        }
        Ok(Self { probabilities })
    }

    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::Empty("no samples to count".into()));
        }
        let n = T::from_usize_lossy(total);
        Self::new(counts.iter().map(|&c| T::from_usize_lossy(c) / n).collect())
    }

    fn from_weights(weights: &[T]) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        Self::new(weights.iter().map(|&w| w / total).collect())
    }

    /// Total-variation distance to `other`.
    pub fn total_variation(&self, other: &Self) -> T {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (*a - *b).abs())
            .sum::<T>()
            / T::lit(2.0)
    }
}

/// Monte-Carlo estimate of the mode distribution under
/// `p*(z) ~ N(z; 0, I) exp(r(G(z)) / lambda)`.
///
/// Draws `mc_samples` standard-Gaussian noises, finds each one's terminal
/// mode, and reweights the basin counts by `exp(r_k / lambda)`.
pub fn tilted_target_distribution<T: Scalar>(
    bench: &ToyBench<T>,
    mc_samples: usize,
    seed: u64,
) -> Result<ModeDistribution<T>> {
    if mc_samples < 10_000 {
        return Err(Error::param("mc_samples", "need at least 10^4 samples"));
    }
    let world = bench.world();
    let counts = bench.basin_counts(mc_samples, seed)?;
    let max_r = world.mode_rewards.iter().copied().fold(T::neg_infinity(), T::max);
    let weights: Vec<T> = counts
        .iter()
        .zip(&world.mode_rewards)
        .map(|(&c, &r)| T::from_usize_lossy(c) * ((r - max_r) / world.lambda).exp())
        .collect();
    ModeDistribution::from_weights(&weights)
}

/// Mode distribution of the untilted generator, `z ~ N(0, I)`.
pub fn uncontrolled_mode_distribution<T: Scalar>(
    bench: &ToyBench<T>,
    mc_samples: usize,
    seed: u64,
) -> Result<ModeDistribution<T>> {
    ModeDistribution::from_counts(&bench.basin_counts(mc_samples, seed)?)
}

/// Frequencies of the nearest mode over generated points.
pub fn empirical_mode_distribution<T: Scalar>(
    samples: &[Point<T>],
    world: &GmmWorld<T>,
) -> Result<ModeDistribution<T>> {
    if samples.is_empty() {
        return Err(Error::Empty("no generated samples".into()));
    }
    let mut counts = vec![0usize; world.num_modes()];
    for x in samples {
        counts[nearest_mode(world, x)] += 1;
    }
    ModeDistribution::from_counts(&counts)
}

/// Discrete KL divergence; infinite when `p` puts mass where `q` has none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", bound = "T: Scalar")]
pub enum Divergence<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Divergence<T> {
    pub fn value(self) -> T {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => T::infinity(),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Divergence::Infinite)
    }
}

/// `sum_k p_k ln(p_k / q_k)` with `0 ln 0 = 0`.
pub fn discrete_kl<T: Scalar>(p: &ModeDistribution<T>, q: &ModeDistribution<T>) -> Result<Divergence<T>> {
    if p.probabilities.len() != q.probabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: p.probabilities.len(),
            actual: q.probabilities.len(),
        });
    }
    let mut kl = T::zero();
    for (&pk, &qk) in p.probabilities.iter().zip(&q.probabilities) {
        if pk == T::zero() {
            continue;
        }
        if qk == T::zero() {
            return Ok(Divergence::Infinite);
        }
        kl += pk * (pk / qk).ln();
    }
    Ok(Divergence::Finite(kl.max(T::zero())))
}

/// Settings of the three-way comparison between the tilted target, ZeNO and
/// the finite-difference Langevin baseline on the toy world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct Table1Settings<T> {
    pub zeno: ZenoConfig<T>,
    pub seeds: Vec<u64>,
    pub target_samples: usize,
    pub target_seed: u64,
    /// Seeds (a prefix of `seeds`) used to calibrate the baseline step size.
    pub calibration_seeds: usize,
    /// Relative tolerance on the matched update norm.
    pub match_tolerance: T,
    pub fd_epsilon: T,
}

impl<T: Scalar> Default for Table1Settings<T> {
    fn default() -> Self {
        Self {
            zeno: ZenoConfig::default(),
            seeds: (0..1000).collect(),
            target_samples: 100_000,
            target_seed: 0x7a72_6574,
            calibration_seeds: 32,
            match_tolerance: T::lit(0.05),
            fd_epsilon: T::lit(1e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Table1Report<T> {
    pub target: ModeDistribution<T>,
    pub zeno: ModeDistribution<T>,
    pub grad: ModeDistribution<T>,
    pub kl_zeno: Divergence<T>,
    pub kl_grad: Divergence<T>,
    /// Bootstrap standard errors of the two KL estimates (over seeds).
    pub kl_zeno_stderr: T,
    pub kl_grad_stderr: T,
    /// Terminal mode of each seed's final sample, in seed order.
    pub zeno_modes: Vec<usize>,
    pub grad_modes: Vec<usize>,
    /// Mean per-step displacement of the ZeNO chains.
    pub zeno_update_norm: T,
    pub grad_step_size: T,
    pub grad_update_norm: T,
    pub grad_noise_scale: T,
}

fn final_modes<T: Scalar>(bench: &ToyBench<T>, finals: &[Vec<T>]) -> Result<(ModeDistribution<T>, Vec<usize>)> {
    let points = finals
        .iter()
        .map(|z| {
            let x = bench.generator().generate(z)?;
            Ok([x[0], x[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    let modes = points.iter().map(|x| nearest_mode(bench.world(), x)).collect();
    Ok((empirical_mode_distribution(&points, bench.world())?, modes))
}

/// Bootstrap standard error of `KL(empirical(modes) || target)`, resampling
/// the per-seed modes with replacement.
pub fn bootstrap_kl_stderr<T: Scalar>(
    modes: &[usize],
    target: &ModeDistribution<T>,
    resamples: usize,
    seed: u64,
) -> Result<T> {
    if modes.is_empty() {
        return Err(Error::Empty("no modes to resample".into()));
    }
    if resamples < 2 {
        return Err(Error::param("resamples", "need at least two resamples"));
    }
    let k = target.probabilities.len();
    if modes.iter().any(|&m| m >= k) {
        return Err(Error::param("modes", "mode index outside the target"));
    }
    let kls = (0..resamples)
        .map(|b| {
            let mut rng = stream_for(seed, Purpose::Diagnostic, b as u64, 0);
            let mut counts = vec![0usize; k];
            for _ in 0..modes.len() {
                counts[modes[rng.random_range(0..modes.len())]] += 1;
            }
            Ok(discrete_kl(&ModeDistribution::from_counts(&counts)?, target)?.value())
        })
        .collect::<Result<Vec<T>>>()?;
    let n = T::from_usize_lossy(resamples);
    let mean = kls.iter().copied().sum::<T>() / n;
    let var = kls.iter().map(|&x| (x - mean).powi(2)).sum::<T>() / (n - T::one());
    Ok(var.sqrt())
}

const BOOTSTRAP_RESAMPLES: usize = 500;

fn grad_fleet<T: Scalar>(
    bench: &ToyBench<T>,
    seeds: &[u64],
    template: &FdLangevinConfig<T>,
) -> Result<Vec<crate::trace::RunTrace<T>>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = FdLangevinConfig {
                seed,
                ..template.clone()
            };
            fd_gradient_langevin(bench.generator(), bench.reward(), &bench.initial_noise(seed)?, &cfg)
        })
        .collect()
}

fn mean_update_norm<T: Scalar>(traces: &[crate::trace::RunTrace<T>]) -> T {
    let total: T = traces.iter().map(|t| t.mean_update_norm()).sum();
    total / T::from_usize_lossy(traces.len())
}

/// Tilted target vs. ZeNO vs. the norm-matched finite-difference baseline.
///
/// Both fleets start each seed from the same initial noise. The baseline's
/// step size is bisected until its mean realized per-step displacement on
/// the calibration seeds matches the ZeNO fleet's, with the Langevin noise
/// scale `sqrt(2 step)` tied to it.
pub fn run_table1<T: Scalar>(bench: &ToyBench<T>, settings: &Table1Settings<T>) -> Result<Table1Report<T>> {
    if settings.seeds.is_empty() {
        return Err(Error::Empty("seeds".into()));
    }
    let target = tilted_target_distribution(bench, settings.target_samples, settings.target_seed)?;

    let zeno_traces = run_zeno_fleet(bench, &settings.zeno, &settings.seeds)?;
    let zeno_finals: Vec<Vec<T>> = zeno_traces.iter().map(|t| t.final_noise.as_slice().to_vec()).collect();
    let (zeno, zeno_modes) = final_modes(bench, &zeno_finals)?;
    let zeno_update_norm = mean_update_norm(&zeno_traces);

    let template = FdLangevinConfig {
        steps: settings.zeno.iterations,
        fd_epsilon: settings.fd_epsilon,
        renormalize: settings.zeno.renormalize,
        ..FdLangevinConfig::default()
    };
    let calibration: Vec<u64> = settings
        .seeds
        .iter()
        .copied()
        .take(settings.calibration_seeds.max(1))
        .collect();
    let matched: StepMatch<T> = match_step_size(zeno_update_norm, settings.match_tolerance, |step| {
        let cfg = FdLangevinConfig {
            step_size: step,
            ..template.clone()
        };
        Ok(mean_update_norm(&grad_fleet(bench, &calibration, &cfg)?))
    })?;
    let grad_cfg = FdLangevinConfig {
        step_size: matched.step_size,
        ..template
    };
    let grad_traces = grad_fleet(bench, &settings.seeds, &grad_cfg)?;
    let grad_finals: Vec<Vec<T>> = grad_traces.iter().map(|t| t.final_noise.as_slice().to_vec()).collect();
    let (grad, grad_modes) = final_modes(bench, &grad_finals)?;

    Ok(Table1Report {
        kl_zeno: discrete_kl(&zeno, &target)?,
        kl_grad: discrete_kl(&grad, &target)?,
        kl_zeno_stderr: bootstrap_kl_stderr(&zeno_modes, &target, BOOTSTRAP_RESAMPLES, settings.target_seed)?,
        kl_grad_stderr: bootstrap_kl_stderr(&grad_modes, &target, BOOTSTRAP_RESAMPLES, settings.target_seed)?,
        zeno_modes,
        grad_modes,
        target,
        zeno,
        grad,
        zeno_update_norm,
        grad_step_size: matched.step_size,
        grad_update_norm: mean_update_norm(&grad_traces),
        grad_noise_scale: grad_cfg.noise_scale(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::split_rng;

    fn single_mode() -> GmmWorld<f64> {
        GmmWorld::new(vec![[0.0, 0.0]], vec![1.0], 1.0, vec![0.0], 1.0).unwrap()
    }

    fn two_modes() -> GmmWorld<f64> {
        GmmWorld::new(vec![[-3.0, 0.0], [3.0, 0.0]], vec![0.5, 0.5], 0.25, vec![1.0, 2.0], 1.0).unwrap()
    }

    /// Direct (non-log-space) mixture density.
    fn density_direct(w: &GmmWorld<f64>, x: &Point<f64>) -> f64 {
        w.means
            .iter()
            .zip(&w.weights)
            .map(|(mu, pi)| pi * (-dist2(x, mu) / (2.0 * w.variance)).exp() / (2.0 * PI * w.variance))
            .sum()
    }

    #[test]
    fn standard_normal_at_origin() {
        let v = gmm_log_density(&single_mode(), &[0.0, 0.0]);
        assert!((v + (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn midpoint_has_equal_responsibilities() {
        let r = two_modes().responsibilities(&[0.0, 1.3]);
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_density_matches_direct_sum() {
        let w = GmmWorld::<f64>::reconstructed_default();
        let mut rng = split_rng(2, 0);
        for _ in 0..200 {
            let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
            let direct = density_direct(&w, &x);
            if direct > 1e-200 {
                assert!((gmm_log_density(&w, &x) - direct.ln()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_mode_score_is_gaussian() {
        let w = GmmWorld::new(vec![[1.0, -2.0]], vec![1.0], 0.5, vec![0.0], 1.0).unwrap();
        let s = gmm_score(&w, &[0.3, 0.4]);
        assert_eq!(s, [(1.0 - 0.3) / 0.5, (-2.0 - 0.4) / 0.5]);
    }

    #[test]
    fn score_matches_finite_differences() {
        let w = GmmWorld::<f64>::reconstructed_default();
        let mut rng = split_rng(3, 0);
        let h = 1e-5;
        for _ in 0..200 {
            let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let s = gmm_score(&w, &x);
            let fx = (gmm_log_density(&w, &[x[0] + h, x[1]]) - gmm_log_density(&w, &[x[0] - h, x[1]])) / (2.0 * h);
            let fy = (gmm_log_density(&w, &[x[0], x[1] + h]) - gmm_log_density(&w, &[x[0], x[1] - h])) / (2.0 * h);
            let scale = 1.0 + s[0].abs().max(s[1].abs());
            assert!((s[0] - fx).abs() < 1e-6 * scale, "{s:?} vs {fx}");
            assert!((s[1] - fy).abs() < 1e-6 * scale, "{s:?} vs {fy}");
        }
    }

    #[test]
    fn score_vanishes_at_modes() {
        let w = GmmWorld::<f64>::reconstructed_default();
        for mu in &w.means {
            let s = gmm_score(&w, mu);
            assert!(s[0].hypot(s[1]) < 1e-6);
        }
    }

    #[test]
    fn flow_fixes_mode_means() {
        let w = GmmWorld::<f64>::reconstructed_default();
        for mu in &w.means {
            let x = flow_generate(&w, mu, 200, 0.05).unwrap();
            assert!(dist2(&x, mu).sqrt() < 1e-8);
        }
    }

    #[test]
    fn flow_converges_from_within_sigma() {
        let w = GmmWorld::<f64>::reconstructed_default();
        let sigma = w.sigma();
        let mut rng = split_rng(8, 0);
        for mu in &w.means {
            for _ in 0..20 {
                let angle: f64 = rng.random_range(0.0..2.0 * PI);
                let rad: f64 = rng.random_range(0.0..sigma);
                let z = [mu[0] + rad * angle.cos(), mu[1] + rad * angle.sin()];
                let x = flow_generate(&w, &z, 200, 0.05).unwrap();
                assert!(dist2(&x, mu).sqrt() < 0.05 * sigma);
            }
        }
    }

    #[test]
    fn flow_preserves_bisector() {
        let w = two_modes();
        for y in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let x = flow_generate(&w, &[0.0, y], 200, 0.05).unwrap();
            assert!(x[0].abs() < 1e-8);
        }
    }

    #[test]
    fn flow_rejects_bad_input() {
        let w = two_modes();
        assert!(flow_generate(&w, &[0.0], 10, 0.05).is_err());
        assert!(flow_generate(&w, &[0.0, 1.0], 0, 0.05).is_err());
    }

    #[test]
    fn mode_reward_rules() {
        let w = GmmWorld::<f64>::reconstructed_default();
        assert_eq!(mode_reward(&w, &w.means[2]).value(), w.mode_rewards[2]);
        let tie = GmmWorld::new(
            vec![[-1.0, 0.0], [1.0, 0.0], [0.0, 9.0]],
            vec![0.25, 0.25, 0.5],
            0.01,
            vec![5.0, 6.0, 7.0],
            1.0,
        )
        .unwrap();
        assert_eq!(mode_reward(&tie, &[0.0, 0.0]).value(), 5.0);
    }

    #[test]
    fn default_world_invariants() {
        let w = GmmWorld::<f64>::reconstructed_default();
        w.ensure_well_separated().unwrap();
        assert_eq!(w.num_modes(), 3);
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // exp(r_k) pi_k reproduces the target exactly.
        for (k, t) in DEFAULT_TARGET.iter().enumerate() {
            assert!((w.mode_rewards[k].exp() * w.weights[k] - t).abs() < 1e-12);
        }
        assert!(GmmWorld::on_circle(1.0, 0.5, &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn kl_cases() {
        let p = ModeDistribution::new(vec![0.2, 0.8]).unwrap();
        assert_eq!(discrete_kl(&p, &p).unwrap(), Divergence::Finite(0.0));
        let a = ModeDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = ModeDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!((discrete_kl(&a, &b).unwrap().value() - 2f64.ln()).abs() < 1e-15);
        assert!(discrete_kl(&b, &a).unwrap().is_infinite());
    }

    #[test]
    fn empirical_distribution_cases() {
        let w = GmmWorld::<f64>::reconstructed_default();
        let at_one = vec![w.means[1]; 150];
        assert_eq!(
            empirical_mode_distribution(&at_one, &w).unwrap().probabilities,
            vec![0.0, 1.0, 0.0]
        );
        let even: Vec<Point<f64>> = (0..300).map(|i| w.means[i % 3]).collect();
        let p = empirical_mode_distribution(&even, &w).unwrap();
        assert!(p.probabilities.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(empirical_mode_distribution(&[], &w).is_err());
    }

    #[test]
    fn bootstrap_of_constant_modes_is_zero() {
        let target = ModeDistribution::new(vec![0.2, 0.8]).unwrap();
        assert!(bootstrap_kl_stderr(&[1; 40], &target, 50, 0).unwrap() < 1e-15);
        let se = bootstrap_kl_stderr(&[0, 1, 1, 1, 1, 0, 1, 1, 1, 1], &target, 200, 0).unwrap();
        assert!(se > 0.0 && se < 1.0);
        assert!(bootstrap_kl_stderr(&[2], &target, 50, 0).is_err());
    }

    #[test]
    fn simplex_is_enforced() {
        assert!(ModeDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ModeDistribution::new(vec![-0.1, 1.1]).is_err());
    }
}
