//! Diversity and run-level statistics for scaling and estimator studies.

use serde::{Deserialize, Serialize};

use crate::bench::{run_zeno_fleet, Bench};
use crate::config::{EstimatorKind, ZenoConfig};
use crate::error::{Error, Result};
use crate::model::Generator;
use crate::scalar::{vecops, Scalar};

/// Sample mean and standard error of the mean (`n - 1` denominator).
pub fn mean_and_stderr<T: Scalar>(values: &[T]) -> Result<(T, T)> {
    if values.is_empty() {
        return Err(Error::Empty("no values to summarize".into()));
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() == 1 {
        return Ok((mean, T::zero()));
    }
    let var = values.iter().map(|&v| (v - mean).powi(2)).sum::<T>() / (n - T::one());
    Ok((mean, (var / n).sqrt()))
}

/// Symmetric `n x n` matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Cosine similarities of the embeddings.
    pub fn cosine(embeddings: &[Vec<T>]) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::Empty("embeddings".into()));
        }
        let dim = embeddings[0].len();
        let mut unit = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.len(),
                });
            }
            let norm = vecops::norm(e);
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::DegenerateNorm);
            }
            unit.push(e.iter().map(|&x| x / norm).collect::<Vec<T>>());
        }
        let n = unit.len();
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
            for j in i + 1..n {
                let s = vecops::dot(&unit[i], &unit[j]).max(-T::one()).min(T::one());
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        symmetric_eigenvalues(self.n, self.data.clone())
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(n: usize, mut a: Vec<T>) -> Vec<T> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let total: T = a.iter().map(|&x| x * x).sum();
    let threshold = total * T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

/// `exp(-sum_j l_j ln l_j)` over the eigenvalues `l_j` of `K / n`, with `K`
/// the cosine-similarity matrix. Lies in `[1, n]`.
pub fn vendi_score<T: Scalar>(embeddings: &[Vec<T>]) -> Result<T> {
    let k = SimilarityMatrix::cosine(embeddings)?;
    let n = T::from_usize_lossy(k.size());
    let mut entropy = T::zero();
    for l in k.eigenvalues() {
        let l = l / n;
        if l > T::zero() {
            entropy -= l * l.ln();
        }
    }
    Ok(entropy.exp().max(T::one()).min(n))
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepRow<T> {
    pub estimator: EstimatorKind,
    #[serde(rename = "N")]
    pub particles: usize,
    #[serde(rename = "M")]
    pub iterations: usize,
    pub seed_count: usize,
    /// Mean over seeds of the best reward found.
    pub mean_reward: T,
    pub stderr: T,
    /// Vendi score of the final generated samples across seeds.
    pub mean_vendi: T,
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "estimator",
    "N",
    "M",
    "seed_count",
    "mean_reward",
    "stderr",
    "mean_vendi",
];

fn check_sweep(seeds: &[u64], grids: &[&[usize]]) -> Result<()> {
    if seeds.len() < 10 {
        return Err(Error::param("seeds", "sweeps need at least 10 seeds per cell"));
    }
    if grids.iter().any(|g| g.is_empty()) {
        return Err(Error::Empty("sweep grid".into()));
    }
    Ok(())
}

/// Runs one fleet and summarizes it.
pub fn sweep_cell<T, B>(bench: &B, config: &ZenoConfig<T>, seeds: &[u64]) -> Result<SweepRow<T>>
where
    T: Scalar,
    B: Bench<T> + ?Sized,
{
    let traces = run_zeno_fleet(bench, config, seeds)?;
    let best: Vec<T> = traces.iter().map(|t| t.best_reward).collect();
    let (mean_reward, stderr) = mean_and_stderr(&best)?;
    let samples = traces
        .iter()
        .map(|t| bench.generator().generate(t.final_noise.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        estimator: config.estimator,
        particles: config.particles,
        iterations: config.iterations,
        seed_count: seeds.len(),
        mean_reward,
        stderr,
        mean_vendi: vendi_score(&samples)?,
    })
}

/// Every `(N, M)` cell of the grid product, `N` varying fastest.
pub fn scaling_sweep<T, B>(
    bench: &B,
    base: &ZenoConfig<T>,
    n_grid: &[usize],
    m_grid: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow<T>>>
where
    T: Scalar,
    B: Bench<T> + ?Sized,
{
    check_sweep(seeds, &[n_grid, m_grid])?;
    let mut rows = Vec::with_capacity(n_grid.len() * m_grid.len());
    for &m in m_grid {
        for &n in n_grid {
            let cfg = ZenoConfig {
                particles: n,
                iterations: m,
                ..base.clone()
            };
            rows.push(sweep_cell(bench, &cfg, seeds)?);
        }
    }
    Ok(rows)
}

/// Every estimator at every `N`, with `M` from `base`.
pub fn estimator_sweep<T, B>(
    bench: &B,
    base: &ZenoConfig<T>,
    n_grid: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow<T>>>
where
    T: Scalar,
    B: Bench<T> + ?Sized,
{
    check_sweep(seeds, &[n_grid])?;
    let mut rows = Vec::new();
    for kind in EstimatorKind::ALL {
        for &n in n_grid {
            let cfg = ZenoConfig {
                particles: n,
                estimator: kind,
                ..base.clone()
            };
            rows.push(sweep_cell(bench, &cfg, seeds)?);
        }
    }
    Ok(rows)
}

/// Whether `values` never drops by more than the larger of the two
/// neighbouring stderrs.
pub fn non_decreasing_within_stderr<T: Scalar>(rows: &[SweepRow<T>]) -> bool {
    rows.windows(2)
        .all(|w| w[1].mean_reward >= w[0].mean_reward - w[0].stderr.max(w[1].stderr))
}
