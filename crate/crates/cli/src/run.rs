//! Command implementations.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use zeno::baselines::{best_of_n, fd_gradient_langevin, FdLangevinConfig};
use zeno::bench::{Bench, SphereQuadratic};
use zeno::se3::{frame_match_problem, se3_zeno_optimize, IdentityFrames, Se3RunTrace, Se3ZenoConfig};
use zeno::{
    estimator_sweep, run_table1, scaling_sweep, zeno_optimize_observed, Generator, NoiseVector, Reward, RunTrace,
    ToyBench,
};

use crate::config::{BenchmarkKind, Method, RunConfig};
use crate::output::{config_hash, Header, OutputDir, TOOL, VERSION};
use crate::{CliError, Common, SweepKind};

struct Prepared {
    config: RunConfig,
    seeds: Vec<u64>,
    header: Header,
    out: OutputDir,
    pool: rayon::ThreadPool,
}

fn prepare(
    common: &Common,
    command: &str,
    validate: impl FnOnce(&RunConfig, &[u64]) -> Result<(), CliError>,
) -> Result<Prepared, CliError> {
    let text = fs::read_to_string(&common.config).map_err(|e| CliError::Config {
        field: None,
        message: format!("{}: {e}", common.config.display()),
    })?;
    let config = RunConfig::parse(&text)?;
    let seeds = config.seeds.expand(common.seed_offset);
    validate(&config, &seeds)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let root = common
        .output
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("zeno-out"));
    let header = Header {
        tool: TOOL,
        version: VERSION,
        command: command.to_string(),
        config_sha256: config_hash(&config, &seeds),
        seeds: seeds.clone(),
    };
    Ok(Prepared {
        config,
        seeds,
        header,
        out: OutputDir::create(root)?,
        pool,
    })
}

enum NoiseBench {
    Toy(ToyBench<f64>),
    Sphere(SphereQuadratic<f64>),
}

macro_rules! with_bench {
    ($nb:expr, $b:ident => $body:expr) => {
        match $nb {
            NoiseBench::Toy($b) => $body,
            NoiseBench::Sphere($b) => $body,
        }
    };
}

fn noise_bench(config: &RunConfig) -> Result<NoiseBench, CliError> {
    match config.benchmark {
        BenchmarkKind::ToyGmm => Ok(NoiseBench::Toy(config.toy_bench()?)),
        BenchmarkKind::SphereQuadratic => Ok(NoiseBench::Sphere(config.sphere_bench()?)),
        BenchmarkKind::Se3Match => Err(CliError::Config {
            field: Some("benchmark".into()),
            message: "not a noise-space benchmark".into(),
        }),
    }
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    seed: u64,
    benchmark: &'static str,
    method: &'static str,
    best_reward: f64,
    final_reward: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct BestOfNResult {
    best_noise: NoiseVector<f64>,
    best_reward: f64,
    candidates: usize,
}

enum SeedOutcome {
    Trace(RunTrace<f64>, Option<Vec<Vec<String>>>),
    BestOfN(BestOfNResult),
    Frames(Se3RunTrace<f64>),
}

impl SeedOutcome {
    fn rewards(&self) -> (f64, f64, usize) {
        match self {
            SeedOutcome::Trace(t, _) => (
                t.best_reward,
                t.entries.last().map_or(t.best_reward, |e| e.state_reward),
                t.entries.len(),
            ),
            SeedOutcome::BestOfN(b) => (b.best_reward, b.best_reward, 0),
            SeedOutcome::Frames(t) => (t.best_reward, t.final_reward(), t.entries.len()),
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn trajectory_row<B: Bench<f64>>(bench: &B, iteration: usize, z: &NoiseVector<f64>) -> Result<Vec<String>, CliError> {
    let x = bench.generator().generate(z.as_slice())?;
    let r = bench.reward().reward(&x)?;
    let mut row = vec![iteration.to_string()];
    row.extend(z.as_slice().iter().copied().map(fmt));
    row.extend(x.iter().copied().map(fmt));
    row.push(fmt(r));
    Ok(row)
}

fn run_noise_seed<B: Bench<f64>>(
    bench: &B,
    config: &RunConfig,
    seed: u64,
    dump: bool,
) -> Result<SeedOutcome, CliError> {
    match config.method {
        Method::Zeno => {
            let z0 = bench.initial_noise(seed)?;
            let cfg = config.zeno.clone().with_seed(seed);
            let mut states = Vec::new();
            let trace = zeno_optimize_observed(bench.generator(), bench.reward(), &z0, &cfg, |step| {
                if dump {
                    states.push(step.state.clone());
                }
            })?;
            let rows = if dump {
                let mut rows = vec![trajectory_row(bench, 0, &z0)?];
                for (m, z) in states.iter().enumerate() {
                    rows.push(trajectory_row(bench, m + 1, z)?);
                }
                Some(rows)
            } else {
                None
            };
            Ok(SeedOutcome::Trace(trace, rows))
        }
        Method::FdLangevin => {
            let z0 = bench.initial_noise(seed)?;
            let cfg = FdLangevinConfig {
                seed,
                ..config.fd_langevin.clone()
            };
            Ok(SeedOutcome::Trace(
                fd_gradient_langevin(bench.generator(), bench.reward(), &z0, &cfg)?,
                None,
            ))
        }
        Method::BestOfN => {
            let n = config.best_of_n_candidates();
            let (best_noise, r) = best_of_n(bench.generator(), bench.reward(), bench.noise_dim(), n, seed)?;
            Ok(SeedOutcome::BestOfN(BestOfNResult {
                best_noise,
                best_reward: r.value(),
                candidates: n,
            }))
        }
    }
}

fn run_frames_seed(config: &RunConfig, seed: u64) -> Result<SeedOutcome, CliError> {
    let (x0, reward) = frame_match_problem::<f64>(config.frames.residues, seed)?;
    let cfg = Se3ZenoConfig {
        seed,
        ..config.se3.clone()
    };
    Ok(SeedOutcome::Frames(se3_zeno_optimize(
        &IdentityFrames,
        &reward,
        &x0,
        &cfg,
    )?))
}

fn benchmark_name(kind: BenchmarkKind) -> &'static str {
    match kind {
        BenchmarkKind::ToyGmm => "toy-gmm",
        BenchmarkKind::SphereQuadratic => "sphere-quadratic",
        BenchmarkKind::Se3Match => "se3-match",
    }
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::Zeno => "zeno",
        Method::BestOfN => "best-of-n",
        Method::FdLangevin => "fd-langevin",
    }
}

pub fn optimize(common: &Common, dump_trajectories: bool) -> Result<Vec<PathBuf>, CliError> {
    let p = prepare(common, "optimize", |c, s| {
        c.validate(s)?;
        if dump_trajectories && (c.method != Method::Zeno || c.benchmark == BenchmarkKind::Se3Match) {
            return Err(CliError::Config {
                field: Some("dump-trajectories".into()),
                message: "trajectory dumps need the zeno method on a noise-space benchmark".into(),
            });
        }
        Ok(())
    })?;
    let config = &p.config;
    let bench = match config.benchmark {
        BenchmarkKind::Se3Match => None,
        _ => Some(noise_bench(config)?),
    };
    let outcomes: Vec<SeedOutcome> = p.pool.install(|| {
        p.seeds
            .par_iter()
            .map(|&seed| match &bench {
                Some(nb) => with_bench!(nb, b => run_noise_seed(b, config, seed, dump_trajectories)),
                None => run_frames_seed(config, seed),
            })
            .collect::<Result<_, CliError>>()
    })?;

    let mut written = Vec::new();
    let mut summary = Vec::with_capacity(outcomes.len());
    for (&seed, outcome) in p.seeds.iter().zip(&outcomes) {
        let header = p.header.for_seeds(&[seed]);
        let name = format!("traces/seed-{seed}.json");
        written.push(match outcome {
            SeedOutcome::Trace(t, _) => p.out.write_json(&name, &header, t)?,
            SeedOutcome::BestOfN(b) => p.out.write_json(&name, &header, b)?,
            SeedOutcome::Frames(t) => p.out.write_json(&name, &header, t)?,
        });
        if let SeedOutcome::Trace(t, Some(rows)) = outcome {
            let d = t.final_noise.dim();
            let k = rows[0].len() - d - 2;
            let mut columns = vec!["iteration".to_string()];
            columns.extend((0..d).map(|i| format!("z{i}")));
            columns.extend((0..k).map(|i| format!("x{i}")));
            columns.push("reward".into());
            written.push(
                p.out
                    .write_table(&format!("trajectories/seed-{seed}.csv"), &header, &columns, rows)?,
            );
        }
        let (best_reward, final_reward, iterations) = outcome.rewards();
        summary.push(SummaryRow {
            seed,
            benchmark: benchmark_name(config.benchmark),
            method: method_name(config.method),
            best_reward,
            final_reward,
            iterations,
        });
    }
    written.push(p.out.write_csv("summary.csv", &p.header, &summary)?);
    Ok(written)
}

pub fn table1(common: &Common) -> Result<Vec<PathBuf>, CliError> {
    let p = prepare(common, "table1", |c, s| c.validate_table1(s))?;
    let bench = p.config.toy_bench()?;
    let settings = p.config.table1_settings(&p.seeds);
    let report = p.pool.install(|| run_table1(&bench, &settings))?;

    let k = report.target.probabilities.len();
    let mut columns = vec!["method".to_string()];
    columns.extend((0..k).map(|i| format!("p_mode{i}")));
    columns.extend(["kl".to_string(), "kl_stderr".to_string()]);
    let row = |name: &str, probs: &[f64], kl: Option<(f64, f64)>| {
        let mut r = vec![name.to_string()];
        r.extend(probs.iter().copied().map(fmt));
        match kl {
            Some((v, se)) => r.extend([fmt(v), fmt(se)]),
            None => r.extend([String::new(), String::new()]),
        }
        r
    };
    let rows = vec![
        row("Target", &report.target.probabilities, None),
        row(
            "Ours",
            &report.zeno.probabilities,
            Some((report.kl_zeno.value(), report.kl_zeno_stderr)),
        ),
        row(
            "Grad",
            &report.grad.probabilities,
            Some((report.kl_grad.value(), report.kl_grad_stderr)),
        ),
    ];
    Ok(vec![
        p.out.write_json("table1.json", &p.header, &report)?,
        p.out.write_table("table1.csv", &p.header, &columns, &rows)?,
    ])
}

pub fn sweep(common: &Common, kind: SweepKind) -> Result<Vec<PathBuf>, CliError> {
    let command = match kind {
        SweepKind::Scaling => "sweep scaling",
        SweepKind::Estimators => "sweep estimators",
    };
    let p = prepare(common, command, |c, s| {
        c.validate_sweep(s, matches!(kind, SweepKind::Scaling))
    })?;
    let bench = noise_bench(&p.config)?;
    let grid = &p.config.sweep;
    let rows = p.pool.install(|| {
        with_bench!(&bench, b => match kind {
            SweepKind::Scaling => scaling_sweep(b, &p.config.zeno, &grid.n_grid, &grid.m_grid, &p.seeds),
            SweepKind::Estimators => estimator_sweep(b, &p.config.zeno, &grid.n_grid, &p.seeds),
        })
    })?;
    let name = match kind {
        SweepKind::Scaling => "sweep-scaling.csv",
        SweepKind::Estimators => "sweep-estimators.csv",
    };
    Ok(vec![p.out.write_csv(name, &p.header, &rows)?])
}
