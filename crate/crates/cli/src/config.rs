//! Run-file schema and its validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use zeno::baselines::FdLangevinConfig;
use zeno::se3::Se3ZenoConfig;
use zeno::toybench::{FlowSettings, DEFAULT_TARGET};
use zeno::{Error, GmmWorld, SphereQuadratic, Table1Settings, ToyBench, ZenoConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    ToyGmm,
    SphereQuadratic,
    Se3Match,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Zeno,
    BestOfN,
    FdLangevin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range(SeedRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl SeedSpec {
    pub fn expand(&self, offset: u64) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.iter().map(|s| s.wrapping_add(offset)).collect(),
            SeedSpec::Range(r) => (0..r.count)
                .map(|i| r.start.wrapping_add(offset).wrapping_add(i))
                .collect(),
        }
    }
}

/// Toy-world overrides: modes on a circle with the given tilted target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSettings {
    pub radius: f64,
    pub sigma: f64,
    pub targets: Vec<f64>,
    pub lambda: f64,
    pub flow_steps: usize,
    pub flow_step_size: f64,
}

impl Default for WorldSettings {
    fn default() -> Self {
        let flow = FlowSettings::<f64>::default();
        Self {
            radius: 4.0,
            sigma: 0.5,
            targets: DEFAULT_TARGET.to_vec(),
            lambda: 1.0,
            flow_steps: flow.steps,
            flow_step_size: flow.step_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereSettings {
    pub dim: usize,
}

impl Default for SphereSettings {
    fn default() -> Self {
        Self { dim: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSettings {
    pub residues: usize,
}

impl Default for FrameSettings {
    fn default() -> Self {
        Self { residues: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BestOfNSettings {
    /// Defaults to the ZeNO evaluation budget `particles * iterations`.
    pub candidates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Table1Options {
    pub target_samples: usize,
    pub target_seed: u64,
    pub calibration_seeds: usize,
    pub match_tolerance: f64,
    pub fd_epsilon: f64,
}

impl Default for Table1Options {
    fn default() -> Self {
        let d = Table1Settings::<f64>::default();
        Self {
            target_samples: d.target_samples,
            target_seed: d.target_seed,
            calibration_seeds: d.calibration_seeds,
            match_tolerance: d.match_tolerance,
            fd_epsilon: d.fd_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub n_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            n_grid: vec![2, 4, 8, 16],
            m_grid: vec![25, 50, 100, 200],
        }
    }
}

/// The whole run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: BenchmarkKind,
    #[serde(default)]
    pub method: Method,
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub zeno: ZenoConfig<f64>,
    #[serde(default)]
    pub se3: Se3ZenoConfig<f64>,
    #[serde(default)]
    pub world: WorldSettings,
    #[serde(default)]
    pub sphere: SphereSettings,
    #[serde(default)]
    pub frames: FrameSettings,
    #[serde(default)]
    pub best_of_n: BestOfNSettings,
    #[serde(default)]
    pub fd_langevin: FdLangevinConfig<f64>,
    #[serde(default)]
    pub table1: Table1Options,
    #[serde(default)]
    pub sweep: SweepSettings,
}

fn in_section(section: &str, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { field, message } => CliError::Config {
            field: Some(format!("{section}.{field}")),
            message,
        },
        other => CliError::Config {
            field: Some(section.to_string()),
            message: other.to_string(),
        },
    }
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: Some(field.to_string()),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            field: None,
            message: e.to_string(),
        })
    }

    pub fn toy_bench(&self) -> Result<ToyBench<f64>, CliError> {
        let w = &self.world;
        let world = GmmWorld::on_circle(w.radius, w.sigma, &w.targets, w.lambda).map_err(|e| in_section("world", e))?;
        let flow = FlowSettings {
            steps: w.flow_steps,
            step_size: w.flow_step_size,
        };
        if flow.steps == 0 || !(flow.step_size > 0.0) {
            return Err(field_error(
                "world.flow_steps",
                "flow needs steps >= 1 and flow_step_size > 0",
            ));
        }
        ToyBench::new(world, flow).map_err(|e| in_section("world", e))
    }

    pub fn sphere_bench(&self) -> Result<SphereQuadratic<f64>, CliError> {
        SphereQuadratic::new(self.sphere.dim).map_err(|e| in_section("sphere", e))
    }

    pub fn best_of_n_candidates(&self) -> usize {
        self.best_of_n
            .candidates
            .unwrap_or(self.zeno.particles * self.zeno.iterations)
    }

    /// Checks every section the command will touch, before any computation.
    pub fn validate(&self, seeds: &[u64]) -> Result<(), CliError> {
        if seeds.is_empty() {
            return Err(field_error("seeds", "no seeds to run"));
        }
        self.zeno.validate().map_err(|e| in_section("zeno", e))?;
        match self.benchmark {
            BenchmarkKind::ToyGmm => {
                self.toy_bench()?;
            }
            BenchmarkKind::SphereQuadratic => {
                self.sphere_bench()?;
            }
            BenchmarkKind::Se3Match => {
                self.se3.validate().map_err(|e| in_section("se3", e))?;
                if self.frames.residues < 2 {
                    return Err(field_error("frames.residues", "need at least two residues"));
                }
                if self.method != Method::Zeno {
                    return Err(field_error("method", "se3-match only supports the zeno method"));
                }
            }
        }
        match self.method {
            Method::Zeno => {}
            Method::BestOfN => {
                if self.best_of_n_candidates() == 0 {
                    return Err(field_error("best_of_n.candidates", "need at least one candidate"));
                }
            }
            Method::FdLangevin => self.fd_langevin.validate().map_err(|e| in_section("fd_langevin", e))?,
        }
        Ok(())
    }

    pub fn validate_table1(&self, seeds: &[u64]) -> Result<(), CliError> {
        self.validate(seeds)?;
        if self.benchmark != BenchmarkKind::ToyGmm {
            return Err(field_error("benchmark", "table1 needs the toy-gmm benchmark"));
        }
        let t = &self.table1;
        if t.target_samples < 10_000 {
            return Err(field_error("table1.target_samples", "need at least 10^4 samples"));
        }
        if !(t.match_tolerance > 0.0) {
            return Err(field_error("table1.match_tolerance", "must be positive"));
        }
        if !(t.fd_epsilon > 0.0) {
            return Err(field_error("table1.fd_epsilon", "must be positive"));
        }
        Ok(())
    }

    pub fn validate_sweep(&self, seeds: &[u64], needs_m_grid: bool) -> Result<(), CliError> {
        self.validate(seeds)?;
        if self.benchmark == BenchmarkKind::Se3Match {
            return Err(field_error("benchmark", "sweeps run on toy-gmm or sphere-quadratic"));
        }
        if seeds.len() < 10 {
            return Err(field_error("seeds", "sweeps need at least 10 seeds"));
        }
        if self.sweep.n_grid.is_empty() || self.sweep.n_grid.iter().any(|&n| n < 2) {
            return Err(field_error(
                "sweep.n_grid",
                "need a non-empty grid of particle counts >= 2",
            ));
        }
        if needs_m_grid && (self.sweep.m_grid.is_empty() || self.sweep.m_grid.contains(&0)) {
            return Err(field_error(
                "sweep.m_grid",
                "need a non-empty grid of iteration counts >= 1",
            ));
        }
        Ok(())
    }

    pub fn table1_settings(&self, seeds: &[u64]) -> Table1Settings<f64> {
        let t = &self.table1;
        Table1Settings {
            zeno: self.zeno.clone(),
            seeds: seeds.to_vec(),
            target_samples: t.target_samples,
            target_seed: t.target_seed,
            calibration_seeds: t.calibration_seeds,
            match_tolerance: t.match_tolerance,
            fd_epsilon: t.fd_epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_parses_with_defaults() {
        let cfg = RunConfig::parse("benchmark = \"toy-gmm\"\nseeds = [1, 2]\n").unwrap();
        assert_eq!(cfg.method, Method::Zeno);
        assert_eq!(cfg.zeno, ZenoConfig::default());
        assert_eq!(cfg.seeds.expand(10), vec![11, 12]);
    }

    #[test]
    fn seed_ranges_expand() {
        let cfg = RunConfig::parse("benchmark = \"sphere-quadratic\"\nseeds = { start = 5, count = 3 }\n").unwrap();
        assert_eq!(cfg.seeds.expand(0), vec![5, 6, 7]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("benchmark = \"toy-gmm\"\nseeds = [1]\nbogus = 3\n").is_err());
        assert!(RunConfig::parse("benchmark = \"toy-gmm\"\nseeds = [1]\n[zeno]\nbta = 0.1\n").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = RunConfig::parse("benchmark = \"toy-gmm\"\nseeds = [1]\n[zeno]\nbeta = 1.5\n").unwrap();
        match cfg.validate(&[1]).unwrap_err() {
            CliError::Config { field, .. } => assert_eq!(field.as_deref(), Some("zeno.beta")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infinite_lambda_is_accepted() {
        let cfg = RunConfig::parse("benchmark = \"toy-gmm\"\nseeds = [1]\n[world]\nlambda = inf\n").unwrap();
        cfg.validate(&[1]).unwrap();
    }
}
