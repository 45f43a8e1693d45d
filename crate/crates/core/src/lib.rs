//! Zeroth-order reward steering of a frozen generator through its input noise.
//!
//! A noise vector `z` is driven by a discretized Ornstein-Uhlenbeck chain
//! whose drift is a control estimated from rewards of `N` perturbed copies of
//! `z`. Only forward evaluations of the generator and the reward are needed.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod config;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod se3;
pub mod toybench;
pub mod trace;

pub use baselines::{best_of_n, fd_gradient, fd_gradient_langevin, match_step_size, FdLangevinConfig, StepMatch};
pub use bench::{run_zeno_fleet, Bench, QuadraticReward, SphereQuadratic};
pub use config::{EstimatorKind, ZenoConfig};
pub use error::{Error, Result};
pub use estimators::{
    centered_exponential_control, estimate_control, exponential_control, linearized_control, ControlVector,
    ParticleBatch,
};
pub use metrics::{estimator_sweep, mean_and_stderr, scaling_sweep, vendi_score, SweepRow};
pub use model::{evaluate, FnGenerator, FnReward, Generator, Identity, Reward, RewardValue};
pub use noise::{renormalize_to_sqrt_d, sample_standard_gaussian, NoiseVector};
pub use optimizer::{
    horizon_decay_coefficient, ou_step, zeno_optimize, zeno_optimize_observed, OuStepInputs, ZenoChain,
};
pub use scalar::Scalar;
pub use se3::{
    se3_control, se3_update, se3_zeno_optimize, so3_exp, so3_log, AdvantageBaseline, FrameMatchReward, FramePose,
    FrameSet, Se3RunTrace, Se3ZenoConfig,
};
pub use toybench::{
    discrete_kl, empirical_mode_distribution, flow_generate, gmm_log_density, gmm_score, mode_reward, run_table1,
    tilted_target_distribution, Divergence, FlowSettings, GmmWorld, ModeDistribution, Table1Report, Table1Settings,
    ToyBench,
};
pub use trace::{RunTrace, TraceEntry};

pub type Noise = NoiseVector<f64>;
pub type Config = ZenoConfig<f64>;
pub type Trace = RunTrace<f64>;
pub type World = GmmWorld<f64>;
pub type Frames = FrameSet<f64>;
pub type Se3Config = Se3ZenoConfig<f64>;
pub type Noise32 = NoiseVector<f32>;
pub type Config32 = ZenoConfig<f32>;
