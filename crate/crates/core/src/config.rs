use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How particle rewards are turned into a control direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Advantage-weighted perturbation average. Ignores `lambda`.
    Linearized,
    /// Softmax(r / lambda)-weighted perturbation average.
    Exponential,
    /// Exponential weighting applied to mean-centered rewards.
    CenteredExponential,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Linearized,
        EstimatorKind::Exponential,
        EstimatorKind::CenteredExponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Linearized => "linearized",
            EstimatorKind::Exponential => "exponential",
            EstimatorKind::CenteredExponential => "centered-exponential",
        }
    }
}

/// Hyperparameters of a ZeNO run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct ZenoConfig<T> {
    /// Variance of one discretized OU step, in (0, 1).
    pub beta: T,
    /// Control step size.
    pub eta: T,
    /// Particles per iteration, at least 2.
    pub particles: usize,
    /// Outer iterations, at least 1.
    pub iterations: usize,
    pub estimator: EstimatorKind,
    /// Temperature of the exponential estimators. The linearized estimator
    /// folds it into `eta`.
    pub lambda: T,
    pub seed: u64,
    /// Project the chain state back onto the radius-sqrt(d) sphere after
    /// every update.
    pub renormalize: bool,
}

impl<T: Scalar> Default for ZenoConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::lit(0.01),
            eta: T::lit(1.5),
            particles: 16,
            iterations: 200,
            estimator: EstimatorKind::Linearized,
            lambda: T::one(),
            seed: 0,
            renormalize: true,
        }
    }
}

impl<T: Scalar> ZenoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::param("beta", format!("must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.eta > T::zero() && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {}", self.eta)));
        }
        if !(self.lambda > T::zero() && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.particles < 2 {
            return Err(Error::param(
                "particles",
                format!("need at least 2 particles, got {}", self.particles),
            ));
        }
        if self.iterations < 1 {
            return Err(Error::param("iterations", "need at least 1 iteration"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ZenoConfig::<f64>::default();
        c.validate().unwrap();
        assert_eq!((c.beta, c.eta, c.particles, c.iterations), (0.01, 1.5, 16, 200));
    }

    #[test]
    fn invalid_fields_are_named() {
        let bad = ZenoConfig::<f64> {
            beta: 1.5,
            ..Default::default()
        };
        match bad.validate() {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = ZenoConfig::<f64> {
            particles: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ZenoConfig::<f64> {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
