//! Noise-space state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::gaussian_vec;
use crate::scalar::{vecops, Scalar};

/// A point in the generator's noise space, with standard-Gaussian semantics.
///
/// Always at least one-dimensional with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct NoiseVector<T> {
    data: Vec<T>,
}

impl<T: Scalar> NoiseVector<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidDimension("noise dimension must be at least 1".into()));
        }
        if !vecops::all_finite(&data) {
            return Err(Error::NonFinite("noise vector".into()));
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn norm(&self) -> T {
        vecops::norm(&self.data)
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for NoiseVector<T> {
    type Error = Error;

    fn try_from(data: Vec<T>) -> Result<Self> {
        Self::new(data)
    }
}

impl<T> From<NoiseVector<T>> for Vec<T> {
    fn from(z: NoiseVector<T>) -> Self {
        z.data
    }
}

impl<T> AsRef<[T]> for NoiseVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.data
    }
}

/// Draws `z ~ N(0, I_d)` from `rng`.
pub fn sample_standard_gaussian<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<NoiseVector<T>> {
    if d == 0 {
        return Err(Error::InvalidDimension("cannot sample a 0-dimensional noise".into()));
    }
    NoiseVector::new(gaussian_vec(d, rng))
}

/// Rescales `z` onto the sphere of radius `sqrt(d)`, the expected norm of a
/// standard Gaussian vector in `d` dimensions.
pub fn renormalize_to_sqrt_d<T: Scalar>(z: &NoiseVector<T>) -> Result<NoiseVector<T>> {
    let norm = z.norm();
    if norm == T::zero() {
        return Err(Error::DegenerateNorm);
    }
    let scale = T::from_usize_lossy(z.dim()).sqrt() / norm;
    NoiseVector::new(z.data.iter().map(|&x| x * scale).collect())
}
