//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the optimizer and test-beds are written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense vector helpers with a fixed left-to-right summation order.
pub(crate) mod vecops {
    use super::Scalar;

    pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    }

    pub fn norm<T: Scalar>(a: &[T]) -> T {
        dot(a, a).sqrt()
    }

    pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
        a.iter().all(|x| x.is_finite())
    }

    /// `a * x + b * y`
    pub fn lincomb<T: Scalar>(a: T, x: &[T], b: T, y: &[T]) -> Vec<T> {
        x.iter().zip(y).map(|(&xi, &yi)| a * xi + b * yi).collect()
    }

    pub fn sub<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
        x.iter().zip(y).map(|(&a, &b)| a - b).collect()
    }
}
