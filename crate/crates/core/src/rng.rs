//! Seeded, splittable randomness.
//!
//! Every random draw in a run comes from a ChaCha stream addressed by
//! `(seed, purpose, iteration, particle)`. Streams never share state, so
//! evaluating particles on any number of threads yields the same numbers as a
//! sequential loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

pub type SeededStream = ChaCha8Rng;

const ITERATION_BITS: u32 = 28;
const PARTICLE_BITS: u32 = 28;

/// What a stream is used for. Distinct purposes never alias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Initial = 1,
    Proposal = 2,
    Fresh = 3,
    BestOfN = 4,
    Baseline = 5,
    Target = 6,
    World = 7,
    Perturbation = 8,
    Diagnostic = 9,
}

/// Returns the independent stream `stream` of the generator keyed by `seed`.
pub fn split_rng(seed: u64, stream: u64) -> SeededStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Packs `(purpose, iteration, particle)` into a stream id without collisions.
///
/// Panics if `iteration` or `particle` exceed 2^28.
pub fn stream_id(purpose: Purpose, iteration: u64, particle: u64) -> u64 {
    assert!(iteration < 1 << ITERATION_BITS, "iteration index out of range");
    assert!(particle < 1 << PARTICLE_BITS, "particle index out of range");
    ((purpose as u64) << (ITERATION_BITS + PARTICLE_BITS)) | (iteration << PARTICLE_BITS) | particle
}

pub fn stream_for(seed: u64, purpose: Purpose, iteration: u64, particle: u64) -> SeededStream {
    split_rng(seed, stream_id(purpose, iteration, particle))
}

/// Draws `d` i.i.d. standard normals. Sampling happens in `f64` so that `f32`
/// and `f64` runs see the same underlying draws.
pub(crate) fn gaussian_vec<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    (0..d).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}
