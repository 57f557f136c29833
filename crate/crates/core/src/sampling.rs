//! Seeded sampling.  Every random draw in the crate goes through a
//! ChaCha stream derived from a 64-bit seed and a stream id, so that
//! independent consumers never share a sequence.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 42;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform point in an axis-aligned box.
pub fn in_box(rng: &mut impl Rng, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(bounds.len(), bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)))
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.random_range(lo..=hi)))
}
