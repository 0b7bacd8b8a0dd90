//! Deterministic random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the run
//! seed and a stream id, so adding a new consumer never shifts the draws of
//! an existing one and results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

pub type StreamRng = ChaCha8Rng;

/// Stream ids used across the crate.
pub mod streams {
    pub const GRAPH: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const TEACHER: u64 = 4;
    pub const INIT: u64 = 5;
    /// Monte-Carlo draw `k` of the auxiliary matrix uses stream `XI_BASE + k`.
    pub const XI_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> alloc::vec::Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}
