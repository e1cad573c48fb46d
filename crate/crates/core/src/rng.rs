//! Seeded Gaussian draws addressed by `(seed, stream)`.
//!
//! Every row of a simulated matrix reads from its own ChaCha stream, so the
//! values depend only on `(seed, row, column)` and rows can be generated in
//! any order or in parallel without changing the result.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Real;

/// Stream offsets that keep independent simulation components apart.
pub mod streams {
    pub const DESIGN: u64 = 0;
    pub const NOISE: u64 = 1 << 40;
    pub const TRUTH: u64 = 2 << 40;
    pub const TEST: u64 = 3 << 40;
    pub const AUX: u64 = 4 << 40;
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draws for one stream.
pub fn normal_vec<T: Real>(seed: u64, stream: u64, len: usize) -> DVector<T> {
    let mut rng = stream_rng(seed, stream);
    DVector::from_fn(len, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// `rows × cols` standard normal matrix; row `i` reads stream `base + i`.
pub fn normal_matrix<T: Real>(seed: u64, base: u64, rows: usize, cols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let mut rng = stream_rng(seed, base + i as u64);
        for j in 0..cols {
            m[(i, j)] = T::lit(rng.sample::<f64, _>(StandardNormal));
        }
    }
    m
}

/// Uniform draw in `[0, 1)`.
pub fn uniform<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
