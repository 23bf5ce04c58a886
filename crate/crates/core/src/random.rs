//! Seeded random streams. Every consumer derives its generator from a
//! `(seed, stream)` pair so independent runs never share RNG state.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn gaussian_matrix(rng: &mut Rng, nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, ncols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign correction).
pub fn random_orthogonal(rng: &mut Rng, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Mixes an index into a seed (SplitMix64 finalizer) to key per-iteration streams.
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random split of `0..n` into sorted `(train, holdout)` row sets, holdout of size `ceil(fraction n)`.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let h = ((fraction * n as f64).ceil() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut r = rng(seed, streams::SPLIT);
    let mut holdout = rand::seq::index::sample(&mut r, n, h).into_vec();
    holdout.sort_unstable();
    let mut mask = vec![false; n];
    for &i in &holdout {
        mask[i] = true;
    }
    let train = (0..n).filter(|&i| !mask[i]).collect();
    (train, holdout)
}

pub(crate) mod streams {
    pub const INIT: u64 = 1;
    pub const RSVD: u64 = 2;
    pub const POWER: u64 = 3;
    pub const MINIBATCH: u64 = 4;
    pub const RESAMPLE: u64 = 8;
    pub const SPLIT: u64 = 5;
    pub const PLANTED: u64 = 6;
}
