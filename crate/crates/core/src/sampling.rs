//! Seeded direction sampling shared by classification, probes, and fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Vector;

/// `2 dim` signed basis directions followed by `n_random` seeded random unit
/// vectors. Deterministic for a given seed.
pub(crate) fn unit_directions(dim: usize, n_random: usize, seed: u64) -> Vec<Vector> {
    let mut dirs = Vec::with_capacity(2 * dim + n_random);
    for j in 0..dim {
        let mut e = Vector::zeros(dim);
        e[j] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < 2 * dim + n_random {
        let g = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let n = g.norm();
        if n > 1e-8 {
            dirs.push(g / n);
        }
    }
    dirs
}

/// One seeded random unit vector stream, without the basis prefix.
pub(crate) fn random_unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        let g = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let n = g.norm();
        if n > 1e-8 {
            dirs.push(g / n);
        }
    }
    dirs
}
