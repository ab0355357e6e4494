#![allow(dead_code)]

pub mod oracles;

use guided_projections::DataMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Two groups of `n_per_group` standard normal observations in `p`
/// dimensions; the second is shifted by `shift` in every coordinate.
/// Returns the data and 0/1 group ids.
pub fn two_groups(n_per_group: usize, p: usize, shift: f64, seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_group;
    let values = DMatrix::from_fn(n, p, |i, _| {
        let z: f64 = rng.sample(StandardNormal);
        if i >= n_per_group { z + shift } else { z }
    });
    let groups = (0..n).map(|i| usize::from(i >= n_per_group)).collect();
    (DataMatrix::new(values).unwrap(), groups)
}

/// Two 50-dimensional groups of 100 with different informative blocks:
/// group 0 is shifted by +1 on coordinates 0..25, group 1 on 25..50.
pub fn two_blocks(seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = DMatrix::from_fn(200, 50, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        let informative = if i < 100 { j < 25 } else { j >= 25 };
        if informative { z + 1.0 } else { z }
    });
    let groups = (0..200).map(|i| usize::from(i >= 100)).collect();
    (DataMatrix::new(values).unwrap(), groups)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
