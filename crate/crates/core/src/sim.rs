//! Synthetic benchmark data: two-group shifted-subspace data and three-group
//! data with growing numbers of noise variables.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const CHOLESKY_JITTER: f64 = 1e-10;

/// Dimension of the setup-1 data.
pub const SETUP1_DIM: usize = 350;
/// Informative variables of the setup-2 data.
pub const SETUP2_INFORMATIVE: usize = 75;

/// Random correlation-scaled covariance: `A·Aᵀ/dim` for a square standard
/// normal `A`, rescaled to unit diagonal.
pub fn random_covariance(dim: usize, rng_seed: u64) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return Err(Error::InvalidConfig("covariance dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &a * a.transpose() / dim as f64;
    let scale = DVector::from_fn(dim, |i, _| 1.0 / s[(i, i)].sqrt());
    let mut out = DMatrix::from_fn(dim, dim, |i, j| s[(i, j)] * scale[i] * scale[j]);
    out.fill_diagonal(1.0);
    Ok(out)
}

/// Lower Cholesky factor, retrying once with a small diagonal jitter.
pub fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return Ok(c.l());
    }
    let n = cov.nrows();
    Cholesky::new(cov + DMatrix::identity(n, n) * CHOLESKY_JITTER)
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))
}

/// Gaussian with identity covariance except on a few coordinate blocks.
#[derive(Debug, Clone)]
struct BlockGaussian {
    mean: DVector<f64>,
    /// Coordinates of each block and the Cholesky factor of its covariance.
    blocks: Vec<(Vec<usize>, DMatrix<f64>)>,
}

impl BlockGaussian {
    fn sample_into(&self, out: &mut DMatrix<f64>, first_row: usize, n: usize, rng: &mut ChaCha8Rng) {
        let p = self.mean.len();
        let mut z = DVector::zeros(p);
        for i in first_row..first_row + n {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let mut x = z.clone();
            for (idx, l) in &self.blocks {
                let local = DVector::from_fn(idx.len(), |k, _| z[idx[k]]);
                let mixed = l * local;
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = mixed[k];
                }
            }
            for j in 0..p {
                out[(i, j)] = self.mean[j] + x[j];
            }
        }
    }
}

fn draw_groups(groups: &[BlockGaussian], n_per_group: usize, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    let p = groups[0].mean.len();
    let mut values = DMatrix::zeros(groups.len() * n_per_group, p);
    let mut labels = Vec::with_capacity(values.nrows());
    for (g, group) in groups.iter().enumerate() {
        group.sample_into(&mut values, g * n_per_group, n_per_group, rng);
        labels.extend(std::iter::repeat_n((g + 1).to_string(), n_per_group));
    }
    let names = (1..=p).map(|j| format!("v{j}")).collect();
    DataMatrix::new(values)?
        .with_labels(labels)?
        .with_column_names(names)
}

/// Two groups in 350 dimensions; `r` is the 1-based start of the second
/// group's informative block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setup1Spec {
    pub r: usize,
    pub n_per_group: usize,
    pub rng_seed: u64,
}

/// Three groups over 75 informative and `r` noise variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setup2Spec {
    pub r: usize,
    pub n_per_group: usize,
    pub rng_seed: u64,
}

fn check_setup1_r(r: usize) -> Result<()> {
    if !(1..=100).contains(&r) {
        return Err(Error::InvalidConfig(format!("setup 1 needs 1 <= r <= 100, got {r}")));
    }
    Ok(())
}

fn check_group_size(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidConfig("groups need at least one observation".into()));
    }
    Ok(())
}

/// Group means of setup 1: `+0.5` on coordinates 51..=100 for the first
/// group, `−0.5` on `r..r+50` (1-based) for the second.
pub fn setup1_means(r: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    check_setup1_r(r)?;
    let mut mu1 = DVector::zeros(SETUP1_DIM);
    mu1.rows_mut(50, 50).fill(0.5);
    let mut mu2 = DVector::zeros(SETUP1_DIM);
    mu2.rows_mut(r - 1, 50).fill(-0.5);
    Ok((mu1, mu2))
}

/// Distance between the setup-1 group means as a function of `r`:
/// `sqrt(50 − min(50, |51 − r|) / 2)`.
pub fn expected_group_distance(r: usize) -> Result<f64> {
    check_setup1_r(r)?;
    let shift = (51_i64 - r as i64).unsigned_abs().min(50) as f64;
    Ok((50.0 - 0.5 * shift).sqrt())
}

pub fn gen_setup1(spec: &Setup1Spec) -> Result<DataMatrix> {
    let (mu1, mu2) = setup1_means(spec.r)?;
    check_group_size(spec.n_per_group)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let cov1 = random_covariance(50, rng.next_u64())?;
    let cov2 = random_covariance(50, rng.next_u64())?;
    let groups = [
        BlockGaussian {
            mean: mu1,
            blocks: vec![((50..100).collect(), cholesky_factor(&cov1)?)],
        },
        BlockGaussian {
            mean: mu2,
            blocks: vec![((spec.r - 1..spec.r + 49).collect(), cholesky_factor(&cov2)?)],
        },
    ];
    draw_groups(&groups, spec.n_per_group, &mut rng)
}

/// Means of setup 2: each group has ones on two of the three 25-blocks.
pub fn setup2_means(r: usize) -> [DVector<f64>; 3] {
    let p = SETUP2_INFORMATIVE + r;
    let pattern = [[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
    pattern.map(|blocks| {
        DVector::from_fn(p, |j, _| if j < SETUP2_INFORMATIVE { blocks[j / 25] } else { 0.0 })
    })
}

/// Coordinates carrying each setup-2 group's random 50-dimensional covariance.
fn setup2_block(group: usize) -> Vec<usize> {
    match group {
        0 => (0..50).collect(),
        1 => (0..25).chain(50..75).collect(),
        _ => (25..75).collect(),
    }
}

pub fn gen_setup2(spec: &Setup2Spec) -> Result<DataMatrix> {
    check_group_size(spec.n_per_group)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let means = setup2_means(spec.r);
    let mut groups = Vec::with_capacity(3);
    for (g, mean) in means.into_iter().enumerate() {
        let cov = random_covariance(50, rng.next_u64())?;
        groups.push(BlockGaussian {
            mean,
            blocks: vec![(setup2_block(g), cholesky_factor(&cov)?)],
        });
    }
    draw_groups(&groups, spec.n_per_group, &mut rng)
}
