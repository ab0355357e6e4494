//! Reference transforms: classical PCA, Gaussian random projections and
//! diffusion maps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::projection::{contrasts, fix_signs, right_singular};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Raw,
    Gp,
    Pca,
    Rp,
    Diff,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Gp => "gp",
            Method::Pca => "pca",
            Method::Rp => "rp",
            Method::Diff => "diff",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Method::Raw),
            "gp" => Ok(Method::Gp),
            "pca" => Ok(Method::Pca),
            "rp" => Ok(Method::Rp),
            "diff" => Ok(Method::Diff),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }

    /// Prefix for output column names.
    pub fn column_prefix(self) -> &'static str {
        match self {
            Method::Raw => "x",
            Method::Gp => "gp",
            Method::Pca => "pc",
            Method::Rp => "rp",
            Method::Diff => "dc",
        }
    }
}

/// Scores of a fitted transform.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    pub scores: DMatrix<f64>,
    pub method: Method,
    pub k: usize,
    pub knn: Option<usize>,
    pub epsilon: Option<f64>,
    pub rng_seed: Option<u64>,
    /// Diffusion spectrum, trivial eigenvalue first.
    pub eigenvalues: Option<Vec<f64>>,
}

impl TransformResult {
    fn new(scores: DMatrix<f64>, method: Method, k: usize) -> Self {
        Self {
            scores,
            method,
            k,
            knn: None,
            epsilon: None,
            rng_seed: None,
            eigenvalues: None,
        }
    }
}

/// Principal components of column-centred data, fitted once and sliced per k.
#[derive(Debug, Clone)]
pub struct PcaModel {
    /// All score columns, `U·D`, for the numerical rank.
    scores: DMatrix<f64>,
    singular_values: DVector<f64>,
    loadings: DMatrix<f64>,
}

impl PcaModel {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 {
            return Err(Error::InvalidData("PCA needs at least 2 observations".into()));
        }
        let means = x.row_mean();
        let centred = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
        // Contrast rows span the same row space without the null direction
        // introduced by centring.
        let (singular_values, loadings) = right_singular(&contrasts(&centred))?;
        let scores = &centred * &loadings;
        Ok(Self {
            scores,
            singular_values,
            loadings,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn transform(&self, k: usize) -> Result<TransformResult> {
        if k < 1 || k > self.rank() {
            return Err(Error::InvalidConfig(format!(
                "PCA needs 1 <= k <= rank = {}, got {k}",
                self.rank()
            )));
        }
        Ok(TransformResult::new(
            self.scores.columns(0, k).clone_owned(),
            Method::Pca,
            k,
        ))
    }
}

pub fn pca_transform(x: &DMatrix<f64>, k: usize) -> Result<TransformResult> {
    PcaModel::fit(x)?.transform(k)
}

/// Gaussian random projection `X·R/√k` with seeded `R ∈ R^{p×k}`.
pub fn random_projection(x: &DMatrix<f64>, k: usize, rng_seed: u64) -> Result<TransformResult> {
    if k < 1 {
        return Err(Error::InvalidConfig("projection dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let r = DMatrix::from_fn(x.ncols(), k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut out = TransformResult::new(x * r / (k as f64).sqrt(), Method::Rp, k);
    out.rng_seed = Some(rng_seed);
    Ok(out)
}

/// Diffusion-map kernel and spectrum, fitted once and sliced per k.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    coordinates: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    knn: usize,
    epsilon: f64,
}

impl DiffusionModel {
    /// Gaussian kernel with `ε = 2·median_i(d_{i,(knn)})²`, where `d_{i,(knn)}`
    /// is the distance to the knn-th nearest other observation.
    pub fn fit(d: &DistanceMatrix, knn: usize) -> Result<Self> {
        let n = d.n();
        if knn < 1 || knn >= n {
            return Err(Error::InvalidConfig(format!(
                "knn must satisfy 1 <= knn < n = {n}, got {knn}"
            )));
        }
        let mut kth: Vec<f64> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.get(i, j)).collect();
                let (_, v, _) = row.select_nth_unstable_by(knn - 1, f64::total_cmp);
                *v
            })
            .collect();
        kth.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            kth[n / 2]
        } else {
            0.5 * (kth[n / 2 - 1] + kth[n / 2])
        };
        let epsilon = 2.0 * median * median;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::DegenerateKernel(format!(
                "kernel bandwidth is {epsilon}"
            )));
        }

        let w = DMatrix::from_fn(n, n, |i, j| {
            let v = d.get(i, j);
            (-v * v / epsilon).exp()
        });
        let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
        if let Some(i) = (0..n).find(|&i| degree[i] - w[(i, i)] <= 0.0) {
            return Err(Error::DegenerateKernel(format!(
                "observation {i} has no numerically non-zero kernel weight"
            )));
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|g| 1.0 / g.sqrt()).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| w[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);

        // The stationary direction sqrt(degree) has eigenvalue 1; deflate it
        // so the remaining spectrum is well defined even for disconnected
        // kernels with repeated unit eigenvalues.
        let total: f64 = degree.iter().sum();
        let trivial = DVector::from_iterator(n, degree.iter().map(|g| (g / total).sqrt()));
        let trivial_value = (trivial.transpose() * &sym * &trivial)[(0, 0)];
        let deflated = &sym - &trivial * trivial.transpose() * trivial_value;
        let eig = SymmetricEigen::try_new(deflated, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("eigen-decomposition did not converge".into()))?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        // Drop the slot the deflated trivial vector occupies (eigenvalue ≈ 0
        // with eigenvector ≈ trivial).
        let trivial_slot = (0..n)
            .max_by(|&a, &b| {
                let ca = eig.eigenvectors.column(a).dot(&trivial).abs();
                let cb = eig.eigenvectors.column(b).dot(&trivial).abs();
                ca.total_cmp(&cb)
            })
            .expect("n >= 2");
        order.retain(|&k| k != trivial_slot);

        let mut vectors = eig.eigenvectors.select_columns(&order);
        fix_signs(&mut vectors);
        let mut eigenvalues = vec![trivial_value];
        eigenvalues.extend(order.iter().map(|&k| eig.eigenvalues[k]));
        // Right eigenvectors of the Markov matrix, scaled by their eigenvalues.
        let coordinates = DMatrix::from_fn(n, order.len(), |i, c| {
            vectors[(i, c)] * inv_sqrt[i] * total.sqrt() * eigenvalues[c + 1]
        });
        Ok(Self {
            coordinates,
            eigenvalues,
            knn,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Spectrum of the Markov matrix, trivial eigenvalue first, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_components(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn transform(&self, k: usize) -> Result<TransformResult> {
        if k < 1 || k > self.max_components() {
            return Err(Error::InvalidConfig(format!(
                "diffusion map needs 1 <= k <= {}, got {k}",
                self.max_components()
            )));
        }
        let mut out = TransformResult::new(
            self.coordinates.columns(0, k).clone_owned(),
            Method::Diff,
            k,
        );
        out.knn = Some(self.knn);
        out.epsilon = Some(self.epsilon);
        out.eigenvalues = Some(self.eigenvalues.clone());
        Ok(out)
    }
}

pub fn diffusion_map(x: &DMatrix<f64>, knn: usize, k: usize) -> Result<TransformResult> {
    DiffusionModel::fit(&DistanceMatrix::from_points(x), knn)?.transform(k)
}
