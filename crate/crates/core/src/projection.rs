//! Local subspace model of a small selection of observations.
//!
//! A [`Projection`] centres and scales the selected rows with their own mean
//! and standard deviation, then spans the standardized selection with the
//! right singular vectors of its thin SVD. Any observation can afterwards be
//! measured against the model through its orthogonal distance (the norm of
//! the residual off the subspace) and its score distance (a Mahalanobis-type
//! distance inside the subspace).

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, SelectionIndex};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are discarded.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Scale estimates below this fraction of the largest one are replaced by 1.
pub const SCALE_GUARD: f64 = 1e-12;

/// How orthogonal and score distances are folded into one similarity value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsdKind {
    /// Orthogonal distance alone.
    #[default]
    OdOnly,
    /// Score distance alone.
    SdOnly,
    /// `od / od_norm + sd / sd_norm` with caller-supplied normalizers,
    /// typically the medians of each distance over a reference sample.
    NormalizedSum { od_norm: f64, sd_norm: f64 },
}

impl OsdKind {
    pub fn combine(self, od: f64, sd: f64) -> f64 {
        match self {
            OsdKind::OdOnly => od,
            OsdKind::SdOnly => sd,
            OsdKind::NormalizedSum { od_norm, sd_norm } => od / od_norm + sd / sd_norm,
        }
    }

    pub fn validate(self) -> Result<()> {
        if let OsdKind::NormalizedSum { od_norm, sd_norm } = self {
            if !(od_norm.is_finite() && od_norm > 0.0 && sd_norm.is_finite() && sd_norm > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "normalizers must be positive and finite, got od={od_norm}, sd={sd_norm}"
                )));
            }
        }
        Ok(())
    }
}

/// Distances of one observation to a fitted projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub od: f64,
    pub sd: f64,
    pub osd: f64,
}

/// Fitted model of one q-observation selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    mu_hat: DVector<f64>,
    sigma_hat: DVector<f64>,
    /// p×r, orthonormal columns.
    basis: DMatrix<f64>,
    singular_values: DVector<f64>,
    q: usize,
}

/// Fits the standardized selection model for the rows in `sel`.
pub fn fit_projection(x: &DataMatrix, sel: &SelectionIndex) -> Result<Projection> {
    if sel.indices().iter().any(|&i| i >= x.nrows()) {
        return Err(Error::InvalidSelection(format!(
            "selection refers to rows beyond {}",
            x.nrows()
        )));
    }
    Projection::fit(x.values(), sel.indices())
}

/// Rotates a column-centred q×p matrix onto Helmert contrasts, giving a
/// (q−1)×p matrix with the same singular values and right singular vectors.
/// Dropping the null direction introduced by centring keeps the SVD from
/// having to resolve an exactly zero singular value, which it does poorly.
pub(crate) fn contrasts(centred: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, p) = centred.shape();
    let mut out = DMatrix::zeros(q - 1, p);
    let mut prefix = centred.row(0).clone_owned();
    for k in 0..q - 1 {
        let m = (k + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        out.row_mut(k)
            .copy_from(&((&prefix - centred.row(k + 1) * m) / norm));
        prefix += centred.row(k + 1);
    }
    out
}

/// Flips each column so its largest-magnitude entry is positive; the first
/// index wins ties. Returns the applied signs.
pub(crate) fn fix_signs(vectors: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(vectors.ncols());
    for mut col in vectors.column_iter_mut() {
        let mut lead = 0;
        for j in 1..col.len() {
            if col[j].abs() > col[lead].abs() {
                lead = j;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        col *= sign;
        signs.push(sign);
    }
    signs
}

/// Singular values of `c` above the rank tolerance, in decreasing order, with
/// the matching right singular vectors as sign-fixed columns.
///
/// The SVD basis is rotated within its span by the eigenvectors of
/// `(cV)ᵀ(cV)`, so `Vᵀcᵀc V` is diagonal to working precision.
pub(crate) fn right_singular(c: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let svd = SVD::try_new_unordered(c.clone(), false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no right singular vectors".into()))?;
    let d1 = svd.singular_values.max();
    if !d1.is_finite() {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| d1 > 0.0 && svd.singular_values[k] > RANK_TOLERANCE * d1)
        .collect();
    if kept.is_empty() {
        return Ok((DVector::zeros(0), DMatrix::zeros(c.ncols(), 0)));
    }
    let v = v_t.select_rows(&kept).transpose();

    let b = c * &v;
    let eig = SymmetricEigen::new(b.transpose() * &b);
    let rotated_b = &b * &eig.eigenvectors;
    let norms: Vec<f64> = rotated_b.column_iter().map(|col| col.norm()).collect();
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut basis = (&v * &eig.eigenvectors).select_columns(&order);
    fix_signs(&mut basis);
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| norms[k]));
    Ok((values, basis))
}

impl Projection {
    /// Fits on `rows` of `values`. Rows are assumed valid and distinct.
    pub(crate) fn fit(values: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        let q = rows.len();
        if q < 2 {
            return Err(Error::InvalidSelection(format!(
                "selection needs at least 2 observations, got {q}"
            )));
        }
        let p = values.ncols();
        let selected = values.select_rows(rows);
        if selected.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("selection contains non-finite values".into()));
        }

        let mu_hat = DVector::from_fn(p, |j, _| selected.column(j).sum() / q as f64);
        let mut sigma_hat = DVector::from_fn(p, |j, _| {
            let m = mu_hat[j];
            let ss: f64 = selected.column(j).iter().map(|v| (v - m) * (v - m)).sum();
            (ss / (q - 1) as f64).sqrt()
        });
        let max_sigma = sigma_hat.max();
        for s in sigma_hat.iter_mut() {
            if max_sigma <= 0.0 || *s < SCALE_GUARD * max_sigma {
                *s = 1.0;
            }
        }

        let standardized =
            DMatrix::from_fn(q, p, |i, j| (selected[(i, j)] - mu_hat[j]) / sigma_hat[j]);
        let (singular_values, basis) = right_singular(&contrasts(&standardized))?;
        if singular_values.is_empty() {
            return Err(Error::DegenerateSelection(
                "standardized selection is the zero matrix".into(),
            ));
        }

        Ok(Self {
            mu_hat,
            sigma_hat,
            basis,
            singular_values,
            q,
        })
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn sigma_hat(&self) -> &DVector<f64> {
        &self.sigma_hat
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn effective_rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    /// Centred and scaled coordinates `(x − μ̂) / σ̂`.
    pub fn standardize(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_len(x.len())?;
        Ok(DVector::from_fn(self.dim(), |j, _| {
            (x[j] - self.mu_hat[j]) / self.sigma_hat[j]
        }))
    }

    pub fn orthogonal_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.distances(x, OsdKind::OdOnly)?.od)
    }

    pub fn score_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_rank()?;
        Ok(self.distances(x, OsdKind::SdOnly)?.sd)
    }

    pub fn osd(&self, x: &[f64], kind: OsdKind) -> Result<f64> {
        Ok(self.distances(x, kind)?.osd)
    }

    pub fn distances(&self, x: &[f64], kind: OsdKind) -> Result<Distances> {
        self.check_len(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("observation contains non-finite values".into()));
        }
        let row = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.distances_rows(&row, &[0], kind)?[0])
    }

    /// Distances for every row of `values`.
    pub fn distances_all(&self, values: &DMatrix<f64>, kind: OsdKind) -> Result<Vec<Distances>> {
        let rows: Vec<usize> = (0..values.nrows()).collect();
        self.distances_rows(values, &rows, kind)
    }

    /// Distances for the given rows of `values`, in the order of `rows`.
    pub fn distances_rows(
        &self,
        values: &DMatrix<f64>,
        rows: &[usize],
        kind: OsdKind,
    ) -> Result<Vec<Distances>> {
        self.check_len(values.ncols())?;
        kind.validate()?;
        if kind != OsdKind::OdOnly {
            self.check_rank()?;
        }
        let p = self.dim();
        let z = DMatrix::from_fn(rows.len(), p, |i, j| {
            (values[(rows[i], j)] - self.mu_hat[j]) / self.sigma_hat[j]
        });
        let scores = &z * &self.basis;
        let sd_scale = ((self.q - 1) as f64).sqrt();

        let out = (0..rows.len())
            .map(|i| {
                let zz = z.row(i).norm_squared();
                let cc = scores.row(i).norm_squared();
                let od2 = zz - cc;
                // Pythagoras loses all digits near the subspace; fall back to
                // the explicit residual there.
                let od = if od2 > 1e-6 * zz {
                    od2.sqrt()
                } else {
                    (z.row(i) - scores.row(i) * self.basis.transpose()).norm()
                };
                let sd = sd_scale
                    * scores
                        .row(i)
                        .iter()
                        .zip(self.singular_values.iter())
                        .map(|(c, d)| (c / d) * (c / d))
                        .sum::<f64>()
                        .sqrt();
                Distances {
                    od,
                    sd,
                    osd: kind.combine(od, sd),
                }
            })
            .collect();
        Ok(out)
    }

    /// OSD values for the given rows.
    pub fn osd_rows(&self, values: &DMatrix<f64>, rows: &[usize], kind: OsdKind) -> Result<Vec<f64>> {
        Ok(self
            .distances_rows(values, rows, kind)?
            .into_iter()
            .map(|d| d.osd)
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::InvalidData(format!(
                "observation has {len} values, projection expects {}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_rank(&self) -> Result<()> {
        if self.effective_rank() == 0 {
            return Err(Error::DegenerateSelection("projection has rank 0".into()));
        }
        Ok(())
    }
}
