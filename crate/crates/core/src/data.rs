//! Observation matrices and row selections.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};

/// An n×p matrix of observations (rows) with optional labels and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    labels: Option<Vec<String>>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Wraps `values`, requiring at least two rows, one column and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() < 1 {
            return Err(Error::InvalidData("need at least 1 variable".into()));
        }
        check_finite(&values)?;
        Ok(Self {
            values,
            labels: None,
            column_names: None,
        })
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidData(format!(
                "row {i} has {} values, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.nrows() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} observations",
                labels.len(),
                self.nrows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.ncols() {
            return Err(Error::InvalidData(format!(
                "{} column names for {} variables",
                names.len(),
                self.ncols()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.values.row(i).into_owned()
    }

    /// Copies the given rows, carrying labels along.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select_rows(rows);
        let mut out = Self::new(values)?;
        out.column_names = self.column_names.clone();
        if let Some(labels) = &self.labels {
            out.labels = Some(rows.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }
}

pub(crate) fn check_finite(values: &DMatrix<f64>) -> Result<()> {
    for j in 0..values.ncols() {
        for i in 0..values.nrows() {
            if !values[(i, j)].is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {i}, column {j}"
                )));
            }
        }
    }
    Ok(())
}

/// An ordered set of distinct row indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionIndex(Vec<usize>);

impl SelectionIndex {
    /// Validates `indices` against a matrix with `n` rows.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidSelection(format!(
                    "index {i} out of range for {n} observations"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidSelection(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self(indices))
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}
