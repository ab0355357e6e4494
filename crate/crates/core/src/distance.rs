//! Pairwise Euclidean distances.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Row-major copy of the observations, one contiguous slice per row.
pub(crate) struct Rows {
    data: Vec<f64>,
    p: usize,
}

impl Rows {
    pub(crate) fn new(values: &DMatrix<f64>) -> Self {
        let t = values.transpose();
        Self {
            p: values.ncols(),
            data: t.as_slice().to_vec(),
        }
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub(crate) fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.row(i), self.row(j))
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric distance matrix with zero diagonal, stored as its strict upper
/// triangle in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    condensed: Vec<f64>,
}

impl DistanceMatrix {
    /// Euclidean distances between the rows of `values`.
    pub fn from_points(values: &DMatrix<f64>) -> Self {
        let rows = Rows::new(values);
        let n = values.nrows();
        let condensed = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let rows = &rows;
                (i + 1..n).map(move |j| rows.distance(i, j))
            })
            .collect();
        Self { n, condensed }
    }

    /// Wraps a full square matrix; only the strict upper triangle is read.
    pub fn from_square(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut condensed = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                condensed.push(m[(i, j)]);
            }
        }
        Self { n, condensed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => 0.0,
            Ordering::Less => self.condensed[self.offset(i, j)],
            Ordering::Greater => self.condensed[self.offset(j, i)],
        }
    }

    /// All pairwise distances, pairs `(i, j)` with `i < j` in row-major order.
    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    /// `(i, j, d)` for every pair with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.condensed.iter())
            .map(|((i, j), &d)| (i, j, d))
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condensed_layout() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 3.0, 7.0]);
        let d = DistanceMatrix::from_points(&x);
        assert_eq!(d.condensed(), &[1.0, 3.0, 7.0, 2.0, 6.0, 4.0]);
        assert_eq!(d.get(3, 1), 6.0);
        assert_eq!(d.get(2, 2), 0.0);
        let pairs: Vec<_> = d.pairs().collect();
        assert_eq!(pairs[3], (1, 2, 2.0));
        let mut sq = DMatrix::zeros(4, 4);
        for (i, j, v) in d.pairs() {
            sq[(i, j)] = v;
            sq[(j, i)] = v;
        }
        assert_eq!(DistanceMatrix::from_square(&sq), d);
    }
}
