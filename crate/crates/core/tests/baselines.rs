mod common;

use common::gaussian;
use guided_projections::{diffusion_map, pca_transform, DistanceMatrix, DiffusionModel};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn pca_columns_are_orthogonal(n in 5usize..25, p in 2usize..30, seed in any::<u64>()) {
        let x = gaussian(n, p, seed);
        let k = (n - 1).min(p);
        let t = pca_transform(&x, k).unwrap();
        let gram = t.scores.transpose() * &t.scores;
        let scale = gram.diagonal().max();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    prop_assert!(gram[(i, j)].abs() < 1e-8 * scale);
                }
            }
        }
        prop_assert!(t.scores.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn diffusion_map_is_order_independent() {
    let x = gaussian(30, 5, 11);
    let n = x.nrows();
    let perm: Vec<usize> = (0..n).map(|i| (i * 11 + 4) % n).collect();
    let xp = DMatrix::from_fn(n, 5, |i, j| x[(perm[i], j)]);
    let a = diffusion_map(&x, 3, 4).unwrap();
    let b = diffusion_map(&xp, 3, 4).unwrap();
    for c in 0..4 {
        // Columns agree up to sign.
        let sign = if (a.scores[(perm[0], c)] * b.scores[(0, c)]) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            let (u, v) = (a.scores[(perm[i], c)], sign * b.scores[(i, c)]);
            assert!((u - v).abs() < 1e-8, "column {c} row {i}: {u} vs {v}");
        }
    }
}

#[test]
fn diffusion_bandwidth_uses_the_knn_median() {
    // On a line with unit spacing the k-th neighbour of interior points is
    // at distance ceil(k/2).
    let x = DMatrix::from_fn(21, 1, |i, _| i as f64);
    let d = DistanceMatrix::from_points(&x);
    let model = DiffusionModel::fit(&d, 2).unwrap();
    assert!((model.epsilon() - 2.0).abs() < 1e-12);
    let model = DiffusionModel::fit(&d, 3).unwrap();
    assert!((model.epsilon() - 8.0).abs() < 1e-12);
}
