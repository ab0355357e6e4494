mod common;

use common::{gaussian, pearson, two_blocks, two_groups};
use guided_projections::{
    build_sequence, fit_projection, order_initial, select_seed, transform, DataMatrix, OsdKind,
    SelectionIndex, SequencerConfig, Side,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const ZERO: f64 = 1e-8;

fn check_structure(x: &DataMatrix, q: usize) {
    let n = x.nrows();
    let (seq, gp) = build_sequence(x, &SequencerConfig::with_q(q)).unwrap();
    assert_eq!(gp.n_projections(), n - q + 1);
    assert_eq!(gp.nrows(), n);

    let mut sorted = seq.order.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..n).collect::<Vec<_>>());

    // The seed set is one contiguous block of the final order.
    let positions: Vec<usize> = seq
        .seed_set
        .iter()
        .map(|s| seq.order.iter().position(|o| o == s).unwrap())
        .collect();
    let (lo, hi) = (*positions.iter().min().unwrap(), *positions.iter().max().unwrap());
    assert_eq!(hi - lo + 1, q);

    // Every row is zero exactly on the windows holding it, which are consecutive.
    for (pos, &row) in seq.order.iter().enumerate() {
        let first = pos.saturating_sub(q - 1);
        let last = pos.min(n - q);
        for j in 0..gp.n_projections() {
            let v = gp.values()[(row, j)];
            if (first..=last).contains(&j) {
                assert!(v <= ZERO, "row {row} col {j}: {v}");
            }
        }
        let zeros: Vec<usize> = (0..gp.n_projections())
            .filter(|&j| gp.values()[(row, j)] <= ZERO)
            .collect();
        assert!(!zeros.is_empty());
        assert!(zeros.windows(2).all(|w| w[1] == w[0] + 1), "row {row}: {zeros:?}");
    }
}

#[test]
fn two_hundred_rows_give_191_projections() {
    let (x, _) = two_groups(100, 50, 1.0, 1);
    check_structure(&x, 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn structure_holds_for_random_data(n in 6usize..20, p in 3usize..12, q_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let q = 2 + ((n - 3) as f64 * q_frac) as usize;
        let x = DataMatrix::new(gaussian(n, p, seed)).unwrap();
        check_structure(&x, q);
    }
}

#[test]
fn identical_inputs_identical_outputs() {
    let (x, _) = two_groups(30, 12, 1.0, 2);
    let cfg = SequencerConfig::with_q(6);
    let a = build_sequence(&x, &cfg).unwrap();
    let b = build_sequence(&x, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn columns_match_direct_window_fits() {
    let (x, _) = two_groups(40, 15, 1.0, 3);
    let (seq, gp) = build_sequence(&x, &SequencerConfig::with_q(8)).unwrap();
    for j in [0, 17, 33, 50, seq.n_projections() - 1] {
        let sel = SelectionIndex::new(seq.window(j).to_vec(), x.nrows()).unwrap();
        let proj = fit_projection(&x, &sel).unwrap();
        for i in 0..x.nrows() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let direct = proj.osd(&row, OsdKind::OdOnly).unwrap();
            assert!((direct - gp.values()[(i, j)]).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}

#[test]
fn transform_of_fit_data_is_bit_identical() {
    let (x, _) = two_groups(25, 10, 1.0, 4);
    let (seq, gp) = build_sequence(&x, &SequencerConfig::with_q(5)).unwrap();
    assert_eq!(transform(&seq, &x, x.values()).unwrap(), gp);
}

#[test]
fn transform_of_one_selected_row() {
    let (x, _) = two_groups(25, 10, 1.0, 5);
    let q = 5;
    let (seq, _) = build_sequence(&x, &SequencerConfig::with_q(q)).unwrap();
    let pos = 20;
    let row = seq.order[pos];
    let single = x.values().rows(row, 1).clone_owned();
    let out = transform(&seq, &x, &single).unwrap();
    for j in 0..seq.n_projections() {
        let inside = j + q > pos && j <= pos;
        let v = out.values()[(0, j)];
        assert_eq!(v <= ZERO, inside, "column {j}: {v}");
    }
}

#[test]
fn far_observations_exceed_in_sample_values() {
    for seed in 0..5 {
        let (x, _) = two_groups(30, 20, 2.0, 100 + seed);
        let (seq, gp) = build_sequence(&x, &SequencerConfig::with_q(8)).unwrap();
        let mut in_sample: Vec<f64> = gp.values().iter().copied().collect();
        in_sample.sort_by(f64::total_cmp);
        let p99 = in_sample[(0.99 * (in_sample.len() - 1) as f64).round() as usize];
        let far = x.values().rows(0, 3).map(|v| v + 100.0);
        let out = transform(&seq, &x, &far).unwrap();
        for i in 0..3 {
            assert!(out.values().row(i).min() > p99);
        }
    }
}

#[test]
fn transform_rejects_column_mismatch() {
    let (x, _) = two_groups(10, 6, 1.0, 6);
    let (seq, _) = build_sequence(&x, &SequencerConfig::with_q(4)).unwrap();
    assert!(transform(&seq, &x, &DMatrix::zeros(2, 5)).is_err());
}

#[test]
fn first_addition_comes_from_the_seed_cluster() {
    let mut hits = 0;
    for seed in 0..20 {
        let (x, groups) = two_groups(30, 20, 3.0, 200 + seed);
        let cfg = SequencerConfig::with_q(5);
        let sel = select_seed(&x, cfg.q, cfg.rng_seed).unwrap();
        let ones = sel.indices().iter().filter(|&&i| groups[i] == 1).count();
        let majority = usize::from(2 * ones > sel.q());
        let state = order_initial(&x, &sel, &cfg).unwrap();
        let added = state.step_log()[0].index;
        assert_eq!(state.step_log().len(), 1);
        hits += usize::from(groups[added] == majority);
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn order_is_permutation_equivariant() {
    let (x, _) = two_groups(20, 8, 1.5, 7);
    let n = x.nrows();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let permuted = DataMatrix::new(DMatrix::from_fn(n, 8, |i, j| x.values()[(perm[i], j)])).unwrap();
    let cfg = SequencerConfig::with_q(5);
    let (a, gp_a) = build_sequence(&x, &cfg).unwrap();
    let (b, gp_b) = build_sequence(&permuted, &cfg).unwrap();
    let mapped: Vec<usize> = b.order.iter().map(|&i| perm[i]).collect();
    assert_eq!(mapped, a.order);
    for i in 0..n {
        for j in 0..gp_a.n_projections() {
            let (u, v) = (gp_a.values()[(perm[i], j)], gp_b.values()[(i, j)]);
            assert!((u - v).abs() <= 1e-9 * u.max(1.0));
        }
    }
}

#[test]
fn exhausted_right_frontier_switches_to_left() {
    // Two elongated 2-D clusters: the sequence walks along one and must
    // return to the other end of the series to pick up the rest.
    let mut pts = Vec::new();
    for k in 0..12 {
        let t = k as f64;
        pts.push(vec![t, 0.05 * (t * 1.7).sin()]);
        pts.push(vec![t + 0.3, 6.0 + 0.05 * (t * 2.3).cos()]);
    }
    let x = DataMatrix::from_rows(&pts).unwrap();
    let (seq, _) = build_sequence(&x, &SequencerConfig::with_q(3)).unwrap();
    assert!(seq.step_log.iter().skip(1).any(|s| s.side == Side::Left));
    assert!(seq.step_log.iter().skip(1).any(|s| s.side == Side::Right));
}

#[test]
fn adjacent_columns_correlate_more_than_distant_ones() {
    let mut wins = 0;
    for seed in 0..10 {
        let (x, _) = two_blocks(300 + seed);
        let (seq, gp) = build_sequence(&x, &SequencerConfig::with_q(10)).unwrap();
        let m = gp.n_projections();
        let (mut near, mut far) = (0.0, 0.0);
        let mut count = 0;
        for j in (0..m - 50).step_by(10) {
            // Rows outside all three windows.
            let rows: Vec<usize> = (0..x.nrows())
                .filter(|&i| {
                    let pos = seq.order.iter().position(|&o| o == i).unwrap();
                    !(j..j + 10 + 50).contains(&pos)
                })
                .collect();
            let col = |c: usize| rows.iter().map(|&i| gp.values()[(i, c)]).collect::<Vec<_>>();
            near += pearson(&col(j), &col(j + 1));
            far += pearson(&col(j), &col(j + 50));
            count += 1;
        }
        assert!(count > 0);
        wins += usize::from(near > far);
    }
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn json_export_has_documented_fields() {
    let (x, _) = two_groups(10, 6, 1.0, 8);
    let (seq, _) = build_sequence(&x, &SequencerConfig::with_q(4)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&seq.to_json().unwrap()).unwrap();
    for key in ["order", "q", "seed_set", "step_log"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["step_log"].as_array().unwrap().len(), x.nrows() - 4);
    assert_eq!(v["step_log"][1]["side"].as_str().map(|s| s == "L" || s == "R"), Some(true));
}
