mod common;

use common::gaussian;
use common::oracles::{c_index_oracle, dist, gamma_oracle, silhouette_oracle};
use guided_projections::sim::{gen_setup2, Setup2Spec};
use guided_projections::validity::f_measure;
use guided_projections::{
    best_f_measure, c_index, gamma_index, silhouette_index, ward_cluster, ward_linkage,
    DistanceMatrix, PartitionLabels,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(8, 3, seed.wrapping_mul(31).wrapping_add(7));
    loop {
        let g: Vec<usize> = (0..8).map(|_| rng.random_range(0..2)).collect();
        let ones = g.iter().sum::<usize>();
        if (2..=6).contains(&ones) {
            return (x, g);
        }
    }
}

#[test]
fn indices_match_brute_force_on_eight_points() {
    for seed in 0..100 {
        let (x, g) = random_instance(seed);
        let labels = PartitionLabels::new(g.clone()).unwrap();
        let d = DistanceMatrix::from_points(&x);
        let gam = gamma_index(&d, &labels).unwrap();
        let c = c_index(&d, &labels).unwrap();
        let s = silhouette_index(&d, &labels).unwrap();
        assert!((gam - gamma_oracle(&x, &g)).abs() < 1e-12, "seed {seed}");
        assert!((c - c_index_oracle(&x, &g)).abs() < 1e-12, "seed {seed}");
        assert!((s - silhouette_oracle(&x, &g)).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn hand_examples() {
    let line = |v: &[f64]| DistanceMatrix::from_points(&DMatrix::from_column_slice(v.len(), 1, v));
    let lab = |v: &[usize]| PartitionLabels::new(v.to_vec()).unwrap();
    let d = line(&[0.0, 1.0, 10.0, 11.0]);
    assert_eq!(gamma_index(&d, &lab(&[0, 0, 1, 1])).unwrap(), 1.0);
    assert_eq!(c_index(&d, &lab(&[0, 0, 1, 1])).unwrap(), 0.0);
    let one = lab(&[0, 0, 0, 0]);
    let two = lab(&[0, 0, 1, 1]);
    assert!((f_measure(&one, &two).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(f_measure(&two, &two).unwrap(), 1.0);
    assert_eq!(f_measure(&lab(&[1, 1, 0, 0]), &two).unwrap(), 1.0);
    let same = line(&[3.0; 4]);
    assert!(gamma_index(&same, &two).is_err());
    assert!(c_index(&same, &two).is_err());
}

#[test]
fn precomputed_distances_agree() {
    let (x, g) = random_instance(5);
    let labels = PartitionLabels::new(g).unwrap();
    let d = DistanceMatrix::from_points(&x);
    let square = DMatrix::from_fn(8, 8, |i, j| dist(&x, i, j));
    let d2 = DistanceMatrix::from_square(&square);
    assert!((gamma_index(&d, &labels).unwrap() - gamma_index(&d2, &labels).unwrap()).abs() < 1e-12);
    assert!((c_index(&d, &labels).unwrap() - c_index(&d2, &labels).unwrap()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn invariant_under_reordering_and_renaming(seed in any::<u64>(), shift in 1usize..8) {
        let (x, g) = random_instance(seed);
        let perm: Vec<usize> = (0..8).map(|i| (i + shift) % 8).collect();
        let xp = DMatrix::from_fn(8, 3, |i, j| x[(perm[i], j)]);
        let gp: Vec<usize> = perm.iter().map(|&i| 1 - g[i]).collect();
        let (l, lp) = (PartitionLabels::new(g.clone()).unwrap(), PartitionLabels::new(gp).unwrap());
        let (d, dp) = (DistanceMatrix::from_points(&x), DistanceMatrix::from_points(&xp));
        prop_assert!((gamma_index(&d, &l).unwrap() - gamma_index(&dp, &lp).unwrap()).abs() < 1e-12);
        prop_assert!((c_index(&d, &l).unwrap() - c_index(&dp, &lp).unwrap()).abs() < 1e-12);
        prop_assert!((silhouette_index(&d, &l).unwrap() - silhouette_index(&dp, &lp).unwrap()).abs() < 1e-12);
        let pred = ward_cluster(&x, 3).unwrap();
        let pred_p = ward_cluster(&xp, 3).unwrap();
        prop_assert!((f_measure(&pred, &l).unwrap() - f_measure(&pred_p, &lp).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn indices_stay_in_range(seed in any::<u64>()) {
        let (x, g) = random_instance(seed);
        let l = PartitionLabels::new(g).unwrap();
        let d = DistanceMatrix::from_points(&x);
        let gam = gamma_index(&d, &l).unwrap();
        let s = silhouette_index(&d, &l).unwrap();
        let c = c_index(&d, &l).unwrap();
        prop_assert!((-1.0..=1.0).contains(&gam));
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((0.0..=1.0).contains(&c));
        for k in 1..=8 {
            let cut = ward_linkage(&x).cut(k).unwrap();
            prop_assert_eq!(cut.k(), k);
            let f = f_measure(&cut, &l).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}

/// Within-cluster sum of squares of a 1-D partition.
fn ward_objective(v: &[f64], g: &[usize], k: usize) -> f64 {
    (0..k)
        .map(|c| {
            let members: Vec<f64> = v.iter().zip(g).filter(|(_, &l)| l == c).map(|(x, _)| *x).collect();
            let m = members.iter().sum::<f64>() / members.len() as f64;
            members.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum()
}

#[test]
fn ward_recovers_the_optimal_three_partition() {
    let v = [0.0, 0.1, 0.05, 10.0, 10.1, 9.95, 20.0, 20.08, 19.9];
    let x = DMatrix::from_column_slice(9, 1, &v);
    // Exhaustive search over all assignments with three non-empty clusters.
    let mut best = (f64::INFINITY, Vec::new());
    for code in 0..3usize.pow(9) {
        let g: Vec<usize> = (0..9).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        if (0..3).any(|c| !g.contains(&c)) {
            continue;
        }
        let obj = ward_objective(&v, &g, 3);
        if obj < best.0 {
            best = (obj, g);
        }
    }
    let got = ward_cluster(&x, 3).unwrap();
    let truth = PartitionLabels::new(best.1).unwrap();
    assert_eq!(f_measure(&got, &truth).unwrap(), 1.0);
    assert_eq!(got.sizes(), vec![3, 3, 3]);

    assert_eq!(ward_cluster(&x, 9).unwrap().k(), 9);
    assert_eq!(ward_cluster(&x, 1).unwrap().k(), 1);
    assert!(ward_cluster(&x, 10).is_err());
    assert!(ward_cluster(&x, 0).is_err());
}

#[test]
fn ward_heights_are_monotone() {
    let x = gaussian(30, 4, 9);
    let dendrogram = ward_linkage(&x);
    assert_eq!(dendrogram.merges().len(), 29);
    assert!(dendrogram.merges().windows(2).all(|w| w[0].height <= w[1].height));
    assert_eq!(dendrogram.merges().last().unwrap().size, 30);
}

#[test]
fn noise_coordinates_do_not_raise_gamma() {
    let mut ok = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = 40;
        let g: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        let labels = PartitionLabels::new(g.clone()).unwrap();
        let informative = DMatrix::from_fn(n, 5, |i, _| {
            0.1 * rng.random::<f64>() + if g[i] == 1 { 10.0 } else { 0.0 }
        });
        let noise = gaussian(n, 300, 900 + seed);
        let gammas: Vec<f64> = [0, 10, 50, 300]
            .iter()
            .map(|&extra| {
                let x = DMatrix::from_fn(n, 5 + extra, |i, j| {
                    if j < 5 { informative[(i, j)] } else { noise[(i, j - 5)] }
                });
                gamma_index(&DistanceMatrix::from_points(&x), &labels).unwrap()
            })
            .collect();
        ok += usize::from(gammas.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn f_measure_sweep_finds_three_groups() {
    let mut hits = 0;
    for seed in 0..10 {
        let x = gen_setup2(&Setup2Spec {
            r: 0,
            n_per_group: 50,
            rng_seed: 700 + seed,
        })
        .unwrap();
        let truth = PartitionLabels::from_labels(x.labels().unwrap());
        let (_, k) = best_f_measure(&ward_linkage(x.values()), &truth, 50).unwrap();
        hits += usize::from(k == 3);
    }
    assert!(hits >= 8, "{hits}/10");
}
