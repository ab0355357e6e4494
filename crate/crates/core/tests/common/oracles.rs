//! Brute-force validity indices computed straight from coordinates.

use nalgebra::DMatrix;

pub fn dist(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (x.row(i) - x.row(j)).norm()
}

/// Every (within, between) pair of pairs, compared directly.
pub fn gamma_oracle(x: &DMatrix<f64>, g: &[usize]) -> f64 {
    let n = g.len();
    let mut within = Vec::new();
    let mut between = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if g[i] == g[j] {
                within.push(dist(x, i, j));
            } else {
                between.push(dist(x, i, j));
            }
        }
    }
    let (mut plus, mut minus) = (0.0, 0.0);
    for w in &within {
        for b in &between {
            if w < b {
                plus += 1.0;
            } else if w > b {
                minus += 1.0;
            }
        }
    }
    (plus - minus) / (plus + minus)
}

pub fn c_index_oracle(x: &DMatrix<f64>, g: &[usize]) -> f64 {
    let n = g.len();
    let mut all = Vec::new();
    let mut sw = 0.0;
    let mut nw = 0;
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(x, i, j);
            all.push(d);
            if g[i] == g[j] {
                sw += d;
                nw += 1;
            }
        }
    }
    all.sort_by(f64::total_cmp);
    let smin: f64 = all[..nw].iter().sum();
    let smax: f64 = all[all.len() - nw..].iter().sum();
    (sw - smin) / (smax - smin)
}

pub fn silhouette_oracle(x: &DMatrix<f64>, g: &[usize]) -> f64 {
    let n = g.len();
    let k = g.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && g[j] == g[i]).collect();
        if own.is_empty() {
            continue;
        }
        let a = own.iter().map(|&j| dist(x, i, j)).sum::<f64>() / own.len() as f64;
        let b = (0..k)
            .filter(|&c| c != g[i])
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&j| g[j] == c).collect();
                members.iter().map(|&j| dist(x, i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}
