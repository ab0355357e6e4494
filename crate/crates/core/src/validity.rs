//! Cluster validity indices and Ward clustering.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distance::{squared_euclidean, DistanceMatrix};
use crate::error::{Error, Result};

/// Cluster memberships with ids `0..k`, each id used at least once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLabels {
    assignments: Vec<usize>,
    k: usize,
}

impl PartitionLabels {
    pub fn new(assignments: Vec<usize>) -> Result<Self> {
        let k = assignments.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; k];
        for &a in &assignments {
            used[a] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidData(format!("cluster id {missing} is unused")));
        }
        Ok(Self { assignments, k })
    }

    /// Maps arbitrary labels to ids in order of first appearance.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Self {
        let mut seen: Vec<&T> = Vec::new();
        let assignments = labels
            .iter()
            .map(|l| match seen.iter().position(|s| *s == l) {
                Some(i) => i,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            })
            .collect();
        Self {
            assignments,
            k: seen.len(),
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Index values for one transformed data set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub gamma: Option<f64>,
    pub silhouette: Option<f64>,
    pub c_index: Option<f64>,
    pub f_measure: Option<f64>,
    /// Cluster count at which the F-measure was attained.
    pub f_measure_k: Option<usize>,
    pub method: String,
    #[serde(default)]
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

fn check_sizes(d: &DistanceMatrix, labels: &PartitionLabels) -> Result<()> {
    if d.n() != labels.len() {
        return Err(Error::InvalidData(format!(
            "{} labels for {} observations",
            labels.len(),
            d.n()
        )));
    }
    if labels.k() < 2 {
        return Err(Error::InvalidConfig(format!(
            "index needs at least 2 clusters, got {}",
            labels.k()
        )));
    }
    Ok(())
}

/// Baker–Hubert Gamma: concordant minus discordant (within, between) pair
/// comparisons over their sum; ties count for neither.
pub fn gamma_index(d: &DistanceMatrix, labels: &PartitionLabels) -> Result<f64> {
    check_sizes(d, labels)?;
    let a = labels.assignments();
    let (mut within, mut between): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (i, j, v) in d.pairs() {
        if a[i] == a[j] {
            within.push(v);
        } else {
            between.push(v);
        }
    }
    if within.is_empty() || between.is_empty() {
        return Err(Error::UndefinedIndex(
            "Gamma needs both within- and between-cluster pairs".into(),
        ));
    }
    between.sort_by(f64::total_cmp);
    let (mut concordant, mut discordant) = (0u64, 0u64);
    for w in within {
        let below = between.partition_point(|&b| b < w);
        let not_above = between.partition_point(|&b| b <= w);
        discordant += below as u64;
        concordant += (between.len() - not_above) as u64;
    }
    let total = concordant + discordant;
    if total == 0 {
        return Err(Error::UndefinedIndex("all comparisons are ties".into()));
    }
    Ok((concordant as f64 - discordant as f64) / total as f64)
}

/// Mean silhouette width; members of singleton clusters score 0.
pub fn silhouette_index(d: &DistanceMatrix, labels: &PartitionLabels) -> Result<f64> {
    check_sizes(d, labels)?;
    let n = d.n();
    if n < labels.k() + 1 {
        return Err(Error::InvalidConfig(format!(
            "silhouette needs n >= k + 1, got n = {n}, k = {}",
            labels.k()
        )));
    }
    let a = labels.assignments();
    let sizes = labels.sizes();
    let mut total = 0.0;
    let mut sums = vec![0.0; labels.k()];
    for i in 0..n {
        sums.fill(0.0);
        for j in 0..n {
            if j != i {
                sums[a[j]] += d.get(i, j);
            }
        }
        let own = a[i];
        if sizes[own] == 1 {
            continue;
        }
        let intra = sums[own] / (sizes[own] - 1) as f64;
        let nearest = (0..labels.k())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = intra.max(nearest);
        if denom > 0.0 {
            total += (nearest - intra) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Hubert–Levin C-index: within-cluster distance sum rescaled between the
/// sums of the same number of smallest and largest pairwise distances.
pub fn c_index(d: &DistanceMatrix, labels: &PartitionLabels) -> Result<f64> {
    check_sizes(d, labels)?;
    let a = labels.assignments();
    let mut within_sum = 0.0;
    let mut n_within = 0;
    for (i, j, v) in d.pairs() {
        if a[i] == a[j] {
            within_sum += v;
            n_within += 1;
        }
    }
    if n_within == 0 {
        return Err(Error::UndefinedIndex("C-index needs within-cluster pairs".into()));
    }
    let mut all = d.condensed().to_vec();
    all.sort_by(f64::total_cmp);
    let s_min: f64 = all[..n_within].iter().sum();
    let s_max: f64 = all[all.len() - n_within..].iter().sum();
    if s_max <= s_min {
        return Err(Error::UndefinedIndex("all pairwise distances are equal".into()));
    }
    Ok(((within_sum - s_min) / (s_max - s_min)).clamp(0.0, 1.0))
}

/// Larsen–Aone F-measure: class-size weighted best F score over clusters.
pub fn f_measure(predicted: &PartitionLabels, truth: &PartitionLabels) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidData(format!(
            "{} predictions for {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let n = truth.len();
    if n == 0 {
        return Err(Error::InvalidData("empty partition".into()));
    }
    let mut table = vec![vec![0usize; predicted.k()]; truth.k()];
    for (&t, &p) in truth.assignments().iter().zip(predicted.assignments()) {
        table[t][p] += 1;
    }
    let class_sizes = truth.sizes();
    let cluster_sizes = predicted.sizes();
    let mut f = 0.0;
    for (class, row) in table.iter().enumerate() {
        let best = row
            .iter()
            .enumerate()
            .filter(|(_, &nij)| nij > 0)
            .map(|(cluster, &nij)| {
                let precision = nij as f64 / cluster_sizes[cluster] as f64;
                let recall = nij as f64 / class_sizes[class] as f64;
                2.0 * precision * recall / (precision + recall)
            })
            .fold(0.0, f64::max);
        f += class_sizes[class] as f64 / n as f64 * best;
    }
    Ok(f)
}

/// One agglomeration: clusters `a` and `b` (ids as in SciPy: leaves are
/// `0..n`, merge `s` creates id `n + s`) joined at `height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Stepwise dendrogram, merges sorted by non-decreasing height.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
    /// Leaves grouped by merge step, used to cut without re-walking the tree.
    steps: Vec<(usize, usize)>,
}

impl Dendrogram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat clustering with `k` clusters, ids in order of first appearance.
    pub fn cut(&self, k: usize) -> Result<PartitionLabels> {
        if k < 1 || k > self.n {
            return Err(Error::InvalidConfig(format!(
                "cluster count must be in 1..={}, got {k}",
                self.n
            )));
        }
        let mut uf = UnionFind::new(self.n);
        for &(x, y) in &self.steps[..self.n - k] {
            uf.union(x, y);
        }
        let roots: Vec<usize> = (0..self.n).map(|i| uf.find(i)).collect();
        Ok(PartitionLabels::from_labels(&roots))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let root = ra.min(rb);
        self.parent[ra.max(rb)] = root;
        root
    }
}

/// Ward linkage on the rows of `x`.
///
/// Uses the nearest-neighbour chain with the Lance–Williams update on squared
/// Euclidean distances; heights are the squared-distance merge costs.
pub fn ward_linkage(x: &DMatrix<f64>) -> Dendrogram {
    let n = x.nrows();
    let t = x.transpose();
    let row = |i: usize| &t.as_slice()[i * x.ncols()..(i + 1) * x.ncols()];
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_euclidean(row(i), row(j));
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // Raw merges in the order found: (slot a, slot b, height).
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();

    while raw.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("active cluster"));
        }
        loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|k| chain[k]);
            // Prefer the previous chain element on ties so the chain terminates.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |b| dist[a * n + b]);
            for c in 0..n {
                if c != a && active[c] && dist[a * n + c] < best_d {
                    best = Some(c);
                    best_d = dist[a * n + c];
                }
            }
            let b = best.expect("another active cluster");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                raw.push((a.min(b), a.max(b), best_d));
                // Merge b into slot lo.
                let (lo, hi) = (a.min(b), a.max(b));
                let (n_lo, n_hi) = (size[lo] as f64, size[hi] as f64);
                let d_lohi = dist[lo * n + hi];
                for c in 0..n {
                    if !active[c] || c == lo || c == hi {
                        continue;
                    }
                    let n_c = size[c] as f64;
                    let v = ((n_lo + n_c) * dist[lo * n + c] + (n_hi + n_c) * dist[hi * n + c]
                        - n_c * d_lohi)
                        / (n_lo + n_hi + n_c);
                    dist[lo * n + c] = v;
                    dist[c * n + lo] = v;
                }
                active[hi] = false;
                size[lo] += size[hi];
                break;
            }
            chain.push(b);
        }
    }

    // Order merges by height (stable), then relabel slots into cluster ids.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].2.total_cmp(&raw[j].2));
    let mut uf = UnionFind::new(n);
    let mut id_of_root: Vec<usize> = (0..n).collect();
    let mut members = vec![1usize; n];
    let mut merges = Vec::with_capacity(raw.len());
    let mut steps = Vec::with_capacity(raw.len());
    for (s, &k) in order.iter().enumerate() {
        let (a, b, height) = raw[k];
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (ida, idb) = (id_of_root[ra], id_of_root[rb]);
        let total = members[ra] + members[rb];
        let root = uf.union(ra, rb);
        id_of_root[root] = n + s;
        members[root] = total;
        merges.push(Merge {
            a: ida.min(idb),
            b: ida.max(idb),
            height,
            size: total,
        });
        steps.push((a, b));
    }
    Dendrogram { n, merges, steps }
}

/// Ward clustering of the rows of `x` into `k` clusters.
pub fn ward_cluster(x: &DMatrix<f64>, k: usize) -> Result<PartitionLabels> {
    ward_linkage(x).cut(k)
}

/// Best F-measure over cluster counts `1..=max_k` of one Ward dendrogram.
pub fn best_f_measure(
    dendrogram: &Dendrogram,
    truth: &PartitionLabels,
    max_k: usize,
) -> Result<(f64, usize)> {
    let upper = max_k.min(dendrogram.n());
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 1..=upper {
        let f = f_measure(&dendrogram.cut(k)?, truth)?;
        if f > best.0 {
            best = (f, k);
        }
    }
    if best.1 == 0 {
        return Err(Error::InvalidConfig("empty cluster-count sweep".into()));
    }
    Ok(best)
}
