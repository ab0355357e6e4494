//! Per-method grid optimization of validity indices and replicated
//! simulation experiments.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{random_projection, DiffusionModel, Method, PcaModel};
use crate::data::DataMatrix;
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::projection::OsdKind;
use crate::sequencer::{build_sequence, SequencerConfig};
use crate::sim::{gen_setup1, gen_setup2, Setup1Spec, Setup2Spec};
use crate::validity::{
    best_f_measure, c_index, gamma_index, silhouette_index, ward_linkage, PartitionLabels,
    ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Gamma,
    Silhouette,
    CIndex,
    FMeasure,
}

impl IndexKind {
    pub const ALL: [IndexKind; 4] = [
        IndexKind::Gamma,
        IndexKind::Silhouette,
        IndexKind::CIndex,
        IndexKind::FMeasure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Gamma => "gamma",
            IndexKind::Silhouette => "silhouette",
            IndexKind::CIndex => "c_index",
            IndexKind::FMeasure => "f_measure",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gamma" => Ok(IndexKind::Gamma),
            "silhouette" => Ok(IndexKind::Silhouette),
            "c_index" | "cindex" => Ok(IndexKind::CIndex),
            "f_measure" | "fmeasure" | "f" => Ok(IndexKind::FMeasure),
            other => Err(Error::InvalidConfig(format!("unknown index '{other}'"))),
        }
    }

    /// Larger is better for every index except the C-index.
    pub fn maximize(self) -> bool {
        self != IndexKind::CIndex
    }

    pub fn value_of(self, report: &ValidationReport) -> Option<f64> {
        match self {
            IndexKind::Gamma => report.gamma,
            IndexKind::Silhouette => report.silhouette,
            IndexKind::CIndex => report.c_index,
            IndexKind::FMeasure => report.f_measure,
        }
    }

    /// Orientation in which larger is better.
    fn score(self, value: f64) -> f64 {
        if self.maximize() {
            value
        } else {
            -value
        }
    }
}

/// Aggregation of index values over random-projection repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RpAggregate {
    #[default]
    Best,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub indices: Vec<IndexKind>,
    /// Inclusive range of GP window sizes.
    pub gp_q: (usize, usize),
    /// Inclusive range of diffusion-map neighbour counts as fractions of n.
    pub knn_fraction: (f64, f64),
    /// Points per range wider than [`FULL_INTEGER_WIDTH`].
    pub resolution: usize,
    /// Upper bound on the dimension of RP; defaults to the PCA rank.
    pub rp_k_max: Option<usize>,
    pub rp_repeats: usize,
    pub rp_aggregate: RpAggregate,
    /// Largest cluster count in the F-measure sweep; defaults to min(n, 50).
    pub cluster_cap: Option<usize>,
    pub osd_kind: OsdKind,
    pub rng_seed: u64,
}

/// Integer ranges at most this wide are enumerated completely.
pub const FULL_INTEGER_WIDTH: usize = 30;

pub const DEFAULT_CLUSTER_CAP: usize = 50;

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            indices: IndexKind::ALL.to_vec(),
            gp_q: (5, 30),
            knn_fraction: (0.005, 0.035),
            resolution: 10,
            rp_k_max: None,
            rp_repeats: 500,
            rp_aggregate: RpAggregate::Best,
            cluster_cap: None,
            osd_kind: OsdKind::default(),
            rng_seed: 42,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::InvalidConfig("no indices to optimize".into()));
        }
        if self.gp_q.0 < 2 || self.gp_q.0 > self.gp_q.1 {
            return Err(Error::InvalidConfig(format!("invalid q range {:?}", self.gp_q)));
        }
        let (lo, hi) = self.knn_fraction;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid knn fraction range {:?}",
                self.knn_fraction
            )));
        }
        if self.resolution < 1 {
            return Err(Error::InvalidConfig("resolution must be >= 1".into()));
        }
        if self.rp_repeats < 1 {
            return Err(Error::InvalidConfig("rp repeats must be >= 1".into()));
        }
        if self.rp_k_max == Some(0) || self.cluster_cap == Some(0) {
            return Err(Error::InvalidConfig("bounds must be >= 1".into()));
        }
        self.osd_kind.validate()
    }

    fn cluster_cap(&self, n: usize) -> usize {
        self.cluster_cap.unwrap_or(DEFAULT_CLUSTER_CAP).min(n)
    }
}

/// Grid over the inclusive integer range `lo..=hi`: every integer when the
/// range is narrow, otherwise `resolution` evenly spaced rounded values
/// including both ends.
pub fn integer_grid(lo: usize, hi: usize, resolution: usize) -> Vec<usize> {
    if hi < lo {
        return Vec::new();
    }
    if hi - lo <= FULL_INTEGER_WIDTH || resolution >= hi - lo + 1 {
        return (lo..=hi).collect();
    }
    let mut out: Vec<usize> = (0..resolution)
        .map(|i| {
            if resolution == 1 {
                lo
            } else {
                let t = i as f64 / (resolution - 1) as f64;
                (lo as f64 + t * (hi - lo) as f64).round() as usize
            }
        })
        .collect();
    out.dedup();
    out
}

/// Neighbour counts for the diffusion-map bandwidth, `resolution` fractions
/// of n rounded to integers in `1..n`.
pub fn knn_grid(n: usize, fraction: (f64, f64), resolution: usize) -> Vec<usize> {
    let steps = resolution.max(1);
    let mut out: Vec<usize> = (0..steps)
        .map(|i| {
            let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
            let f = fraction.0 + t * (fraction.1 - fraction.0);
            ((f * n as f64).round() as usize).clamp(1, n - 1)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Index values of `scores` against `truth`; indices undefined for this
/// point are left empty.
pub fn evaluate_scores(
    scores: &DMatrix<f64>,
    truth: &PartitionLabels,
    indices: &[IndexKind],
    cluster_cap: usize,
) -> Result<ValidationReport> {
    if scores.nrows() != truth.len() {
        return Err(Error::InvalidData(format!(
            "{} labels for {} observations",
            truth.len(),
            scores.nrows()
        )));
    }
    let mut report = ValidationReport::default();
    let needs_distances = indices.iter().any(|&i| i != IndexKind::FMeasure);
    let d = needs_distances.then(|| DistanceMatrix::from_points(scores));
    for &index in indices {
        let value = match index {
            IndexKind::Gamma => gamma_index(d.as_ref().expect("computed"), truth),
            IndexKind::Silhouette => silhouette_index(d.as_ref().expect("computed"), truth),
            IndexKind::CIndex => c_index(d.as_ref().expect("computed"), truth),
            IndexKind::FMeasure => {
                best_f_measure(&ward_linkage(scores), truth, cluster_cap).map(|(f, k)| {
                    report.f_measure_k = Some(k);
                    f
                })
            }
        };
        let value = match value {
            Ok(v) => Some(v),
            Err(e @ (Error::UndefinedIndex(_) | Error::InvalidConfig(_))) => {
                log::debug!("{} undefined: {e}", index.name());
                None
            }
            Err(e) => return Err(e),
        };
        match index {
            IndexKind::Gamma => report.gamma = value,
            IndexKind::Silhouette => report.silhouette = value,
            IndexKind::CIndex => report.c_index = value,
            IndexKind::FMeasure => report.f_measure = value,
        }
    }
    Ok(report)
}

/// Best value of one index and the grid point attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestValue {
    pub index: IndexKind,
    pub value: f64,
    /// Position in [`GridResult::points`].
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub method: Method,
    /// Every evaluated grid point, in grid order.
    pub points: Vec<ValidationReport>,
    /// One entry per requested index that was defined at some grid point.
    pub best: Vec<BestValue>,
}

impl GridResult {
    pub fn best_for(&self, index: IndexKind) -> Option<&BestValue> {
        self.best.iter().find(|b| b.index == index)
    }

    pub fn best_point(&self, index: IndexKind) -> Option<&ValidationReport> {
        self.best_for(index).map(|b| &self.points[b.point])
    }
}

fn with_params(
    mut report: ValidationReport,
    method: Method,
    params: &[(&str, serde_json::Value)],
) -> ValidationReport {
    report.method = method.name().to_string();
    for (key, value) in params {
        report.parameters.insert((*key).to_string(), value.clone());
    }
    report
}

fn select_best(method: Method, points: Vec<ValidationReport>, indices: &[IndexKind]) -> GridResult {
    let best = indices
        .iter()
        .filter_map(|&index| {
            let mut best: Option<BestValue> = None;
            for (i, p) in points.iter().enumerate() {
                let Some(v) = index.value_of(p) else { continue };
                // First attaining point wins ties.
                if best.as_ref().is_none_or(|b| index.score(v) > index.score(b.value)) {
                    best = Some(BestValue { index, value: v, point: i });
                }
            }
            if best.is_none() {
                log::warn!("{}: {} undefined at every grid point", method.name(), index.name());
            }
            best
        })
        .collect();
    GridResult {
        method,
        points,
        best,
    }
}

fn gp_points(x: &DataMatrix, truth: &PartitionLabels, grid: &GridSpec) -> Result<Vec<ValidationReport>> {
    let n = x.nrows();
    let hi = grid.gp_q.1.min(n - 1);
    if grid.gp_q.0 > hi {
        return Err(Error::InvalidConfig(format!(
            "q range {:?} leaves no window size below n = {n}",
            grid.gp_q
        )));
    }
    let cap = grid.cluster_cap(n);
    integer_grid(grid.gp_q.0, hi, grid.resolution)
        .into_par_iter()
        .map(|q| {
            let cfg = SequencerConfig {
                q,
                osd_kind: grid.osd_kind,
                rng_seed: grid.rng_seed,
            };
            let (_, gp) = build_sequence(x, &cfg)?;
            let report = evaluate_scores(gp.values(), truth, &grid.indices, cap)?;
            Ok(with_params(report, Method::Gp, &[("q", q.into())]))
        })
        .collect()
}

fn pca_points(x: &DataMatrix, truth: &PartitionLabels, grid: &GridSpec) -> Result<Vec<ValidationReport>> {
    let model = PcaModel::fit(x.values())?;
    let cap = grid.cluster_cap(x.nrows());
    integer_grid(1, model.rank(), grid.resolution)
        .into_par_iter()
        .map(|k| {
            let t = model.transform(k)?;
            let report = evaluate_scores(&t.scores, truth, &grid.indices, cap)?;
            Ok(with_params(report, Method::Pca, &[("k", k.into())]))
        })
        .collect()
}

fn diffusion_points(
    x: &DataMatrix,
    truth: &PartitionLabels,
    grid: &GridSpec,
) -> Result<Vec<ValidationReport>> {
    let n = x.nrows();
    let d = DistanceMatrix::from_points(x.values());
    let cap = grid.cluster_cap(n);
    let mut out = Vec::new();
    for knn in knn_grid(n, grid.knn_fraction, grid.resolution) {
        let model = match DiffusionModel::fit(&d, knn) {
            Ok(m) => m,
            Err(e @ Error::DegenerateKernel(_)) => {
                log::warn!("diff: skipping knn = {knn}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let points: Result<Vec<_>> = integer_grid(1, model.max_components(), grid.resolution)
            .into_par_iter()
            .map(|k| {
                let t = model.transform(k)?;
                let report = evaluate_scores(&t.scores, truth, &grid.indices, cap)?;
                let params = [
                    ("knn", knn.into()),
                    ("k", k.into()),
                    ("epsilon", model.epsilon().into()),
                ];
                Ok(with_params(report, Method::Diff, &params))
            })
            .collect();
        out.extend(points?);
    }
    Ok(out)
}

/// Seed of the `repeat`-th random projection drawn from `base`.
pub fn rp_repeat_seed(base: u64, repeat: usize) -> u64 {
    derive_seed(base, &[0x5250, repeat as u64])
}

fn rp_points(x: &DataMatrix, truth: &PartitionLabels, grid: &GridSpec) -> Result<Vec<ValidationReport>> {
    let n = x.nrows();
    let k_max = match grid.rp_k_max {
        Some(k) => k,
        None => PcaModel::fit(x.values())?.rank(),
    };
    let cap = grid.cluster_cap(n);
    integer_grid(1, k_max, grid.resolution)
        .into_iter()
        .map(|k| {
            let reports: Vec<ValidationReport> = (0..grid.rp_repeats)
                .into_par_iter()
                .map(|rep| {
                    let t = random_projection(x.values(), k, rp_repeat_seed(grid.rng_seed, rep))?;
                    evaluate_scores(&t.scores, truth, &grid.indices, cap)
                })
                .collect::<Result<_>>()?;
            let mut agg = ValidationReport::default();
            for &index in &grid.indices {
                let values: Vec<(usize, f64)> = reports
                    .iter()
                    .enumerate()
                    .filter_map(|(i, r)| index.value_of(r).map(|v| (i, v)))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let value = match grid.rp_aggregate {
                    RpAggregate::Best => {
                        let &(i, v) = values
                            .iter()
                            .reduce(|a, b| if index.score(b.1) > index.score(a.1) { b } else { a })
                            .expect("nonempty");
                        if index == IndexKind::FMeasure {
                            agg.f_measure_k = reports[i].f_measure_k;
                        }
                        v
                    }
                    RpAggregate::Mean => values.iter().map(|v| v.1).sum::<f64>() / values.len() as f64,
                };
                match index {
                    IndexKind::Gamma => agg.gamma = Some(value),
                    IndexKind::Silhouette => agg.silhouette = Some(value),
                    IndexKind::CIndex => agg.c_index = Some(value),
                    IndexKind::FMeasure => agg.f_measure = Some(value),
                }
            }
            let params = [("k", k.into()), ("repeats", grid.rp_repeats.into())];
            Ok(with_params(agg, Method::Rp, &params))
        })
        .collect()
}

/// Evaluates every grid point of `method` and keeps the per-index optimum.
pub fn grid_optimize(
    x: &DataMatrix,
    truth: &PartitionLabels,
    method: Method,
    grid: &GridSpec,
) -> Result<GridResult> {
    grid.validate()?;
    if truth.len() != x.nrows() {
        return Err(Error::InvalidData(format!(
            "{} labels for {} observations",
            truth.len(),
            x.nrows()
        )));
    }
    let points = match method {
        Method::Raw => {
            let report = evaluate_scores(x.values(), truth, &grid.indices, grid.cluster_cap(x.nrows()))?;
            vec![with_params(report, Method::Raw, &[])]
        }
        Method::Gp => gp_points(x, truth, grid)?,
        Method::Pca => pca_points(x, truth, grid)?,
        Method::Diff => diffusion_points(x, truth, grid)?,
        Method::Rp => rp_points(x, truth, grid)?,
    };
    Ok(select_best(method, points, &grid.indices))
}

/// Deterministic sub-seed for a tagged task.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut seed = master;
    for &tag in tags {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tag);
        seed = rng.next_u64();
    }
    seed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setup {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Setup {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "setup1" => Ok(Setup::One),
            "2" | "setup2" => Ok(Setup::Two),
            other => Err(Error::InvalidConfig(format!("unknown setup '{other}'"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Setup::One => 1,
            Setup::Two => 2,
        }
    }

    pub fn generate(self, r: usize, n_per_group: usize, rng_seed: u64) -> Result<DataMatrix> {
        match self {
            Setup::One => gen_setup1(&Setup1Spec { r, n_per_group, rng_seed }),
            Setup::Two => gen_setup2(&Setup2Spec { r, n_per_group, rng_seed }),
        }
    }

    /// Number of informative variables, the default RP dimension bound.
    pub fn informative(self, r: usize) -> usize {
        match self {
            Setup::One => 50 + r.abs_diff(51).min(50),
            Setup::Two => crate::sim::SETUP2_INFORMATIVE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub setup: Setup,
    pub r_values: Vec<usize>,
    pub replicates: usize,
    pub n_per_group: usize,
    /// Transforms besides the untransformed baseline, which always runs.
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub master_seed: u64,
}

impl ExperimentSpec {
    /// Two groups of 50, 10 replicates, default grids.
    pub fn desk(setup: Setup, r_values: Vec<usize>) -> Self {
        Self {
            setup,
            r_values,
            replicates: 10,
            n_per_group: 50,
            methods: vec![Method::Gp, Method::Pca, Method::Diff, Method::Rp],
            grid: GridSpec::default(),
            master_seed: 42,
        }
    }

    /// Groups of 100 and 25 replicates.
    pub fn paper_scale(setup: Setup, r_values: Vec<usize>) -> Self {
        Self {
            replicates: 25,
            n_per_group: 100,
            ..Self::desk(setup, r_values)
        }
    }

    fn methods(&self) -> Vec<Method> {
        let mut out = vec![Method::Raw];
        for &m in &self.methods {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn data_seed(&self, r: usize, replicate: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[u64::from(self.setup.number()), r as u64, replicate as u64],
        )
    }
}

/// Optimum of one index for one method on one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub setup: u8,
    pub r: usize,
    pub replicate: usize,
    pub data_seed: u64,
    pub method: Method,
    pub index: IndexKind,
    pub value: f64,
    pub q: Option<usize>,
    pub k: Option<usize>,
    pub knn: Option<usize>,
    pub clusters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub r: usize,
    pub method: Method,
    pub index: IndexKind,
    pub replicates: usize,
    pub mean: f64,
    /// Sample standard deviation over √replicates; empty for one replicate.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReplicateRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchmarkResult {
    pub fn values(&self, r: usize, method: Method, index: IndexKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|row| row.r == r && row.method == method && row.index == index)
            .map(|row| row.value)
            .collect()
    }

    pub fn summary_for(&self, r: usize, method: Method, index: IndexKind) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.r == r && s.method == method && s.index == index)
    }
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, Some((var / m).sqrt()))
}

fn replicate_rows(spec: &ExperimentSpec, r: usize, replicate: usize) -> Result<Vec<ReplicateRow>> {
    let data_seed = spec.data_seed(r, replicate);
    let x = spec.setup.generate(r, spec.n_per_group, data_seed)?;
    let truth = PartitionLabels::from_labels(x.labels().expect("simulated data is labelled"));
    let mut grid = spec.grid.clone();
    grid.rng_seed = derive_seed(data_seed, &[1]);
    if grid.rp_k_max.is_none() {
        grid.rp_k_max = Some(spec.setup.informative(r));
    }
    let mut rows = Vec::new();
    for method in spec.methods() {
        let result = grid_optimize(&x, &truth, method, &grid)?;
        for best in &result.best {
            let point = &result.points[best.point];
            let param = |key: &str| {
                point
                    .parameters
                    .get(key)
                    .and_then(|v| v.as_u64())
                    .map(|v| v as usize)
            };
            rows.push(ReplicateRow {
                setup: spec.setup.number(),
                r,
                replicate,
                data_seed,
                method,
                index: best.index,
                value: best.value,
                q: param("q"),
                k: param("k"),
                knn: param("knn"),
                clusters: (best.index == IndexKind::FMeasure)
                    .then_some(point.f_measure_k)
                    .flatten(),
            });
        }
    }
    log::info!(
        "setup {} r = {r} replicate {}/{} done",
        spec.setup.number(),
        replicate + 1,
        spec.replicates
    );
    Ok(rows)
}

/// Simulates every `(r, replicate)` pair, optimizes each method and
/// summarizes the optima per `(r, method, index)`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchmarkResult> {
    spec.grid.validate()?;
    if spec.r_values.is_empty() || spec.replicates == 0 {
        return Err(Error::InvalidConfig("experiment needs r values and replicates".into()));
    }
    let tasks: Vec<(usize, usize)> = spec
        .r_values
        .iter()
        .flat_map(|&r| (0..spec.replicates).map(move |rep| (r, rep)))
        .collect();
    let per_task: Vec<Vec<ReplicateRow>> = tasks
        .par_iter()
        .map(|&(r, rep)| replicate_rows(spec, r, rep))
        .collect::<Result<_>>()?;
    let rows: Vec<ReplicateRow> = per_task.into_iter().flatten().collect();

    let mut groups: BTreeMap<(usize, usize, IndexKind), (Method, Vec<f64>)> = BTreeMap::new();
    let methods = spec.methods();
    for row in &rows {
        let m = methods.iter().position(|&m| m == row.method).expect("known method");
        groups
            .entry((row.r, m, row.index))
            .or_insert_with(|| (row.method, Vec::new()))
            .1
            .push(row.value);
    }
    let summary = groups
        .into_iter()
        .map(|((r, _, index), (method, values))| {
            let (mean, stderr) = mean_and_stderr(&values);
            SummaryRow {
                r,
                method,
                index,
                replicates: values.len(),
                mean,
                stderr,
            }
        })
        .collect();
    Ok(BenchmarkResult {
        spec: spec.clone(),
        rows,
        summary,
    })
}
