//! Construction of the guided sequence of projections.
//!
//! The sequence starts from the densest group of `q` observations, adds the
//! closest remaining observation, orders the seed by leave-one-out distances
//! and then grows at either end: each step fits the first and the last `q`
//! observations of the current order and adds whichever candidate is closer
//! to its frontier window. Every run of `q` consecutive observations in the
//! final order spans one projection; evaluating all of them gives the
//! transformed representation of an observation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_finite, DataMatrix, SelectionIndex};
use crate::distance::Rows;
use crate::error::{Error, Result};
use crate::projection::{OsdKind, Projection};

/// Parameters of the sequence construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequencerConfig {
    /// Observations per projection window.
    pub q: usize,
    pub osd_kind: OsdKind,
    /// Seed for tie-breaking.
    pub rng_seed: u64,
}

impl Default for SequencerConfig {
    fn default() -> Self {
        Self {
            q: 10,
            osd_kind: OsdKind::OdOnly,
            rng_seed: 42,
        }
    }
}

impl SequencerConfig {
    pub fn with_q(q: usize) -> Self {
        Self {
            q,
            ..Self::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.q < 2 || self.q >= n {
            return Err(Error::InvalidConfig(format!(
                "q must satisfy 2 <= q < n = {n}, got {}",
                self.q
            )));
        }
        Ok(())
    }
}

/// End of the sequence an observation was added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub index: usize,
    pub side: Side,
    /// OSD of the added observation against the window it was chosen by.
    pub osd: f64,
    /// Number of candidates sharing the winning value.
    pub ties: usize,
}

/// Final order of all observations; window `j` is `order[j..j + q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedSequence {
    pub order: Vec<usize>,
    pub q: usize,
    pub seed_set: Vec<usize>,
    pub step_log: Vec<StepRecord>,
    #[serde(default)]
    pub osd_kind: OsdKind,
}

impl GuidedSequence {
    pub fn n_projections(&self) -> usize {
        self.order.len() + 1 - self.q
    }

    pub fn window(&self, j: usize) -> &[usize] {
        &self.order[j..j + self.q]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[usize]> {
        self.order.windows(self.q)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seq: Self = serde_json::from_str(s)?;
        let n = seq.order.len();
        SelectionIndex::new(seq.order.clone(), n)?;
        if seq.q < 2 || seq.q > n {
            return Err(Error::InvalidData(format!(
                "sequence window size {} incompatible with {n} observations",
                seq.q
            )));
        }
        Ok(seq)
    }
}

/// n×(n−q+1) matrix of OSD values; column `j` measures every observation
/// against window `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpMatrix {
    values: DMatrix<f64>,
}

impl GpMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidData(
                "GP values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_projections(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_names(&self) -> Vec<String> {
        (1..=self.n_projections()).map(|j| format!("gp_{j}")).collect()
    }
}

/// Seeded argmin over `(index, value)` candidates; exact ties are broken
/// uniformly at random. Returns the winner, its value and the tie count.
fn seeded_argmin(
    candidates: impl Iterator<Item = (usize, f64)>,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, f64, usize)> {
    let mut best = f64::INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    for (i, v) in candidates {
        match v.total_cmp(&best) {
            std::cmp::Ordering::Less => {
                best = v;
                tied.clear();
                tied.push(i);
            }
            std::cmp::Ordering::Equal => tied.push(i),
            std::cmp::Ordering::Greater => {}
        }
    }
    let pick = match tied.len() {
        0 => return None,
        1 => tied[0],
        k => tied[rng.random_range(0..k)],
    };
    Some((pick, best, tied.len()))
}

/// Dense starting selection: the `q` nearest observations (self included)
/// around the observation whose `q`-th nearest distance is smallest.
pub fn select_seed(x: &DataMatrix, q: usize, rng_seed: u64) -> Result<SelectionIndex> {
    let n = x.nrows();
    SequencerConfig {
        q,
        osd_kind: OsdKind::OdOnly,
        rng_seed,
    }
    .validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let rows = Rows::new(x.values());

    let qth: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| rows.distance(i, j)).collect();
            let (_, v, _) = d.select_nth_unstable_by(q - 1, f64::total_cmp);
            *v
        })
        .collect();
    let (center, radius, _) = seeded_argmin(qth.iter().copied().enumerate(), &mut rng)
        .ok_or_else(|| Error::InvalidData("no observations".into()))?;

    let dist: Vec<f64> = (0..n).map(|j| rows.distance(center, j)).collect();
    let mut chosen: Vec<usize> = (0..n).filter(|&j| dist[j] < radius).collect();
    let mut boundary: Vec<usize> = (0..n).filter(|&j| dist[j] == radius).collect();
    boundary.shuffle(&mut rng);
    chosen.extend(boundary.into_iter().take(q - chosen.len()));
    chosen.sort_unstable();
    SelectionIndex::new(chosen, n)
}

#[derive(Debug, Clone)]
struct Frontier {
    window: Vec<usize>,
    /// OSD against `window` for every row still available when fitted.
    osd: Vec<f64>,
}

/// A sequence under construction.
#[derive(Debug, Clone)]
pub struct SequenceState {
    order: VecDeque<usize>,
    available: Vec<bool>,
    n_available: usize,
    q: usize,
    osd_kind: OsdKind,
    seed_set: Vec<usize>,
    step_log: Vec<StepRecord>,
    rng: ChaCha8Rng,
    left: Option<Frontier>,
    right: Option<Frontier>,
    fits: usize,
}

impl SequenceState {
    pub fn order(&self) -> Vec<usize> {
        self.order.iter().copied().collect()
    }

    pub fn step_log(&self) -> &[StepRecord] {
        &self.step_log
    }

    pub fn seed_set(&self) -> &[usize] {
        &self.seed_set
    }

    /// Observations not yet placed in the sequence.
    pub fn available(&self) -> Vec<usize> {
        (0..self.available.len())
            .filter(|&i| self.available[i])
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.n_available == 0
    }

    /// Number of projections fitted so far.
    pub fn fits(&self) -> usize {
        self.fits
    }

    pub fn finish(self) -> GuidedSequence {
        GuidedSequence {
            order: self.order.into_iter().collect(),
            q: self.q,
            seed_set: self.seed_set,
            step_log: self.step_log,
            osd_kind: self.osd_kind,
        }
    }

    fn refresh(&mut self, values: &DMatrix<f64>, side: Side) -> Result<()> {
        let q = self.q;
        let len = self.order.len();
        let window: Vec<usize> = match side {
            Side::Left => self.order.range(..q).copied().collect(),
            Side::Right => self.order.range(len - q..).copied().collect(),
        };
        let slot = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        if slot.as_ref().is_some_and(|f| f.window == window) {
            return Ok(());
        }
        let projection = Projection::fit(values, &window)?;
        self.fits += 1;
        let candidates = self.available();
        let scores = projection.osd_rows(values, &candidates, self.osd_kind)?;
        let mut osd = vec![f64::INFINITY; self.available.len()];
        for (i, s) in candidates.into_iter().zip(scores) {
            osd[i] = s;
        }
        let frontier = Some(Frontier { window, osd });
        match side {
            Side::Left => self.left = frontier,
            Side::Right => self.right = frontier,
        }
        Ok(())
    }

    fn best(&mut self, side: Side) -> Option<(usize, f64, usize)> {
        let frontier = match side {
            Side::Left => self.left.as_ref()?,
            Side::Right => self.right.as_ref()?,
        };
        let available = &self.available;
        let candidates = frontier
            .osd
            .iter()
            .enumerate()
            .filter(|(i, _)| available[*i])
            .map(|(i, &v)| (i, v));
        seeded_argmin(candidates, &mut self.rng)
    }

    fn take(&mut self, i: usize) {
        self.available[i] = false;
        self.n_available -= 1;
    }
}

/// First step: adds the observation closest to the seed and orders the seed
/// by decreasing leave-one-out distance.
pub fn order_initial(
    x: &DataMatrix,
    seed_sel: &SelectionIndex,
    cfg: &SequencerConfig,
) -> Result<SequenceState> {
    let n = x.nrows();
    cfg.validate(n)?;
    if seed_sel.q() != cfg.q {
        return Err(Error::InvalidConfig(format!(
            "seed has {} observations, config expects q = {}",
            seed_sel.q(),
            cfg.q
        )));
    }
    if seed_sel.indices().iter().any(|&i| i >= n) {
        return Err(Error::InvalidSelection("seed refers to missing rows".into()));
    }
    let values = x.values();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(1);

    let seed = seed_sel.indices().to_vec();
    let mut available = vec![true; n];
    for &i in &seed {
        available[i] = false;
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| available[i]).collect();
    let projection = Projection::fit(values, &seed)?;
    let scores = projection.osd_rows(values, &candidates, cfg.osd_kind)?;
    let (first, first_osd, ties) =
        seeded_argmin(candidates.iter().copied().zip(scores), &mut rng)
            .ok_or_else(|| Error::InvalidConfig("no observation outside the seed".into()))?;

    let mut lod = Vec::with_capacity(seed.len());
    for &j in &seed {
        let mut loo: Vec<usize> = seed.iter().copied().filter(|&i| i != j).collect();
        loo.push(first);
        let p = Projection::fit(values, &loo)?;
        lod.push((j, p.osd_rows(values, &[j], cfg.osd_kind)?[0]));
    }
    lod.shuffle(&mut rng);
    lod.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut order: VecDeque<usize> = lod.iter().map(|&(j, _)| j).collect();
    order.push_back(first);
    available[first] = false;

    Ok(SequenceState {
        order,
        n_available: n - seed.len() - 1,
        available,
        q: cfg.q,
        osd_kind: cfg.osd_kind,
        seed_set: seed,
        step_log: vec![StepRecord {
            step: 1,
            index: first,
            side: Side::Right,
            osd: first_osd,
            ties,
        }],
        rng,
        left: None,
        right: None,
        fits: 1 + cfg.q,
    })
}

/// Adds one observation at whichever end of the sequence offers the smaller
/// OSD; ties go to the left.
pub fn advance_step(x: &DataMatrix, state: &mut SequenceState) -> Result<()> {
    if state.is_complete() {
        return Err(Error::InvalidConfig(
            "no observations left to add".into(),
        ));
    }
    if x.nrows() != state.available.len() {
        return Err(Error::InvalidData(format!(
            "state built for {} observations, data has {}",
            state.available.len(),
            x.nrows()
        )));
    }
    let values = x.values();
    state.refresh(values, Side::Left)?;
    state.refresh(values, Side::Right)?;
    let (i_left, osd_left, ties_left) = state.best(Side::Left).expect("candidates available");
    let (i_right, osd_right, ties_right) = state.best(Side::Right).expect("candidates available");

    let step = state.step_log.len() + 1;
    let record = if osd_left <= osd_right {
        state.order.push_front(i_left);
        state.take(i_left);
        StepRecord {
            step,
            index: i_left,
            side: Side::Left,
            osd: osd_left,
            ties: ties_left,
        }
    } else {
        state.order.push_back(i_right);
        state.take(i_right);
        StepRecord {
            step,
            index: i_right,
            side: Side::Right,
            osd: osd_right,
            ties: ties_right,
        }
    };
    state.step_log.push(record);
    Ok(())
}

/// Runs the whole construction and evaluates all `n − q + 1` projections on
/// the fitted observations.
pub fn build_sequence(x: &DataMatrix, cfg: &SequencerConfig) -> Result<(GuidedSequence, GpMatrix)> {
    let sequence = build_order(x, cfg)?;
    let gp = evaluate_windows(&sequence, x.values(), x.values())?;
    Ok((sequence, gp))
}

/// Like [`build_sequence`] without evaluating the projections.
pub fn build_order(x: &DataMatrix, cfg: &SequencerConfig) -> Result<GuidedSequence> {
    cfg.validate(x.nrows())?;
    let seed = select_seed(x, cfg.q, cfg.rng_seed)?;
    let mut state = order_initial(x, &seed, cfg)?;
    while !state.is_complete() {
        advance_step(x, &mut state)?;
    }
    Ok(state.finish())
}

/// Evaluates every window projection of `seq` (fitted on `x_fit`) at each row
/// of `x_new`.
pub fn transform(seq: &GuidedSequence, x_fit: &DataMatrix, x_new: &DMatrix<f64>) -> Result<GpMatrix> {
    if x_new.ncols() != x_fit.ncols() {
        return Err(Error::InvalidData(format!(
            "new data has {} columns, fitted data has {}",
            x_new.ncols(),
            x_fit.ncols()
        )));
    }
    if seq.order.len() != x_fit.nrows() {
        return Err(Error::InvalidData(format!(
            "sequence covers {} observations, fitted data has {}",
            seq.order.len(),
            x_fit.nrows()
        )));
    }
    check_finite(x_new)?;
    evaluate_windows(seq, x_fit.values(), x_new)
}

fn evaluate_windows(
    seq: &GuidedSequence,
    fit: &DMatrix<f64>,
    eval: &DMatrix<f64>,
) -> Result<GpMatrix> {
    let rows: Vec<usize> = (0..eval.nrows()).collect();
    let columns = (0..seq.n_projections())
        .into_par_iter()
        .map(|j| Projection::fit(fit, seq.window(j))?.osd_rows(eval, &rows, seq.osd_kind))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let values = DMatrix::from_fn(eval.nrows(), columns.len(), |i, j| columns[j][i]);
    Ok(GpMatrix { values })
}
