//! Greedy diversity-coverage selection of representative series.
//!
//! Objective for a representative set `R` over all `n` series:
//!
//! ```text
//! alpha * Div(R) - (1 - alpha) * Cov(R)
//! Div(R) = min over pairs {i, j} in R of d(i, j)     (0 when |R| < 2)
//! Cov(R) = (1/n) * sum over all i of min over j in R of d(i, j)
//! ```
//!
//! Each step adds the candidate with the highest
//! `alpha * dDiv - (1 - alpha) * dCov`. On the empty set `Cov` is taken as 0,
//! so the first pick is the 1-medoid. Ties go to the lower resulting
//! coverage, then to the smaller index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheError, MatrixCache};
use crate::dtw::{DistanceMatrix, MatrixParams};
use crate::model::{DatasetId, ParamsError, SelectionParams};

/// Candidate counts at or above this are scored in parallel.
const PARALLEL_CANDIDATES: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("k = {k} is outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("alpha = {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("distance matrix is empty")]
    EmptyMatrix,
    #[error("representative set is empty")]
    EmptyRepresentativeSet,
    #[error("no cached distance matrix for these parameters")]
    MatrixMissing,
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl From<ParamsError> for SelectionError {
    fn from(e: ParamsError) -> Self {
        match e {
            ParamsError::KOutOfRange { k, n } => Self::KOutOfRange { k, n },
            ParamsError::AlphaOutOfRange(a) => Self::AlphaOutOfRange(a),
            // Segment count does not affect selection over a built matrix.
            ParamsError::ZeroSegments => Self::EmptyMatrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub picked: usize,
    pub delta_div: f64,
    pub delta_cov: f64,
    pub score: f64,
    pub div_after: f64,
    pub cov_after: f64,
    pub objective_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dataset_id: DatasetId,
    pub params: SelectionParams,
    pub representatives: Vec<Representative>,
    pub trace: Vec<GreedyStep>,
    pub final_div: f64,
    pub final_cov: f64,
    pub final_objective: f64,
}

impl SelectionResult {
    pub fn indices(&self) -> Vec<usize> {
        self.representatives.iter().map(|r| r.index).collect()
    }
}

/// `Div`: smallest pairwise distance among `chosen`, 0 below two members.
pub fn diversity(chosen: &[usize], matrix: &DistanceMatrix) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in chosen.iter().enumerate() {
        for &j in &chosen[a + 1..] {
            best = best.min(matrix.get(i, j));
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// `Cov`: mean distance from every series to its nearest member of `chosen`.
pub fn coverage(chosen: &[usize], matrix: &DistanceMatrix) -> Result<f64, SelectionError> {
    if chosen.is_empty() {
        return Err(SelectionError::EmptyRepresentativeSet);
    }
    let n = matrix.n();
    let sum: f64 = (0..n)
        .map(|i| {
            chosen
                .iter()
                .map(|&j| matrix.get(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(sum / n as f64)
}

pub fn objective(
    chosen: &[usize],
    matrix: &DistanceMatrix,
    alpha: f64,
) -> Result<f64, SelectionError> {
    let cov = coverage(chosen, matrix)?;
    Ok(alpha * diversity(chosen, matrix) - (1.0 - alpha) * cov)
}

fn combine(alpha: f64, div: f64, cov: f64) -> f64 {
    alpha * div - (1.0 - alpha) * cov
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    delta_div: f64,
    delta_cov: f64,
    score: f64,
    div_after: f64,
    cov_after: f64,
}

/// Scores closer than this fraction of the largest distance count as tied.
/// Gains that are equal in exact arithmetic can differ in the last bits
/// depending on summation order, and a fixed relative threshold keeps the
/// tie-break independent of the matrix scale.
const TIE_TOLERANCE: f64 = 1e-10;

fn tie_tolerance(matrix: &DistanceMatrix) -> f64 {
    matrix.as_flat().iter().copied().fold(0.0, f64::max) * TIE_TOLERANCE
}

/// Highest score wins; near-ties go to the lower `cov_after`, then to the
/// lower index.
fn choose(cands: Vec<Candidate>, tol: f64) -> Option<Candidate> {
    let top = cands
        .iter()
        .map(|c| c.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let low = cands
        .iter()
        .filter(|c| c.score >= top - tol)
        .map(|c| c.cov_after)
        .fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|c| c.score >= top - tol && c.cov_after <= low + tol)
        .min_by_key(|c| c.index)
}

fn validate(matrix: &DistanceMatrix, params: &SelectionParams) -> Result<(), SelectionError> {
    let n = matrix.n();
    if n == 0 {
        return Err(SelectionError::EmptyMatrix);
    }
    if params.k < 1 || params.k > n {
        return Err(SelectionError::KOutOfRange { k: params.k, n });
    }
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(SelectionError::AlphaOutOfRange(params.alpha));
    }
    Ok(())
}

/// Incremental state: `nearest[i]` is the distance from series `i` to its
/// closest representative (infinite while the set is empty).
struct SelectionState<'m> {
    matrix: &'m DistanceMatrix,
    chosen: Vec<usize>,
    in_set: Vec<bool>,
    nearest: Vec<f64>,
    div: f64,
    cov: f64,
}

impl<'m> SelectionState<'m> {
    fn new(matrix: &'m DistanceMatrix) -> Self {
        let n = matrix.n();
        Self {
            matrix,
            chosen: Vec::new(),
            in_set: vec![false; n],
            nearest: vec![f64::INFINITY; n],
            div: 0.0,
            cov: 0.0,
        }
    }

    fn evaluate(&self, t: usize, alpha: f64) -> Candidate {
        let row = self.matrix.row(t);
        let div_after = match self.chosen.len() {
            0 => 0.0,
            1 => row[self.chosen[0]],
            _ => self.chosen.iter().map(|&j| row[j]).fold(self.div, f64::min),
        };
        // d is symmetric, so row t doubles as column t.
        let sum: f64 = self
            .nearest
            .iter()
            .zip(row)
            .map(|(&near, &d)| near.min(d))
            .sum();
        let cov_after = sum / self.nearest.len() as f64;
        let delta_div = div_after - self.div;
        let delta_cov = cov_after - self.cov;
        Candidate {
            index: t,
            delta_div,
            delta_cov,
            score: combine(alpha, delta_div, delta_cov),
            div_after,
            cov_after,
        }
    }

    fn best_candidate(&self, alpha: f64, tol: f64) -> Candidate {
        let n = self.nearest.len();
        let eval = |t: usize| (!self.in_set[t]).then(|| self.evaluate(t, alpha));
        let cands = if n - self.chosen.len() >= PARALLEL_CANDIDATES {
            (0..n).into_par_iter().filter_map(eval).collect()
        } else {
            (0..n).filter_map(eval).collect()
        };
        choose(cands, tol).expect("at least one candidate remains while |R| < k <= n")
    }

    fn add(&mut self, c: &Candidate) {
        let row = self.matrix.row(c.index);
        for (near, &d) in self.nearest.iter_mut().zip(row) {
            *near = near.min(d);
        }
        self.chosen.push(c.index);
        self.in_set[c.index] = true;
        self.div = c.div_after;
        self.cov = c.cov_after;
    }
}

fn finish(
    matrix: &DistanceMatrix,
    params: &SelectionParams,
    chosen: Vec<usize>,
    trace: Vec<GreedyStep>,
    final_div: f64,
    final_cov: f64,
) -> SelectionResult {
    SelectionResult {
        dataset_id: matrix.dataset_id().clone(),
        params: *params,
        representatives: chosen
            .iter()
            .map(|&index| Representative {
                index,
                name: matrix.order()[index].clone(),
            })
            .collect(),
        trace,
        final_div,
        final_cov,
        final_objective: combine(params.alpha, final_div, final_cov),
    }
}

/// Greedy selection with `O(n)` incremental candidate scoring.
pub fn greedy_select(
    matrix: &DistanceMatrix,
    params: &SelectionParams,
) -> Result<SelectionResult, SelectionError> {
    validate(matrix, params)?;
    let alpha = params.alpha;
    let tol = tie_tolerance(matrix);
    let mut state = SelectionState::new(matrix);
    let mut trace = Vec::with_capacity(params.k);
    for _ in 0..params.k {
        let c = state.best_candidate(alpha, tol);
        state.add(&c);
        trace.push(GreedyStep {
            picked: c.index,
            delta_div: c.delta_div,
            delta_cov: c.delta_cov,
            score: c.score,
            div_after: c.div_after,
            cov_after: c.cov_after,
            objective_after: combine(alpha, c.div_after, c.cov_after),
        });
    }
    let (div, cov) = (state.div, state.cov);
    Ok(finish(matrix, params, state.chosen, trace, div, cov))
}

/// Reference implementation: every candidate is scored by recomputing
/// `Div` and `Cov` from scratch. Quadratic-to-cubic per step; meant for
/// small `n`.
pub fn greedy_select_oracle(
    matrix: &DistanceMatrix,
    params: &SelectionParams,
) -> Result<SelectionResult, SelectionError> {
    validate(matrix, params)?;
    let alpha = params.alpha;
    let tol = tie_tolerance(matrix);
    let n = matrix.n();
    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..params.k {
        let div_before = diversity(&chosen, matrix);
        let cov_before = if chosen.is_empty() {
            0.0
        } else {
            coverage(&chosen, matrix)?
        };
        let mut cands = Vec::new();
        for t in (0..n).filter(|t| !chosen.contains(t)) {
            let mut with = chosen.clone();
            with.push(t);
            let div_after = diversity(&with, matrix);
            let cov_after = coverage(&with, matrix)?;
            let delta_div = div_after - div_before;
            let delta_cov = cov_after - cov_before;
            let c = Candidate {
                index: t,
                delta_div,
                delta_cov,
                score: combine(alpha, delta_div, delta_cov),
                div_after,
                cov_after,
            };
            cands.push(c);
        }
        let c = choose(cands, tol).expect("candidate exists");
        chosen.push(c.index);
        trace.push(GreedyStep {
            picked: c.index,
            delta_div: c.delta_div,
            delta_cov: c.delta_cov,
            score: c.score,
            div_after: c.div_after,
            cov_after: c.cov_after,
            objective_after: combine(alpha, c.div_after, c.cov_after),
        });
    }
    let final_div = diversity(&chosen, matrix);
    let final_cov = coverage(&chosen, matrix)?;
    Ok(finish(matrix, params, chosen, trace, final_div, final_cov))
}

/// Selects over an already cached matrix; never computes DTW.
pub fn reselect(
    cache: &MatrixCache,
    dataset_id: &DatasetId,
    matrix_params: &MatrixParams,
    params: &SelectionParams,
) -> Result<SelectionResult, SelectionError> {
    let matrix = cache
        .get(dataset_id, matrix_params)?
        .ok_or(SelectionError::MatrixMissing)?;
    greedy_select(&matrix, params)
}
