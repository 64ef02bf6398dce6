//! Dynamic time warping and the pairwise distance matrix.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::m4::{m4_sample, M4Error};
use crate::model::{Dataset, DatasetId, SelectionParams};

static DTW_EVALUATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of [`dtw_distance`] calls made by this process so far.
pub fn dtw_evaluations() -> u64 {
    DTW_EVALUATIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DtwError {
    #[error("DTW input sequence is empty")]
    EmptySequence,
    #[error("band half-width {window} is narrower than the length difference {diff}")]
    BandTooNarrow { window: usize, diff: usize },
}

/// Unnormalized DTW with absolute-difference local cost.
///
/// Steps come from `(i-1, j-1)`, `(i-1, j)` and `(i, j-1)`; the path runs from
/// the first pair to the last. With `window = Some(w)` only cells with
/// `|i - j| <= w` are admissible. Memory is two rows over the shorter input.
pub fn dtw_distance(a: &[f64], b: &[f64], window: Option<usize>) -> Result<f64, DtwError> {
    DTW_EVALUATIONS.fetch_add(1, Ordering::Relaxed);
    if a.is_empty() || b.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    let diff = a.len().abs_diff(b.len());
    if let Some(w) = window {
        if w < diff {
            return Err(DtwError::BandTooNarrow { window: w, diff });
        }
    }
    // Rows run over the longer sequence, columns over the shorter one.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let w = window.unwrap_or(usize::MAX);
    let m = short.len();

    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for (i, &x) in long.iter().enumerate() {
        let lo = i.saturating_sub(w);
        let hi = i.saturating_add(w).min(m - 1);
        curr.iter_mut().for_each(|c| *c = f64::INFINITY);
        for j in lo..=hi {
            let cost = (x - short[j]).abs();
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    prev[j - 1]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

/// The parameters a distance matrix depends on besides the dataset itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatrixParams {
    pub segments: usize,
    pub dtw_window: Option<usize>,
    pub normalize: bool,
}

impl MatrixParams {
    pub fn for_selection(dataset: &Dataset, params: &SelectionParams) -> Self {
        Self {
            segments: params.segments,
            dtw_window: params.dtw_window,
            normalize: dataset.normalized(),
        }
    }

    /// Short stable key, e.g. `s25-wnone-n1`.
    pub fn fingerprint(&self) -> String {
        let window = self
            .dtw_window
            .map_or_else(|| "none".to_string(), |w| w.to_string());
        format!("s{}-w{}-n{}", self.segments, window, self.normalize as u8)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("sampling series {series_id:?}: {source}")]
    Sampling { series_id: String, source: M4Error },
    #[error("DTW between {a:?} and {b:?}: {source}")]
    Distance {
        a: String,
        b: String,
        source: DtwError,
    },
    #[error("matrix shape is invalid: {0}")]
    Shape(String),
}

/// Symmetric, zero-diagonal, finite and non-negative `n x n` matrix of DTW
/// distances between the series of one dataset, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRepr", try_from = "MatrixRepr")]
pub struct DistanceMatrix {
    dataset_id: DatasetId,
    params: MatrixParams,
    order: Vec<String>,
    d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dataset_id: DatasetId,
    params_fingerprint: String,
    params: MatrixParams,
    order: Vec<String>,
    d: Vec<Vec<f64>>,
}

impl From<DistanceMatrix> for MatrixRepr {
    fn from(m: DistanceMatrix) -> Self {
        let n = m.order.len();
        Self {
            params_fingerprint: m.params.fingerprint(),
            d: (0..n).map(|i| m.d[i * n..(i + 1) * n].to_vec()).collect(),
            dataset_id: m.dataset_id,
            params: m.params,
            order: m.order,
        }
    }
}

impl TryFrom<MatrixRepr> for DistanceMatrix {
    type Error = MatrixError;

    fn try_from(r: MatrixRepr) -> Result<Self, Self::Error> {
        DistanceMatrix::from_rows(r.dataset_id, r.params, r.order, r.d)
    }
}

impl DistanceMatrix {
    /// Builds from a flat row-major buffer, checking every invariant.
    pub fn from_flat(
        dataset_id: DatasetId,
        params: MatrixParams,
        order: Vec<String>,
        d: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        let n = order.len();
        if d.len() != n * n {
            return Err(MatrixError::Shape(format!(
                "{} entries for {n} series",
                d.len()
            )));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(MatrixError::Shape(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(MatrixError::Shape(format!("entry ({i}, {j}) = {v}")));
                }
                if v.to_bits() != d[j * n + i].to_bits() {
                    return Err(MatrixError::Shape(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            dataset_id,
            params,
            order,
            d,
        })
    }

    pub fn from_rows(
        dataset_id: DatasetId,
        params: MatrixParams,
        order: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, MatrixError> {
        let n = order.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MatrixError::Shape(format!("rows are not {n} x {n}")));
        }
        Self::from_flat(dataset_id, params, order, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.order.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.order.len();
        &self.d[i * n..(i + 1) * n]
    }

    pub fn dataset_id(&self) -> &DatasetId {
        &self.dataset_id
    }

    pub fn params(&self) -> &MatrixParams {
        &self.params
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.d
    }

    /// Every entry multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(std::iter::once("").chain(self.order.iter().map(String::as_str)))?;
        for (i, name) in self.order.iter().enumerate() {
            let mut record = vec![name.clone()];
            record.extend(self.row(i).iter().map(f64::to_string));
            writer.write_record(&record)?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Computes DTW between the M4 samples of every pair of series.
///
/// `progress` receives non-decreasing completion fractions ending at 1.0.
/// The result is independent of thread scheduling.
pub fn build_matrix(
    dataset: &Dataset,
    params: &SelectionParams,
    progress: &(dyn Fn(f64) + Sync),
) -> Result<DistanceMatrix, MatrixError> {
    let matrix_params = MatrixParams::for_selection(dataset, params);
    let samples: Vec<Vec<f64>> = dataset
        .series
        .par_iter()
        .map(|s| {
            m4_sample(s, params.segments)
                .map(|m| m.values())
                .map_err(|source| MatrixError::Sampling {
                    series_id: s.id.clone(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let n = samples.len();
    let total = n * n.saturating_sub(1) / 2;
    let done = AtomicUsize::new(0);
    let last_reported = Mutex::new(0.0f64);
    let report = |fraction: f64| {
        let mut last = last_reported.lock().expect("progress lock");
        if fraction > *last {
            *last = fraction;
            progress(fraction);
        }
    };

    // Row i holds the distances to every j > i.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = ((i + 1)..n)
                .map(|j| {
                    dtw_distance(&samples[i], &samples[j], params.dtw_window).map_err(|source| {
                        MatrixError::Distance {
                            a: dataset.series[i].id.clone(),
                            b: dataset.series[j].id.clone(),
                            source,
                        }
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let finished = done.fetch_add(row.len(), Ordering::Relaxed) + row.len();
            if total > 0 {
                report(finished as f64 / total as f64);
            }
            Ok(row)
        })
        .collect::<Result<_, MatrixError>>()?;

    let mut d = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + 1 + offset;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    report(1.0);
    DistanceMatrix::from_flat(dataset.id.clone(), matrix_params, dataset.names(), d)
}
