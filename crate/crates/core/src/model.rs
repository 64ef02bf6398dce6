//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is immutable once built. Series are identified by the
//! pair (dataset id, column name); there is no identity across datasets.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::PreprocessConfig;

/// Default M4 segment count used when sampling series for DTW.
pub const DEFAULT_SEGMENTS: usize = 25;

/// One observation. `t` is an integer tick (milliseconds for parsed
/// date-times, the raw integer for integer time columns, the row index when
/// no time column is configured).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: i64,
    pub v: f64,
}

impl TimePoint {
    pub fn new(t: i64, v: f64) -> Self {
        Self { t, v }
    }
}

/// Summary of the raw (pre-normalization) values of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SeriesStats {
    /// Returns `None` for an empty slice.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Some(Self {
            mean,
            std: var.sqrt(),
            min,
            max,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// `"{dataset_id}/{name}"`.
    pub id: String,
    pub name: String,
    /// Strictly increasing in `t`, finite values.
    pub points: Vec<TimePoint>,
    pub stats: SeriesStats,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.v)
    }
}

/// Content-addressed dataset identifier (lowercase hex SHA-256).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetId(pub String);

impl DatasetId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub distinct_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub row_count: usize,
    pub warnings: Vec<String>,
    pub config: PreprocessConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub series: Vec<TimeSeries>,
    pub categorical_columns: Vec<CategoricalColumn>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn series_by_name(&self, name: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.name.clone()).collect()
    }

    /// Whether the stored values were z-normalized at ingestion.
    pub fn normalized(&self) -> bool {
        self.provenance.config.normalize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub k: usize,
    pub alpha: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default)]
    pub dtw_window: Option<usize>,
}

fn default_segments() -> usize {
    DEFAULT_SEGMENTS
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("k = {k} is outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("alpha = {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("segments must be at least 1")]
    ZeroSegments,
}

impl SelectionParams {
    pub fn new(k: usize, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            segments: DEFAULT_SEGMENTS,
            dtw_window: None,
        }
    }

    pub fn with_segments(mut self, segments: usize) -> Self {
        self.segments = segments;
        self
    }

    pub fn with_window(mut self, window: Option<usize>) -> Self {
        self.dtw_window = window;
        self
    }

    /// Checks the invariants against a collection of `n` series.
    pub fn validate(&self, n: usize) -> Result<(), ParamsError> {
        if self.k < 1 || self.k > n {
            return Err(ParamsError::KOutOfRange { k: self.k, n });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ParamsError::AlphaOutOfRange(self.alpha));
        }
        if self.segments == 0 {
            return Err(ParamsError::ZeroSegments);
        }
        Ok(())
    }
}

/// Content-addressed id of `source` preprocessed under `config`.
pub fn dataset_fingerprint(source: &[u8], config: &PreprocessConfig) -> DatasetId {
    let mut hasher = Sha256::new();
    hasher.update(b"repsel-dataset\0");
    hasher.update((source.len() as u64).to_le_bytes());
    hasher.update(source);
    // Struct field order is fixed, so this encoding is stable.
    let config = serde_json::to_vec(config).expect("config serializes");
    hasher.update((config.len() as u64).to_le_bytes());
    hasher.update(&config);
    DatasetId(hex::encode(hasher.finalize()))
}

/// Serializes with object keys sorted, giving byte-stable output for
/// equal values regardless of struct field order.
pub fn canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    serde_json::to_string(&value)
}
