//! Representative time-series selection.
//!
//! Pipeline: CSV tables are ingested into a [`Dataset`] of normalized
//! series, each series is reduced with M4 sampling, DTW distances between
//! the samples form a cached [`DistanceMatrix`], and a greedy
//! diversity-coverage search picks `k` representatives from that matrix.

pub mod cache;
pub mod dtw;
pub mod ingest;
pub mod m4;
pub mod model;
pub mod pipeline;
pub mod selection;
pub mod stats;

pub use cache::{CacheError, MatrixCache};
pub use dtw::{
    build_matrix, dtw_distance, dtw_evaluations, DistanceMatrix, DtwError, MatrixParams,
};
pub use ingest::{ingest, IngestError, IngestReport, PreprocessConfig};
pub use m4::{display_downsample, m4_sample, M4Error, M4Sample};
pub use model::{
    canonical_json, dataset_fingerprint, Dataset, DatasetId, SelectionParams, TimePoint,
    TimeSeries, DEFAULT_SEGMENTS,
};
pub use selection::{
    coverage, diversity, greedy_select, greedy_select_oracle, objective, reselect, GreedyStep,
    SelectionError, SelectionResult,
};
