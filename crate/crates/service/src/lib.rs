//! HTTP API over the selection pipeline.
//!
//! Uploads are content-addressed, so re-uploading the same bytes with the
//! same preprocessing config yields the same dataset id. A distance matrix
//! build for the default parameters starts in the background after each
//! upload; selections over a built (or disk-cached) matrix run no DTW.

pub mod api;
pub mod error;
pub mod state;

pub use api::router;
pub use state::{AppState, JobPhase, JobStatus, ServiceConfig};
