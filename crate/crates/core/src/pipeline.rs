//! End-to-end selection shared by the CLI and the HTTP service, so both
//! produce the same result for the same dataset and parameters.

use crate::cache::{CacheError, MatrixCache};
use crate::dtw::{build_matrix, DistanceMatrix, MatrixError, MatrixParams};
use crate::model::{Dataset, ParamsError, SelectionParams};
use crate::selection::{greedy_select, SelectionError, SelectionResult};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// Where the matrix used for a selection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixSource {
    Cache,
    Built,
}

/// Loads the matrix from `cache` or builds (and stores) it.
pub fn obtain_matrix(
    dataset: &Dataset,
    params: &SelectionParams,
    cache: Option<&MatrixCache>,
    progress: &(dyn Fn(f64) + Sync),
) -> Result<(DistanceMatrix, MatrixSource), PipelineError> {
    let key = MatrixParams::for_selection(dataset, params);
    if let Some(cache) = cache {
        if let Some(m) = cache.get(&dataset.id, &key)? {
            return Ok((m, MatrixSource::Cache));
        }
    }
    let m = build_matrix(dataset, params, progress)?;
    if let Some(cache) = cache {
        cache.put(&m)?;
    }
    Ok((m, MatrixSource::Built))
}

pub fn select(
    dataset: &Dataset,
    params: &SelectionParams,
    cache: Option<&MatrixCache>,
    progress: &(dyn Fn(f64) + Sync),
) -> Result<(SelectionResult, MatrixSource), PipelineError> {
    params.validate(dataset.len())?;
    let (matrix, source) = obtain_matrix(dataset, params, cache, progress)?;
    Ok((greedy_select(&matrix, params)?, source))
}
