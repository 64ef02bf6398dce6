//! M4 extreme-point sampling.
//!
//! The time range `[t_first, t_last]` is cut into equal-width segments
//! (half-open, the last one closed). Each non-empty segment contributes its
//! first point, last point, maximum-value point and minimum-value point;
//! value ties go to the earliest point. Points picked more than once are
//! emitted once, in timestamp order.

use serde::{Deserialize, Serialize};

use crate::model::{TimePoint, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M4Sample {
    pub series_id: String,
    pub segments: usize,
    pub points: Vec<TimePoint>,
}

impl M4Sample {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum M4Error {
    #[error("series {0:?} has no points")]
    EmptySeries(String),
    #[error("segment count must be at least 1")]
    ZeroSegments,
}

/// Segment index of `t` for a range starting at `t0` of width `span`.
/// Integer arithmetic, so boundaries are exact.
#[inline]
fn segment_of(t: i64, t0: i64, span: i128, segments: usize) -> usize {
    if span == 0 {
        return 0;
    }
    let offset = (t as i128) - (t0 as i128);
    let idx = (offset * segments as i128) / span;
    (idx as usize).min(segments - 1)
}

/// Indices (into `points`) retained by M4 sampling, strictly increasing.
///
/// `points` must be sorted by strictly increasing `t`.
pub fn m4_indices(points: &[TimePoint], segments: usize) -> Vec<usize> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Vec::new();
    };
    let t0 = first.t;
    let span = last.t as i128 - t0 as i128;
    let mut out = Vec::with_capacity(points.len().min(4 * segments));

    let mut start = 0;
    while start < points.len() {
        let seg = segment_of(points[start].t, t0, span, segments);
        let (mut min_i, mut max_i) = (start, start);
        let mut end = start + 1;
        while end < points.len() && segment_of(points[end].t, t0, span, segments) == seg {
            if points[end].v > points[max_i].v {
                max_i = end;
            }
            if points[end].v < points[min_i].v {
                min_i = end;
            }
            end += 1;
        }
        let mut picked = [start, min_i, max_i, end - 1];
        picked.sort_unstable();
        for idx in picked {
            if out.last() != Some(&idx) {
                out.push(idx);
            }
        }
        start = end;
    }
    out
}

/// Samples `points` directly; see [`m4_sample`].
pub fn m4_points(points: &[TimePoint], segments: usize) -> Result<Vec<TimePoint>, M4Error> {
    if segments == 0 {
        return Err(M4Error::ZeroSegments);
    }
    Ok(m4_indices(points, segments)
        .into_iter()
        .map(|i| points[i])
        .collect())
}

pub fn m4_sample(series: &TimeSeries, segments: usize) -> Result<M4Sample, M4Error> {
    if series.is_empty() {
        return Err(M4Error::EmptySeries(series.id.clone()));
    }
    Ok(M4Sample {
        series_id: series.id.clone(),
        segments,
        points: m4_points(&series.points, segments)?,
    })
}

/// M4 with one segment per pixel column.
pub fn display_downsample(series: &TimeSeries, width_px: usize) -> Result<M4Sample, M4Error> {
    m4_sample(series, width_px)
}
