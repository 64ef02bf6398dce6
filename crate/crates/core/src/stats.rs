//! Box-plot statistics for the summary view.

use serde::{Deserialize, Serialize};

use crate::model::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub name: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
    pub outliers: usize,
}

/// Quantile of sorted data, interpolating linearly between order
/// statistics at rank `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_summary(name: &str, values: &[f64]) -> Option<BoxSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Some(BoxSummary {
        name: name.to_string(),
        count: sorted.len(),
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        outliers: sorted.iter().filter(|&&v| v < lo || v > hi).count(),
    })
}

pub fn series_summary(series: &TimeSeries) -> Option<BoxSummary> {
    let values: Vec<f64> = series.values().collect();
    box_summary(&series.name, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_values() {
        let s = box_summary("x", &[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        assert_eq!(s.outliers, 0);
    }

    #[test]
    fn interpolates_between_order_statistics() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        assert_eq!(quantile_sorted(&sorted, 0.25), 1.75);
        assert_eq!(quantile_sorted(&sorted, 0.75), 3.25);
    }

    #[test]
    fn constant_series() {
        let s = box_summary("c", &[2.0; 7]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (2.0, 2.0, 2.0, 2.0, 2.0)
        );
        assert_eq!(s.outliers, 0);
    }

    #[test]
    fn far_value_is_an_outlier() {
        let mut v: Vec<f64> = (1..=9).map(f64::from).collect();
        v.push(100.0);
        let s = box_summary("o", &v).unwrap();
        // q1 = 3.25, q3 = 7.75, upper fence = 14.5
        assert_eq!((s.q1, s.q3), (3.25, 7.75));
        assert_eq!(s.outliers, 1);
    }

    #[test]
    fn empty_has_no_summary() {
        assert!(box_summary("e", &[]).is_none());
    }
}
