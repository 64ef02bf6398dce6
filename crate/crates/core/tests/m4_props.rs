use proptest::prelude::*;
use repsel_core::m4::{display_downsample, m4_points, m4_sample};
use repsel_core::model::{SeriesStats, TimePoint, TimeSeries};

fn make_series(points: Vec<TimePoint>) -> TimeSeries {
    let values: Vec<f64> = points.iter().map(|p| p.v).collect();
    TimeSeries {
        id: "d/s".into(),
        name: "s".into(),
        stats: SeriesStats::from_values(&values).unwrap(),
        points,
    }
}

/// Strictly increasing, irregular timestamps with arbitrary values.
fn series_strategy(max_len: usize) -> impl Strategy<Value = TimeSeries> {
    prop::collection::vec((1i64..50, -1000.0f64..1000.0), 1..=max_len).prop_map(|steps| {
        let mut t = -500;
        let points = steps
            .into_iter()
            .map(|(dt, v)| {
                t += dt;
                TimePoint::new(t, v)
            })
            .collect();
        make_series(points)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn sample_invariants(series in series_strategy(400), segments in 1usize..60) {
        let sample = m4_sample(&series, segments).unwrap();
        let pts = &sample.points;
        prop_assert!(pts.windows(2).all(|w| w[0].t < w[1].t));
        prop_assert!(pts.len() <= series.len().min(4 * segments));
        prop_assert!(pts.iter().all(|p| series.points.contains(p)));
        prop_assert_eq!(pts.first(), series.points.first());
        prop_assert_eq!(pts.last(), series.points.last());
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        let min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        prop_assert_eq!(max(&mut pts.iter().map(|p| p.v)), max(&mut series.values()));
        prop_assert_eq!(min(&mut pts.iter().map(|p| p.v)), min(&mut series.values()));
    }

    #[test]
    fn idempotent_at_saturation(series in series_strategy(300), segments in 1usize..40) {
        // The sample keeps both endpoints, so segment boundaries are unchanged.
        let once = m4_points(&series.points, segments).unwrap();
        let twice = m4_points(&once, segments).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn display_width_bound(series in series_strategy(2000), width in 1usize..300) {
        let sample = display_downsample(&series, width).unwrap();
        prop_assert!(sample.len() <= 4 * width);
        prop_assert_eq!(sample.segments, width);
    }
}

#[test]
fn ten_thousand_points_at_250_px() {
    let points = (0..10_000)
        .map(|i| TimePoint::new(i, ((i * 7919) % 1000) as f64))
        .collect();
    let s = make_series(points);
    assert!(display_downsample(&s, 250).unwrap().len() <= 1000);
}

#[test]
fn sine_keeps_global_extremes() {
    let points: Vec<TimePoint> = (0..5000)
        .map(|i| TimePoint::new(i * 3, (i as f64 * 0.0137).sin() * (1.0 + i as f64 / 5000.0)))
        .collect();
    let s = make_series(points);
    let sample = display_downsample(&s, 50).unwrap();
    let (gmax, gmin) = s
        .values()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| {
            (hi.max(v), lo.min(v))
        });
    assert!(sample.points.iter().any(|p| p.v == gmax));
    assert!(sample.points.iter().any(|p| p.v == gmin));
}
