use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repsel_core::ingest::{classify_columns, export_csv, ingest, parse_csv, PreprocessConfig};
use repsel_core::m4::M4Sample;
use repsel_core::{dataset_fingerprint, Dataset, DistanceMatrix, SelectionResult};

fn config() -> PreprocessConfig {
    PreprocessConfig::default()
}

#[test]
fn ten_thousand_rows() {
    let mut csv = String::from("t,a,b\n");
    for i in 0..10_000 {
        csv.push_str(&format!("{i},{},{}\n", i % 17, (i * 3) % 11));
    }
    // Independent count: non-empty lines minus the header.
    let expected = csv.lines().filter(|l| !l.trim().is_empty()).count() - 1;
    let table = parse_csv(csv.as_bytes(), &config()).unwrap();
    assert_eq!(table.rows.len(), expected);
    assert_eq!(expected, 10_000);
    let (_, report) = ingest(csv.as_bytes(), &config(), None).unwrap();
    assert_eq!(report.rows_read, 10_000);
}

#[test]
fn planted_text_columns_are_categorical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let text_cols: HashSet<usize> = [4, 17, 23, 50, 61, 88, 99].into_iter().collect();
    let header: Vec<String> = (0..100).map(|c| format!("c{c}")).collect();
    let mut csv = header.join(",");
    csv.push('\n');
    for _ in 0..200 {
        let row: Vec<String> = (0..100)
            .map(|c| {
                if text_cols.contains(&c) {
                    ["alpha", "beta", "gamma"][rng.gen_range(0..3)].to_string()
                } else if rng.gen_bool(0.05) {
                    String::new()
                } else {
                    format!("{:.4}", rng.gen_range(-100.0..100.0))
                }
            })
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let table = parse_csv(csv.as_bytes(), &config()).unwrap();
    let classes = classify_columns(&table, &config());
    let expected: Vec<String> = {
        let mut v: Vec<usize> = text_cols.into_iter().collect();
        v.sort();
        v.into_iter().map(|c| format!("c{c}")).collect()
    };
    assert_eq!(classes.categorical, expected);
    assert_eq!(classes.numeric.len(), 93);
}

fn random_csv(rng: &mut ChaCha8Rng) -> String {
    let cols = rng.gen_range(1..6);
    let rows = rng.gen_range(2..60);
    let mut csv = String::from("t");
    for c in 0..cols {
        csv.push_str(&format!(",v{c}"));
    }
    csv.push('\n');
    for r in 0..rows {
        csv.push_str(&(rng.gen_range(0..40) as i64 * 3 + r % 2).to_string());
        for _ in 0..cols {
            csv.push(',');
            if !rng.gen_bool(0.1) {
                csv.push_str(&format!("{}", rng.gen_range(-1e3..1e3)));
            }
        }
        csv.push('\n');
    }
    csv
}

#[test]
fn normalized_series_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = PreprocessConfig {
        time_column: Some("t".into()),
        ..config()
    };
    for _ in 0..200 {
        let csv = random_csv(&mut rng);
        let Ok((ds, _)) = ingest(csv.as_bytes(), &cfg, None) else {
            continue;
        };
        for s in &ds.series {
            assert!(s.points.windows(2).all(|w| w[0].t < w[1].t));
            assert!(s.values().all(f64::is_finite));
            assert!(s.len() >= 2);
            let n = s.len() as f64;
            let mean = s.values().sum::<f64>() / n;
            let std = (s.values().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if s.stats.std > 0.0 {
                assert!(mean.abs() < 1e-9, "mean {mean}");
                assert!((std - 1.0).abs() < 1e-9, "std {std}");
            }
        }
    }
}

#[test]
fn drop_point_never_invents_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = PreprocessConfig {
        time_column: Some("t".into()),
        normalize: false,
        ..config()
    };
    for _ in 0..200 {
        let csv = random_csv(&mut rng);
        let table = parse_csv(csv.as_bytes(), &cfg).unwrap();
        let Ok((ds, _)) = ingest(csv.as_bytes(), &cfg, None) else {
            continue;
        };
        for s in &ds.series {
            let col = table.column_index(&s.name).unwrap();
            let t_col = table.column_index("t").unwrap();
            let cells: HashSet<(i64, u64)> = table
                .rows
                .iter()
                .filter_map(|r| {
                    let t = r[t_col].as_deref()?.parse::<i64>().ok()?;
                    let v = r[col].as_deref()?.parse::<f64>().ok()?;
                    Some((t, v.to_bits()))
                })
                .collect();
            assert!(s
                .points
                .iter()
                .all(|p| cells.contains(&(p.t, p.v.to_bits()))));
        }
    }
}

#[test]
fn reingesting_an_export_reproduces_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = PreprocessConfig {
        time_column: Some("t".into()),
        ..config()
    };
    for _ in 0..100 {
        let csv = random_csv(&mut rng);
        let Ok((ds, _)) = ingest(csv.as_bytes(), &cfg, None) else {
            continue;
        };
        let (time_name, text) = export_csv(&ds).unwrap();
        let again_cfg = PreprocessConfig {
            time_column: Some(time_name),
            normalize: false,
            ..config()
        };
        let (again, _) = ingest(text.as_bytes(), &again_cfg, None).unwrap();
        assert_eq!(ds.names(), again.names());
        for (a, b) in ds.series.iter().zip(&again.series) {
            assert_eq!(a.points, b.points);
        }
    }
}

#[test]
fn fingerprints_are_injective_over_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut seen = HashSet::new();
    let mut inputs = HashSet::new();
    let base = random_csv(&mut rng).into_bytes();
    for i in 0..1200 {
        let mut bytes = base.clone();
        if i > 0 {
            let pos = rng.gen_range(0..bytes.len());
            bytes[pos] = rng.gen();
        }
        let cfg = PreprocessConfig {
            normalize: i % 3 != 0,
            ..config()
        };
        if !inputs.insert((bytes.clone(), cfg.normalize)) {
            continue;
        }
        assert!(seen.insert(dataset_fingerprint(&bytes, &cfg)));
    }
    assert!(seen.len() >= 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trips_are_bit_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let csv = random_csv(&mut rng);
        let cfg = PreprocessConfig { time_column: Some("t".into()), ..config() };
        if let Ok((ds, report)) = ingest(csv.as_bytes(), &cfg, Some("r.csv".into())) {
            let back: Dataset = serde_json::from_str(&serde_json::to_string(&ds).unwrap()).unwrap();
            prop_assert_eq!(&back, &ds);
            for (a, b) in back.series.iter().zip(&ds.series) {
                prop_assert!(a.points.iter().zip(&b.points).all(|(x, y)| x.v.to_bits() == y.v.to_bits()));
            }
            let r2 = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
            prop_assert_eq!(report, r2);

            let sample = repsel_core::m4_sample(&ds.series[0], 5).unwrap();
            let s2: M4Sample = serde_json::from_str(&serde_json::to_string(&sample).unwrap()).unwrap();
            prop_assert_eq!(sample, s2);

            let params = repsel_core::SelectionParams::new(1, 0.5);
            let m = repsel_core::build_matrix(&ds, &params, &|_| {}).unwrap();
            let m2: DistanceMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            prop_assert_eq!(&m, &m2);
            let r = repsel_core::greedy_select(&m, &params).unwrap();
            let r2: SelectionResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            prop_assert_eq!(r, r2);
        }
    }
}
