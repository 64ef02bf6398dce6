use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn repsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsel"))
        .args(args)
        .output()
        .expect("spawn repsel")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_csv(dir: &Path) -> String {
    let mut csv = String::from("t,a,b,c,d,label\n");
    for t in 0..200 {
        let x = t as f64 / 20.0;
        csv.push_str(&format!(
            "{t},{},{},{},{},{}\n",
            x.sin(),
            x.sin() + 0.05,
            (2.0 * x).cos(),
            x * 0.1,
            if t % 2 == 0 { "even" } else { "odd" }
        ));
    }
    let path = dir.join("data.csv");
    fs::write(&path, csv).unwrap();
    path.to_str().unwrap().to_string()
}

fn ingest_into(dir: &Path) -> String {
    let csv = write_csv(dir);
    let out = dir.join("ds.json");
    let o = repsel(&[
        "ingest",
        &csv,
        "--time-col",
        "t",
        "-o",
        out.to_str().unwrap(),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.to_str().unwrap().to_string()
}

#[test]
fn ingest_writes_dataset_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingest_into(dir.path());
    let dataset: Value = serde_json::from_str(&fs::read_to_string(&ds).unwrap()).unwrap();
    assert_eq!(dataset["series"].as_array().unwrap().len(), 4);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ds.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows_read"], 200);
    assert_eq!(report["columns_categorical"][0], "label");
}

#[test]
fn select_prints_canonical_json_and_uses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingest_into(dir.path());
    let cache = dir.path().join("cache");
    let args = [
        "select",
        &ds,
        "--k",
        "2",
        "--alpha",
        "0.5",
        "--cache",
        cache.to_str().unwrap(),
        "-v",
    ];
    let first = repsel(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).contains("cache miss"));
    let second = repsel(&args);
    assert!(stderr(&second).contains("cache hit"), "{}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));

    let result: Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(result["representatives"].as_array().unwrap().len(), 2);
    assert_eq!(result["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn select_csv_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingest_into(dir.path());
    let o = repsel(&[
        "select", &ds, "--k", "3", "--alpha", "0.25", "--format", "csv", "-q",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("step,index,name"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = repsel(&[
        "select",
        "/nonexistent/ds.json",
        "--k",
        "1",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("no such file"));

    let ds = ingest_into(dir.path());
    let bad_k = repsel(&["select", &ds, "--k", "9", "--alpha", "0.5"]);
    assert_eq!(bad_k.status.code(), Some(2));

    let no_args = repsel(&["select"]);
    assert_eq!(no_args.status.code(), Some(2));

    let text = dir.path().join("text.csv");
    fs::write(&text, "name\nfoo\nbar\n").unwrap();
    let o = repsel(&[
        "ingest",
        text.to_str().unwrap(),
        "-o",
        dir.path().join("x.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dtw_between_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "v\n1\n2\n3\n").unwrap();
    fs::write(&b, "v\n1\n2\n2\n3\n5\n").unwrap();
    let o = repsel(&["dtw", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "2");

    let narrow = repsel(&[
        "dtw",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--window",
        "0",
    ]);
    assert_eq!(narrow.status.code(), Some(1));
}

#[test]
fn m4_and_matrix_exports() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ingest_into(dir.path());
    let o = repsel(&["m4", &ds, "--series", "a", "--segments", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sample: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let n = sample["points"].as_array().unwrap().len();
    assert!((2..=40).contains(&n));

    let o = repsel(&["matrix", &ds, "--format", "csv", "-q"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 5);
    let o = repsel(&["matrix", &ds, "-q"]);
    let m: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(m["params_fingerprint"], "s25-wnone-n1");
}
