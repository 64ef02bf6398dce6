//! `repsel`: batch front-end for the representative-selection pipeline.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use repsel_core::ingest::{classify_columns, parse_csv, parse_number};
use repsel_core::pipeline::{obtain_matrix, MatrixSource};
use repsel_core::{
    canonical_json, dtw_distance, greedy_select, ingest, m4_sample, Dataset, MatrixCache,
    MatrixParams, PreprocessConfig, SelectionParams, SelectionResult, DEFAULT_SEGMENTS,
};

#[derive(Debug, Parser)]
#[command(
    name = "repsel",
    version,
    about = "Representative time-series selection"
)]
struct Cli {
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Print timings and cache activity to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a CSV file into dataset JSON plus an ingest report.
    Ingest {
        csv: PathBuf,
        #[arg(long = "time-col")]
        time_col: Option<String>,
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long, default_value_t = 0.95)]
        numeric_threshold: f64,
        #[arg(short, long)]
        output: PathBuf,
        /// Report path; defaults to `<output stem>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Select K representative series.
    Select {
        dataset: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
        segments: usize,
        /// Sakoe-Chiba band half-width.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Distance-matrix cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// DTW distance between the first numeric columns of two CSV files.
    Dtw {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        /// Column to read instead of the first numeric one.
        #[arg(long)]
        column: Option<String>,
    },
    /// M4 sample of one series.
    M4 {
        dataset: PathBuf,
        #[arg(long)]
        series: String,
        #[arg(long)]
        segments: usize,
    },
    /// Export the pairwise DTW matrix.
    Matrix {
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
        segments: usize,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn compute<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Compute(e.into())
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| {
        let msg = if e.kind() == io::ErrorKind::NotFound {
            format!("no such file: {}", path.display())
        } else {
            format!("cannot read {}: {e}", path.display())
        };
        usage(anyhow!(msg))
    })
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not a dataset JSON file", path.display()))
        .map_err(usage)
}

fn write_stdout(text: &str) -> CliResult {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(usage)
}

struct Reporter {
    quiet: bool,
    verbose: bool,
}

impl Reporter {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn verbose(&self, msg: impl AsRef<str>) {
        if self.verbose && !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Prints build progress in 10% steps.
    fn progress(&self) -> impl Fn(f64) + Sync + '_ {
        let last = Mutex::new(-1i64);
        move |f: f64| {
            if self.quiet {
                return;
            }
            let step = (f * 10.0).floor() as i64;
            let mut last = last.lock().unwrap();
            if step > *last {
                *last = step;
                eprintln!("building distance matrix: {:>3}%", step * 10);
            }
        }
    }
}

fn matrix_for(
    dataset: &Dataset,
    params: &SelectionParams,
    cache: Option<&Path>,
    reporter: &Reporter,
) -> CliResult<repsel_core::DistanceMatrix> {
    let cache = cache.map(MatrixCache::new);
    let started = Instant::now();
    let progress = reporter.progress();
    let (matrix, source) =
        obtain_matrix(dataset, params, cache.as_ref(), &progress).map_err(compute)?;
    let key = MatrixParams::for_selection(dataset, params);
    match (source, &cache) {
        (MatrixSource::Cache, Some(c)) => reporter.verbose(format!(
            "cache hit: {}",
            c.path_for(&dataset.id, &key).display()
        )),
        (MatrixSource::Built, Some(c)) => reporter.verbose(format!(
            "cache miss: stored {}",
            c.path_for(&dataset.id, &key).display()
        )),
        _ => {}
    }
    reporter.verbose(format!(
        "matrix ready in {:.1} ms ({} series, {})",
        started.elapsed().as_secs_f64() * 1e3,
        matrix.n(),
        key.fingerprint()
    ));
    Ok(matrix)
}

fn selection_csv(result: &SelectionResult) -> String {
    let mut out = String::from(
        "step,index,name,delta_div,delta_cov,score,div_after,cov_after,objective_after\n",
    );
    for (step, (s, r)) in result.trace.iter().zip(&result.representatives).enumerate() {
        let name = if r.name.contains([',', '"', '\n']) {
            format!("\"{}\"", r.name.replace('"', "\"\""))
        } else {
            r.name.clone()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            step + 1,
            s.picked,
            name,
            s.delta_div,
            s.delta_cov,
            s.score,
            s.div_after,
            s.cov_after,
            s.objective_after
        ));
    }
    out
}

/// Values of one numeric column, in row order, skipping unusable cells.
fn column_values(path: &Path, column: Option<&str>) -> CliResult<Vec<f64>> {
    let bytes = read_file(path)?;
    let config = PreprocessConfig::default();
    let table = parse_csv(&bytes, &config)
        .with_context(|| path.display().to_string())
        .map_err(compute)?;
    let name = match column {
        Some(c) => c.to_string(),
        None => classify_columns(&table, &config)
            .numeric
            .into_iter()
            .next()
            .ok_or_else(|| compute(anyhow!("{}: no numeric column", path.display())))?,
    };
    let idx = table
        .column_index(&name)
        .ok_or_else(|| usage(anyhow!("{}: no column {name:?}", path.display())))?;
    Ok(table
        .column(idx)
        .flatten()
        .filter_map(parse_number)
        .collect())
}

fn run(cli: Cli) -> CliResult {
    let reporter = Reporter {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Ingest {
            csv,
            time_col,
            no_normalize,
            delimiter,
            numeric_threshold,
            output,
            report,
        } => {
            let bytes = read_file(&csv)?;
            let config = PreprocessConfig {
                time_column: time_col,
                normalize: !no_normalize,
                delimiter,
                numeric_threshold,
                ..PreprocessConfig::default()
            };
            config.validate().map_err(usage)?;
            let source_name = csv.file_name().map(|n| n.to_string_lossy().into_owned());
            let (dataset, ingest_report) = ingest(&bytes, &config, source_name)
                .with_context(|| csv.display().to_string())
                .map_err(compute)?;
            let report_path = report.unwrap_or_else(|| {
                let stem = output
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into());
                output.with_file_name(format!("{stem}.report.json"))
            });
            fs::write(&output, serde_json::to_vec(&dataset).map_err(compute)?)
                .with_context(|| format!("writing {}", output.display()))
                .map_err(usage)?;
            fs::write(
                &report_path,
                serde_json::to_vec_pretty(&ingest_report).map_err(compute)?,
            )
            .with_context(|| format!("writing {}", report_path.display()))
            .map_err(usage)?;
            reporter.info(format!(
                "dataset {}: {} numeric series, {} categorical columns, {} rows",
                dataset.id,
                dataset.len(),
                dataset.categorical_columns.len(),
                ingest_report.rows_read
            ));
            Ok(())
        }
        Command::Select {
            dataset,
            k,
            alpha,
            segments,
            window,
            format,
            cache,
        } => {
            let dataset = load_dataset(&dataset)?;
            let params = SelectionParams::new(k, alpha)
                .with_segments(segments)
                .with_window(window);
            params.validate(dataset.len()).map_err(usage)?;
            let matrix = matrix_for(&dataset, &params, cache.as_deref(), &reporter)?;
            let started = Instant::now();
            let result = greedy_select(&matrix, &params).map_err(compute)?;
            reporter.verbose(format!(
                "selection took {:.3} ms",
                started.elapsed().as_secs_f64() * 1e3
            ));
            let text = match format {
                Format::Json => canonical_json(&result).map_err(compute)? + "\n",
                Format::Csv => selection_csv(&result),
            };
            write_stdout(&text)
        }
        Command::Dtw {
            a,
            b,
            window,
            column,
        } => {
            let a = column_values(&a, column.as_deref())?;
            let b = column_values(&b, column.as_deref())?;
            let d = dtw_distance(&a, &b, window).map_err(compute)?;
            write_stdout(&format!("{d}\n"))
        }
        Command::M4 {
            dataset,
            series,
            segments,
        } => {
            let dataset = load_dataset(&dataset)?;
            let s = dataset
                .series_by_name(&series)
                .ok_or_else(|| usage(anyhow!("no series named {series:?}")))?;
            let sample = m4_sample(s, segments).map_err(compute)?;
            write_stdout(&(canonical_json(&sample).map_err(compute)? + "\n"))
        }
        Command::Matrix {
            dataset,
            segments,
            window,
            format,
            cache,
        } => {
            let dataset = load_dataset(&dataset)?;
            let params = SelectionParams::new(1, 0.5)
                .with_segments(segments)
                .with_window(window);
            params.validate(dataset.len()).map_err(usage)?;
            let matrix = matrix_for(&dataset, &params, cache.as_deref(), &reporter)?;
            let text = match format {
                Format::Json => canonical_json(&matrix).map_err(compute)? + "\n",
                Format::Csv => matrix.to_csv().map_err(compute)?,
            };
            write_stdout(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
