//! CSV ingestion: parsing, numeric/categorical classification, timestamp
//! handling, missing-value dropping and per-series z-normalization.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::model::{
    dataset_fingerprint, CategoricalColumn, Dataset, DatasetId, Provenance, SeriesStats, TimePoint,
    TimeSeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop the point from the affected series only.
    #[default]
    DropPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Column holding timestamps. `None` uses the row index.
    pub time_column: Option<String>,
    /// Minimum fraction of non-missing cells that must parse as finite
    /// numbers for a column to be numeric.
    pub numeric_threshold: f64,
    pub normalize: bool,
    pub missing_policy: MissingPolicy,
    pub delimiter: char,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            time_column: None,
            numeric_threshold: 0.95,
            normalize: true,
            missing_policy: MissingPolicy::DropPoint,
            delimiter: ',',
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.numeric_threshold > 0.0 && self.numeric_threshold <= 1.0) {
            return Err(IngestError::InvalidThreshold(self.numeric_threshold));
        }
        if !self.delimiter.is_ascii() || self.delimiter == '"' || self.delimiter == '\n' {
            return Err(IngestError::InvalidDelimiter(self.delimiter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub columns_numeric: Vec<String>,
    pub columns_categorical: Vec<String>,
    /// Cells dropped per numeric column because they were missing or did
    /// not parse as a finite number.
    pub missing_cells_dropped: BTreeMap<String, usize>,
    /// Points removed because an earlier point of the same series had the
    /// same timestamp, summed over series.
    pub duplicate_timestamps_collapsed: usize,
    pub nonmonotone_rows_sorted: bool,
    pub rows_without_timestamp: usize,
    /// Numeric columns left with fewer than two points.
    pub series_excluded: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("source is empty")]
    EmptySource,
    #[error("header row is missing")]
    HeaderMissing,
    #[error("line {0}: row has more cells than the header")]
    RowOverflow(u64),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("no numeric columns")]
    NoNumericColumns,
    #[error("no numeric column has at least two usable points")]
    NoUsableSeries,
    #[error("time column {0:?} not found in header")]
    UnknownTimeColumn(String),
    #[error("time column {0:?} has no parseable timestamps")]
    NoUsableTimestamps(String),
    #[error("numeric threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid delimiter {0:?}")]
    InvalidDelimiter(char),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Parsed cell grid. Missing cells are `None`; every row has header width.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = Option<&str>> + '_ {
        self.rows.iter().map(move |r| r[idx].as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnClasses {
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
}

pub fn parse_csv(source: &[u8], config: &PreprocessConfig) -> Result<RawTable, IngestError> {
    if source.is_empty() {
        return Err(IngestError::EmptySource);
    }
    config.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(config.delimiter as u8)
        .from_reader(source);

    let mut records = reader.records();
    let header_record = match records.next() {
        Some(r) => r?,
        None => return Err(IngestError::HeaderMissing),
    };
    if header_record.iter().all(str::is_empty) {
        return Err(IngestError::HeaderMissing);
    }
    let mut header = Vec::with_capacity(header_record.len());
    let mut seen = HashSet::new();
    for (i, name) in header_record.iter().enumerate() {
        let name = if name.is_empty() {
            format!("column_{}", i + 1)
        } else {
            name.to_string()
        };
        if !seen.insert(name.clone()) {
            return Err(IngestError::DuplicateColumn(name));
        }
        header.push(name);
    }

    let width = header.len();
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        if record.len() > width {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(IngestError::RowOverflow(line));
        }
        let mut row: Vec<Option<String>> = record
            .iter()
            .map(|c| (!c.is_empty()).then(|| c.to_string()))
            .collect();
        row.resize(width, None);
        rows.push(row);
    }
    Ok(RawTable { header, rows })
}

/// Parses a cell as a finite decimal number.
pub fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn classify_columns(table: &RawTable, config: &PreprocessConfig) -> ColumnClasses {
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    for (idx, name) in table.header.iter().enumerate() {
        if config.time_column.as_deref() == Some(name.as_str()) {
            continue;
        }
        let (present, parsed) = table
            .column(idx)
            .flatten()
            .fold((0usize, 0usize), |(present, parsed), cell| {
                (present + 1, parsed + parse_number(cell).is_some() as usize)
            });
        if present > 0 && parsed as f64 >= config.numeric_threshold * present as f64 {
            numeric.push(name.clone());
        } else {
            categorical.push(name.clone());
        }
    }
    ColumnClasses {
        numeric,
        categorical,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimeFormat {
    Integer,
    /// Decimal numbers, stored at 1/1000 resolution.
    Fractional,
    DateTime,
}

fn parse_datetime_millis(cell: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(cell) {
        return Some(dt.timestamp_millis());
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y/%m/%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn parse_time(cell: &str, format: TimeFormat) -> Option<i64> {
    match format {
        TimeFormat::Integer => cell.parse::<i64>().ok(),
        TimeFormat::Fractional => {
            let scaled = (parse_number(cell)? * 1000.0).round();
            (scaled.abs() < 9.0e18).then_some(scaled as i64)
        }
        TimeFormat::DateTime => parse_datetime_millis(cell),
    }
}

/// Resolves one timestamp per row (`None` when the cell is unusable).
fn row_timestamps(
    table: &RawTable,
    config: &PreprocessConfig,
) -> Result<Vec<Option<i64>>, IngestError> {
    let Some(time_col) = config.time_column.as_deref() else {
        return Ok((0..table.rows.len() as i64).map(Some).collect());
    };
    let idx = table
        .column_index(time_col)
        .ok_or_else(|| IngestError::UnknownTimeColumn(time_col.to_string()))?;

    let (mut numbers, mut integers, mut datetimes) = (0usize, 0usize, 0usize);
    for cell in table.column(idx).flatten() {
        if parse_number(cell).is_some() {
            numbers += 1;
            integers += cell.parse::<i64>().is_ok() as usize;
        } else if parse_datetime_millis(cell).is_some() {
            datetimes += 1;
        }
    }
    let format = if numbers > 0 && numbers >= datetimes {
        if integers == numbers {
            TimeFormat::Integer
        } else {
            TimeFormat::Fractional
        }
    } else if datetimes > 0 {
        TimeFormat::DateTime
    } else {
        return Err(IngestError::NoUsableTimestamps(time_col.to_string()));
    };
    Ok(table
        .column(idx)
        .map(|cell| cell.and_then(|c| parse_time(c, format)))
        .collect())
}

/// Z-normalizes in place with the population standard deviation; a
/// constant series maps to all zeros.
pub fn z_normalize(values: &mut [f64]) {
    let Some(stats) = SeriesStats::from_values(values) else {
        return;
    };
    if stats.std == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values
            .iter_mut()
            .for_each(|v| *v = (*v - stats.mean) / stats.std);
    }
}

/// Turns classified columns into series and assembles the dataset.
pub fn build_series(
    table: &RawTable,
    classes: &ColumnClasses,
    config: &PreprocessConfig,
    id: DatasetId,
    source_name: Option<String>,
) -> Result<(Dataset, IngestReport), IngestError> {
    if classes.numeric.is_empty() {
        return Err(IngestError::NoNumericColumns);
    }
    let timestamps = row_timestamps(table, config)?;
    let rows_without_timestamp = timestamps.iter().filter(|t| t.is_none()).count();
    if rows_without_timestamp == timestamps.len() && !timestamps.is_empty() {
        let col = config.time_column.clone().unwrap_or_default();
        return Err(IngestError::NoUsableTimestamps(col));
    }
    let nonmonotone_rows_sorted = timestamps
        .iter()
        .flatten()
        .zip(timestamps.iter().flatten().skip(1))
        .any(|(a, b)| b < a);

    let mut warnings = Vec::new();
    if rows_without_timestamp > 0 {
        warnings.push(format!(
            "{rows_without_timestamp} rows dropped: unusable timestamp"
        ));
    }
    let mut report = IngestReport {
        rows_read: table.rows.len(),
        columns_numeric: classes.numeric.clone(),
        columns_categorical: classes.categorical.clone(),
        missing_cells_dropped: BTreeMap::new(),
        duplicate_timestamps_collapsed: 0,
        nonmonotone_rows_sorted,
        rows_without_timestamp,
        series_excluded: Vec::new(),
    };

    let mut series = Vec::with_capacity(classes.numeric.len());
    for name in &classes.numeric {
        let idx = table
            .column_index(name)
            .expect("classified column exists in header");
        let mut dropped = 0usize;
        let mut points: Vec<TimePoint> = Vec::with_capacity(table.rows.len());
        for (t, cell) in timestamps.iter().zip(table.column(idx)) {
            let Some(t) = *t else { continue };
            match cell.and_then(parse_number) {
                Some(v) => points.push(TimePoint::new(t, v)),
                None => dropped += 1,
            }
        }
        report.missing_cells_dropped.insert(name.clone(), dropped);
        if dropped > 0 {
            warnings.push(format!("column {name:?}: {dropped} missing cells dropped"));
        }

        points.sort_by_key(|p| p.t);
        let before = points.len();
        points.dedup_by_key(|p| p.t);
        report.duplicate_timestamps_collapsed += before - points.len();

        if points.len() < 2 {
            warnings.push(format!("column {name:?} excluded: fewer than 2 points"));
            report.series_excluded.push(name.clone());
            continue;
        }
        let mut values: Vec<f64> = points.iter().map(|p| p.v).collect();
        let stats = SeriesStats::from_values(&values).expect("non-empty");
        if config.normalize {
            z_normalize(&mut values);
            for (p, v) in points.iter_mut().zip(values) {
                p.v = v;
            }
        }
        series.push(TimeSeries {
            id: format!("{id}/{name}"),
            name: name.clone(),
            points,
            stats,
        });
    }
    if series.is_empty() {
        return Err(IngestError::NoUsableSeries);
    }

    let categorical_columns = classes
        .categorical
        .iter()
        .map(|name| {
            let idx = table.column_index(name).expect("column exists");
            let distinct: HashSet<&str> = table.column(idx).flatten().collect();
            CategoricalColumn {
                name: name.clone(),
                distinct_count: distinct.len(),
            }
        })
        .collect();

    let dataset = Dataset {
        id,
        series,
        categorical_columns,
        provenance: Provenance {
            source: source_name,
            row_count: table.rows.len(),
            warnings,
            config: config.clone(),
        },
    };
    Ok((dataset, report))
}

/// Full ingestion of CSV bytes.
pub fn ingest(
    source: &[u8],
    config: &PreprocessConfig,
    source_name: Option<String>,
) -> Result<(Dataset, IngestReport), IngestError> {
    let table = parse_csv(source, config)?;
    let classes = classify_columns(&table, config);
    let id = dataset_fingerprint(source, config);
    build_series(&table, &classes, config, id, source_name)
}

/// Writes the dataset's series back out as a wide CSV with an integer time
/// column. Cells are empty where a series has no point at that timestamp.
pub fn export_csv(dataset: &Dataset) -> Result<(String, String), csv::Error> {
    let mut time_name = String::from("t");
    while dataset.series.iter().any(|s| s.name == time_name) {
        time_name.insert(0, '_');
    }
    let mut grid: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for (col, s) in dataset.series.iter().enumerate() {
        for p in &s.points {
            grid.entry(p.t)
                .or_insert_with(|| vec![None; dataset.series.len()])[col] = Some(p.v);
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(
        std::iter::once(time_name.as_str()).chain(dataset.series.iter().map(|s| s.name.as_str())),
    )?;
    for (t, cells) in grid {
        let mut record = vec![t.to_string()];
        record.extend(
            cells
                .into_iter()
                .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
        );
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok((
        time_name,
        String::from_utf8(bytes).expect("csv output is utf-8"),
    ))
}
