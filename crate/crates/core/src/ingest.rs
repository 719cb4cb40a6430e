//! CSV ingestion and alignment of raw readings onto the 5-minute grid.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::series::{Channel, SubjectSeries};
use crate::series::{SeriesError, STEP_SECONDS};

/// Canonical timestamp layout for every CSV this crate writes.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Half the grid step: a raw point farther than this from a slot never fills it.
const TOLERANCE_SECONDS: i64 = STEP_SECONDS / 2;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("empty series")]
    EmptySeries,
    #[error("required column `{0}` not found in header")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Column names used to read an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub timestamp: String,
    pub subject_id: String,
    pub glucose: String,
    /// Heart-rate column; ignored when absent from the header.
    pub heart_rate: Option<String>,
    /// Optional per-row source dataset column.
    pub dataset: Option<String>,
    /// Tag applied when `dataset` is unset or the cell is empty.
    pub dataset_tag: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            subject_id: "subject_id".into(),
            glucose: "glucose".into(),
            heart_rate: Some("heart_rate".into()),
            dataset: None,
            dataset_tag: "unknown".into(),
        }
    }
}

/// A skipped input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

/// Result of [`parse_csv`]: aligned series plus row-level bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub series: Vec<SubjectSeries>,
    pub diagnostics: Vec<RowDiagnostic>,
    pub rows_read: u64,
    /// Rows dropped because a (subject, timestamp) pair was already seen.
    pub conflicts: u64,
}

impl ParseOutcome {
    pub fn rows_skipped(&self) -> u64 {
        self.diagnostics.len() as u64
    }
}

/// One parsed input row. Both channels absent still marks a grid slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub timestamp: NaiveDateTime,
    pub glucose: Option<f64>,
    pub heart_rate: Option<f64>,
}

/// Parses an input CSV into one grid-aligned series per (dataset, subject).
///
/// Malformed rows and unparseable timestamps are skipped and reported in
/// [`ParseOutcome::diagnostics`]. A repeated (subject, timestamp) keeps the
/// first row in file order. Output is sorted by (dataset_tag, subject_id).
pub fn parse_csv<R: Read>(input: R, schema: &ColumnSchema) -> Result<ParseOutcome, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));

    let ts_col = require(&schema.timestamp)?;
    let subject_col = require(&schema.subject_id)?;
    let glucose_col = require(&schema.glucose)?;
    let hr_col = schema.heart_rate.as_deref().and_then(find);
    let dataset_col = match schema.dataset.as_deref() {
        Some(name) => Some(require(name)?),
        None => None,
    };

    let mut outcome = ParseOutcome::default();
    let mut groups: BTreeMap<(String, String), Vec<RawRow>> = BTreeMap::new();

    for record in reader.records() {
        outcome.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                outcome.diagnostics.push(RowDiagnostic {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut skip = |message: String| outcome.diagnostics.push(RowDiagnostic { line, message });

        let (Some(ts_cell), Some(subject), Some(glucose_cell)) =
            (record.get(ts_col), record.get(subject_col), record.get(glucose_col))
        else {
            skip(format!(
                "expected at least {} fields, found {}",
                headers.len(),
                record.len()
            ));
            continue;
        };
        if subject.is_empty() {
            skip("empty subject id".into());
            continue;
        }
        let Some(timestamp) = parse_timestamp(ts_cell) else {
            skip(format!("unparseable timestamp `{ts_cell}`"));
            continue;
        };
        let glucose = match parse_value(glucose_cell) {
            Ok(v) => v,
            Err(()) => {
                skip(format!("unparseable glucose `{glucose_cell}`"));
                continue;
            }
        };
        let heart_rate = match hr_col.and_then(|c| record.get(c)).map(parse_value) {
            None => None,
            Some(Ok(v)) => v,
            Some(Err(())) => {
                skip(format!(
                    "unparseable heart rate `{}`",
                    record.get(hr_col.unwrap()).unwrap_or("")
                ));
                continue;
            }
        };
        let dataset_tag = dataset_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .unwrap_or(&schema.dataset_tag)
            .to_string();

        groups
            .entry((dataset_tag, subject.to_string()))
            .or_default()
            .push(RawRow {
                timestamp,
                glucose,
                heart_rate,
            });
    }

    let prepared: Vec<_> = groups
        .into_iter()
        .map(|(key, mut rows)| {
            // stable: the first row in file order survives deduplication
            rows.sort_by_key(|r| r.timestamp);
            let before = rows.len();
            rows.dedup_by_key(|r| r.timestamp);
            outcome.conflicts += (before - rows.len()) as u64;
            (key, rows)
        })
        .collect();

    let has_hr = hr_col.is_some();
    outcome.series = prepared
        .into_par_iter()
        .map(|((dataset_tag, subject_id), rows)| {
            let with_hr = has_hr && rows.iter().any(|r| r.heart_rate.is_some());
            align_to_grid(&subject_id, &dataset_tag, &rows, with_hr)
        })
        .collect::<Result<_, _>>()?;
    Ok(outcome)
}

/// Accepts `YYYY-MM-DDTHH:MM:SS` (optional fractional seconds, optional
/// trailing `Z`, space instead of `T`) or integer epoch seconds.
pub fn parse_timestamp(cell: &str) -> Option<NaiveDateTime> {
    let cell = cell.trim();
    if let Ok(secs) = cell.parse::<i64>() {
        return DateTime::from_timestamp(secs, 0).map(|dt| dt.naive_utc());
    }
    let cell = cell.strip_suffix('Z').unwrap_or(cell);
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(cell, fmt).ok())
}

/// Empty, `NaN`, `NA` and non-finite cells are missing; anything else must parse.
fn parse_value(cell: &str) -> Result<Option<f64>, ()> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("null") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| ())?;
    Ok(v.is_finite().then_some(v))
}

fn epoch(ts: NaiveDateTime) -> i64 {
    ts.and_utc().timestamp()
}

/// Aligns timestamp-sorted rows onto the 5-minute grid.
///
/// The grid starts at the first timestamp floored to a 5-minute boundary and
/// extends to the last slot within tolerance of the final row. Each slot takes
/// the present value nearest to it within ±2.5 min, ties going to the earlier
/// point; points that lose are dropped, never averaged.
pub fn align_to_grid(
    subject_id: &str,
    dataset_tag: &str,
    rows: &[RawRow],
    with_heart_rate: bool,
) -> Result<SubjectSeries, IngestError> {
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Err(IngestError::EmptySeries);
    };
    let start = epoch(first.timestamp).div_euclid(STEP_SECONDS) * STEP_SECONDS;
    let span = epoch(last.timestamp) - start;
    let slots = ((span + TOLERANCE_SECONDS) / STEP_SECONDS + 1) as usize;
    let grid_start = DateTime::from_timestamp(start, 0)
        .expect("floored timestamp stays in range")
        .naive_utc();

    let points = |pick: fn(&RawRow) -> Option<f64>| -> Vec<(i64, f64)> {
        rows.iter()
            .filter_map(|r| pick(r).map(|v| (epoch(r.timestamp) - start, v)))
            .collect()
    };
    let glucose = nearest_per_slot(&points(|r| r.glucose), slots);
    let heart_rate = with_heart_rate.then(|| nearest_per_slot(&points(|r| r.heart_rate), slots));
    Ok(SubjectSeries::new(
        subject_id,
        dataset_tag,
        grid_start,
        glucose,
        heart_rate,
    )?)
}

/// `points` are (offset seconds from grid start, value), sorted by offset.
fn nearest_per_slot(points: &[(i64, f64)], slots: usize) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(slots);
    let mut lo = 0;
    for k in 0..slots {
        let center = k as i64 * STEP_SECONDS;
        while lo < points.len() && points[lo].0 < center - TOLERANCE_SECONDS {
            lo += 1;
        }
        let mut best: Option<(i64, f64)> = None;
        for &(t, v) in points[lo..]
            .iter()
            .take_while(|(t, _)| *t <= center + TOLERANCE_SECONDS)
        {
            let d = (t - center).abs();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, v));
            }
        }
        out.push(best.map(|(_, v)| v));
    }
    out
}

/// Writes the canonical per-subject CSV: `timestamp,subject_id,glucose,heart_rate`.
/// Missing values are empty fields.
pub fn write_canonical_csv<W: Write>(series: &SubjectSeries, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "subject_id", "glucose", "heart_rate"])?;
    for i in 0..series.len() {
        let hr = series.heart_rate.as_ref().and_then(|h| h[i]);
        w.write_record([
            series.timestamp(i).format(TIMESTAMP_FORMAT).to_string(),
            series.subject_id.clone(),
            fmt_value(series.glucose[i]),
            fmt_value(hr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-subject counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectInventory {
    pub dataset_tag: String,
    pub subject_id: String,
    pub samples: usize,
    pub glucose_missing: usize,
    pub heart_rate_missing: Option<usize>,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

impl SubjectInventory {
    pub fn glucose_present(&self) -> usize {
        self.samples - self.glucose_missing
    }
}

/// Per-dataset totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetTotals {
    pub subjects: usize,
    pub samples: usize,
    pub glucose_missing: usize,
    pub heart_rate_missing: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetInventory {
    pub subjects: Vec<SubjectInventory>,
    pub datasets: BTreeMap<String, DatasetTotals>,
}

pub fn inventory(series: &[SubjectSeries]) -> DatasetInventory {
    let mut inv = DatasetInventory::default();
    for s in series {
        let entry = SubjectInventory {
            dataset_tag: s.dataset_tag.clone(),
            subject_id: s.subject_id.clone(),
            samples: s.len(),
            glucose_missing: s.missing_count(Channel::Glucose).unwrap_or(0),
            heart_rate_missing: s.missing_count(Channel::HeartRate),
            start: s.grid_start,
            end: s.timestamp(s.len().saturating_sub(1)),
        };
        let totals = inv.datasets.entry(s.dataset_tag.clone()).or_default();
        totals.subjects += 1;
        totals.samples += entry.samples;
        totals.glucose_missing += entry.glucose_missing;
        totals.heart_rate_missing += entry.heart_rate_missing.unwrap_or(0);
        inv.subjects.push(entry);
    }
    inv.subjects
        .sort_by(|a, b| (&a.dataset_tag, &a.subject_id).cmp(&(&b.dataset_tag, &b.subject_id)));
    inv
}

/// `dataset_tag,subject_id,samples,glucose_missing,heart_rate_missing,start,end`
pub fn write_inventory_csv<W: Write>(inv: &DatasetInventory, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset_tag",
        "subject_id",
        "samples",
        "glucose_missing",
        "heart_rate_missing",
        "start",
        "end",
    ])?;
    for s in &inv.subjects {
        w.write_record([
            s.dataset_tag.clone(),
            s.subject_id.clone(),
            s.samples.to_string(),
            s.glucose_missing.to_string(),
            s.heart_rate_missing.map(|m| m.to_string()).unwrap_or_default(),
            s.start.format(TIMESTAMP_FORMAT).to_string(),
            s.end.format(TIMESTAMP_FORMAT).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
