//! Trace-file parsing and resampling onto the uniform 1 Hz day grid.
//!
//! Two line grammars are accepted, mixed freely within a file:
//!
//! * `DD/MM/YYYY HH:MM:SS;<watts>` — plug-meter export format; extra
//!   `;`-separated columns are ignored.
//! * `<epoch_seconds>,<watts>` — compact form for synthetic data.
//!
//! Input is UTF-8 with LF or CRLF line endings. Blank lines are skipped.
//! Malformed lines are counted; more than 10% malformed fails the parse.

use chrono::{NaiveDate, NaiveDateTime};
use thiserror::Error;

use crate::trace::{ApplianceId, PowerTrace, TraceError, TraceOrigin, TraceSet, SECONDS_PER_DAY};

/// Malformed-line fraction above which parsing fails outright.
const MALFORMED_FAIL_RATIO: f64 = 0.10;
/// How many offending line numbers to carry in a parse failure.
const MAX_REPORTED_LINES: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("no parseable samples in input")]
    Empty,
    #[error("{malformed} of {total} lines malformed (> {limit:.0}%), first offenders at lines {lines:?}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit: f64,
        lines: Vec<usize>,
    },
    #[error("sample at line {line} has non-finite or negative watts: {value}")]
    BadWatts { line: usize, value: f64 },
    #[error("file covers day {actual}, expected {expected}")]
    WrongDay {
        expected: NaiveDate,
        actual: NaiveDate,
    },
    #[error("missing appliances: {}", .0.join(", "))]
    MissingAppliances(Vec<String>),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// One parsed sample: wall-clock time as Unix epoch seconds, plus watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub epoch: i64,
    pub watts: f64,
}

/// A parsed trace file: rows sorted by timestamp, duplicates collapsed last-wins.
#[derive(Debug, Clone)]
pub struct RawSampleFile {
    source: String,
    rows: Vec<RawSample>,
    malformed_lines: usize,
}

impl RawSampleFile {
    /// Assemble from already-decoded samples (e.g. fetched from the
    /// measurement service). Rows are sorted by time with duplicate
    /// timestamps collapsed last-wins, exactly like the file parser.
    pub fn from_rows(source: impl Into<String>, rows: Vec<RawSample>) -> Result<Self, IngestError> {
        for (i, row) in rows.iter().enumerate() {
            if !row.watts.is_finite() || row.watts < 0.0 {
                return Err(IngestError::BadWatts {
                    line: i + 1,
                    value: row.watts,
                });
            }
        }
        if rows.is_empty() {
            return Err(IngestError::Empty);
        }
        Ok(RawSampleFile {
            source: source.into(),
            rows: sort_dedup(rows),
            malformed_lines: 0,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn rows(&self) -> &[RawSample] {
        &self.rows
    }

    /// Lines that failed to parse (at or below the failure threshold).
    pub fn malformed_lines(&self) -> usize {
        self.malformed_lines
    }

    /// The calendar day (UTC) of the first sample.
    pub fn day(&self) -> NaiveDate {
        epoch_day(self.rows[0].epoch)
    }
}

fn epoch_day(epoch: i64) -> NaiveDate {
    chrono::DateTime::from_timestamp(epoch, 0)
        .expect("epoch in datetime range")
        .date_naive()
}

/// Stable sort by timestamp, then keep the last occurrence per timestamp.
fn sort_dedup(mut rows: Vec<RawSample>) -> Vec<RawSample> {
    rows.sort_by_key(|r| r.epoch);
    let mut deduped: Vec<RawSample> = Vec::with_capacity(rows.len());
    for row in rows {
        match deduped.last_mut() {
            Some(last) if last.epoch == row.epoch => *last = row,
            _ => deduped.push(row),
        }
    }
    deduped
}

fn parse_line(line: &str) -> Option<RawSample> {
    let line = line.trim();
    if let Some((stamp, rest)) = line.split_once(';') {
        let watts_field = rest.split(';').next()?;
        let ts = NaiveDateTime::parse_from_str(stamp.trim(), "%d/%m/%Y %H:%M:%S").ok()?;
        let watts: f64 = watts_field.trim().parse().ok()?;
        return Some(RawSample {
            epoch: ts.and_utc().timestamp(),
            watts,
        });
    }
    let (epoch, watts) = line.split_once(',')?;
    let epoch: i64 = epoch.trim().parse().ok()?;
    let watts: f64 = watts.trim().parse().ok()?;
    Some(RawSample { epoch, watts })
}

/// Parse a trace file. Rows come out in timestamp order with duplicate
/// timestamps collapsed last-wins (by input order).
pub fn parse_trace_file(bytes: &[u8], source: &str) -> Result<RawSampleFile, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let mut rows: Vec<RawSample> = Vec::new();
    let mut malformed = Vec::new();
    let mut total = 0usize;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(raw_line) {
            Some(sample) => {
                if !sample.watts.is_finite() || sample.watts < 0.0 {
                    return Err(IngestError::BadWatts {
                        line: line_no,
                        value: sample.watts,
                    });
                }
                rows.push(sample);
            }
            None => {
                if malformed.len() < MAX_REPORTED_LINES {
                    malformed.push(line_no);
                }
            }
        }
    }
    let malformed_count = total - rows.len();
    if total > 0 && malformed_count as f64 > MALFORMED_FAIL_RATIO * total as f64 {
        return Err(IngestError::TooManyMalformed {
            malformed: malformed_count,
            total,
            limit: MALFORMED_FAIL_RATIO * 100.0,
            lines: malformed,
        });
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(RawSampleFile {
        source: source.to_string(),
        rows: sort_dedup(rows),
        malformed_lines: malformed_count,
    })
}

/// Serialize rows back to the compact `epoch,watts` grammar.
///
/// Parsing the output yields the same rows, making parse→serialize→parse a
/// fixed point.
pub fn serialize_raw(file: &RawSampleFile) -> String {
    let mut out = String::new();
    for row in &file.rows {
        out.push_str(&format!("{},{}\n", row.epoch, row.watts));
    }
    out
}

/// Resample onto the 1 Hz grid of the file's day.
///
/// Output runs from day start through the last in-day sample: gaps of at most
/// `gap_fill_seconds` are forward-filled with the last value, longer gaps (and
/// seconds before the first sample) become 0 W. The result is flagged partial
/// unless every second of the full day was covered by a sample or a short-gap
/// fill. Samples beyond the file's first day are ignored.
pub fn resample_to_1hz(
    raw: &RawSampleFile,
    gap_fill_seconds: u32,
    origin: TraceOrigin,
) -> Result<PowerTrace, IngestError> {
    if raw.rows.is_empty() {
        return Err(IngestError::Empty);
    }
    let day = raw.day();
    let day_start = day
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp();
    let in_day: Vec<(usize, f64)> = raw
        .rows
        .iter()
        .filter_map(|r| {
            let offset = r.epoch - day_start;
            (0..SECONDS_PER_DAY as i64)
                .contains(&offset)
                .then_some((offset as usize, r.watts))
        })
        .collect();
    if in_day.is_empty() {
        return Err(IngestError::Empty);
    }

    let last_t = in_day.last().expect("non-empty").0;
    let len = last_t + 1;
    let mut samples = vec![0.0_f64; len];
    let mut covered = vec![false; len];
    let mut prev: Option<(usize, f64)> = None;
    for &(t, w) in &in_day {
        if let Some((pt, pw)) = prev {
            let fill_until = (pt + gap_fill_seconds as usize).min(t.saturating_sub(1));
            for s in (pt + 1)..=fill_until {
                samples[s] = pw;
                covered[s] = true;
            }
        }
        samples[t] = w;
        covered[t] = true;
        prev = Some((t, w));
    }

    let full = len == SECONDS_PER_DAY && covered.iter().all(|&c| c);
    if full {
        Ok(PowerTrace::full_day(day, origin, samples)?)
    } else {
        Ok(PowerTrace::partial(day, origin, samples)?)
    }
}

/// Assemble one day of per-appliance traces.
///
/// Every appliance in `expected` must have a file; each file must cover the
/// requested day. Traces are resampled to 1 Hz and always span all 86 400
/// seconds: anything after a file's last sample is 0 W, and such traces stay
/// flagged partial because the tail was assumed, not measured.
pub fn build_day(
    expected: &[ApplianceId],
    entries: &[(ApplianceId, RawSampleFile)],
    day: NaiveDate,
    gap_fill_seconds: u32,
) -> Result<TraceSet, IngestError> {
    let missing: Vec<String> = expected
        .iter()
        .filter(|id| entries.iter().all(|(got, _)| got != *id))
        .map(|id| id.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingAppliances(missing));
    }
    let mut traces = Vec::new();
    for (id, raw) in entries {
        if raw.day() != day {
            return Err(IngestError::WrongDay {
                expected: day,
                actual: raw.day(),
            });
        }
        let origin = TraceOrigin::Appliance(id.clone());
        let trace = resample_to_1hz(raw, gap_fill_seconds, origin.clone())?;
        let trace = if trace.len() < SECONDS_PER_DAY {
            let mut samples = trace.samples().to_vec();
            samples.resize(SECONDS_PER_DAY, 0.0);
            PowerTrace::partial(day, origin, samples)?
        } else {
            trace
        };
        traces.push((id.clone(), trace));
    }
    Ok(TraceSet::new(day, traces)?)
}
