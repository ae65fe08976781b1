//! Text file formats for traces, masks, confusion counts, and usage lists.
//!
//! Every format is line-oriented UTF-8 with deterministic output, so
//! unchanged data always produces identical bytes:
//!
//! * trace archive — `#nalm-traces v1 day=YYYY-MM-DD`, an optional
//!   `#partial` line naming columns that do not cover their full day, a
//!   `t,<id>,...` column header, then one CSV row per second;
//! * aggregate trace — the same container with the single column `AGGREGATE`;
//! * mask archive — `#nalm-mask v1 day=YYYY-MM-DD` with 0/1 cells;
//! * counts CSV — `appliance,tp,fp,tn,fn` rows, optionally closed by an
//!   `Overall` row that must equal the column sums;
//! * usage list — `appliance,start_iso8601,stop_iso8601` records.
//!
//! Watt cells print via the shortest round-tripping decimal form, so
//! read(write(x)) reproduces exact bit patterns.

use chrono::NaiveDate;
use thiserror::Error;

use crate::eval::ConfusionCounts;
use crate::events::UsageInterval;
use crate::trace::{
    ApplianceId, PowerTrace, StateMask, TraceError, TraceOrigin, TraceSet, AGGREGATE_TOKEN,
    SECONDS_PER_DAY,
};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("line 1: expected '{expected} day=YYYY-MM-DD', got '{got}'")]
    BadHeader { expected: &'static str, got: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("row {row} has index {got}, expected {expected}")]
    RowIndex { row: usize, got: String, expected: usize },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

const TRACES_MAGIC: &str = "#nalm-traces v1";
const MASK_MAGIC: &str = "#nalm-mask v1";
const PARTIAL_PREFIX: &str = "#partial ";

fn malformed(line: usize, message: impl Into<String>) -> ArchiveError {
    ArchiveError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_day_header(
    line: Option<&str>,
    magic: &'static str,
) -> Result<NaiveDate, ArchiveError> {
    let line = line.unwrap_or("");
    let bad = || ArchiveError::BadHeader {
        expected: magic,
        got: line.to_string(),
    };
    let rest = line.strip_prefix(magic).ok_or_else(bad)?;
    let day_text = rest.trim().strip_prefix("day=").ok_or_else(bad)?;
    NaiveDate::parse_from_str(day_text, "%Y-%m-%d").map_err(|_| bad())
}

/// Column ids and per-column partial flags shared by trace/aggregate
/// archives.
struct Columns {
    ids: Vec<String>,
    partial: Vec<bool>,
    body_start: usize,
}

fn parse_columns<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
) -> Result<Columns, ArchiveError> {
    let mut line_no = 1;
    let mut partial_names: Vec<String> = Vec::new();
    let mut header = None;
    for line in lines {
        line_no += 1;
        if let Some(rest) = line.strip_prefix(PARTIAL_PREFIX) {
            partial_names = rest.split(',').map(|s| s.trim().to_string()).collect();
            continue;
        }
        header = Some((line_no, line));
        break;
    }
    let (header_line, header) =
        header.ok_or_else(|| malformed(line_no, "missing column header"))?;
    let mut fields = header.split(',');
    if fields.next() != Some("t") {
        return Err(malformed(header_line, "column header must start with 't'"));
    }
    let ids: Vec<String> = fields.map(str::to_string).collect();
    if ids.is_empty() {
        return Err(malformed(header_line, "no data columns"));
    }
    let partial = ids.iter().map(|id| partial_names.contains(id)).collect();
    Ok(Columns {
        ids,
        partial,
        body_start: header_line + 1,
    })
}

fn parse_body(
    text: &str,
    body_start: usize,
    n_cols: usize,
    parse_cell: impl Fn(&str, usize) -> Result<f64, ArchiveError>,
) -> Result<Vec<Vec<f64>>, ArchiveError> {
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
    let mut expected_t = 0usize;
    for (offset, line) in text
        .lines()
        .skip(body_start - 1)
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let line_no = body_start + offset;
        let mut cells = line.split(',');
        let t_cell = cells.next().unwrap_or("");
        let t: usize = t_cell
            .parse()
            .map_err(|_| ArchiveError::RowIndex {
                row: line_no,
                got: t_cell.to_string(),
                expected: expected_t,
            })?;
        if t != expected_t {
            return Err(ArchiveError::RowIndex {
                row: line_no,
                got: t_cell.to_string(),
                expected: expected_t,
            });
        }
        let mut count = 0;
        for (col, cell) in cells.enumerate() {
            if col >= n_cols {
                return Err(malformed(line_no, "more cells than columns"));
            }
            columns[col].push(parse_cell(cell, line_no)?);
            count += 1;
        }
        if count != n_cols {
            return Err(malformed(
                line_no,
                format!("expected {n_cols} value cells, got {count}"),
            ));
        }
        expected_t += 1;
    }
    if expected_t == 0 {
        return Err(ArchiveError::Empty);
    }
    Ok(columns)
}

fn parse_watt_cell(cell: &str, line_no: usize) -> Result<f64, ArchiveError> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| malformed(line_no, format!("bad watt value '{cell}'")))
}

fn parse_bit_cell(cell: &str, line_no: usize) -> Result<f64, ArchiveError> {
    match cell.trim() {
        "0" => Ok(0.0),
        "1" => Ok(1.0),
        other => Err(malformed(line_no, format!("mask cell must be 0 or 1, got '{other}'"))),
    }
}

fn make_trace(
    day: NaiveDate,
    origin: TraceOrigin,
    samples: Vec<f64>,
    flagged_partial: bool,
) -> Result<PowerTrace, TraceError> {
    if flagged_partial || samples.len() < SECONDS_PER_DAY {
        PowerTrace::partial(day, origin, samples)
    } else {
        PowerTrace::full_day(day, origin, samples)
    }
}

fn write_trace_header(
    out: &mut String,
    day: NaiveDate,
    labels: &[String],
    partial: &[bool],
) {
    out.push_str(&format!("{TRACES_MAGIC} day={}\n", day.format("%Y-%m-%d")));
    let flagged: Vec<&str> = labels
        .iter()
        .zip(partial)
        .filter(|(_, &p)| p)
        .map(|(l, _)| l.as_str())
        .collect();
    if !flagged.is_empty() {
        out.push_str(PARTIAL_PREFIX);
        out.push_str(&flagged.join(","));
        out.push('\n');
    }
    out.push_str("t,");
    out.push_str(&labels.join(","));
    out.push('\n');
}

/// Serialize a per-appliance trace set.
pub fn write_trace_set(set: &TraceSet) -> String {
    let labels: Vec<String> = set.iter().map(|(id, _)| id.to_string()).collect();
    let partial: Vec<bool> = set.iter().map(|(_, t)| t.is_partial()).collect();
    let traces: Vec<&PowerTrace> = set.iter().map(|(_, t)| t).collect();
    let mut out = String::new();
    write_trace_header(&mut out, set.day(), &labels, &partial);
    for t in 0..set.sample_len() {
        out.push_str(&t.to_string());
        for trace in &traces {
            out.push(',');
            out.push_str(&trace.samples()[t].to_string());
        }
        out.push('\n');
    }
    out
}

/// Parse a trace-set archive produced by [`write_trace_set`].
pub fn read_trace_set(text: &str) -> Result<TraceSet, ArchiveError> {
    let mut lines = text.lines();
    let day = parse_day_header(lines.next(), TRACES_MAGIC)?;
    let columns = parse_columns(&mut lines)?;
    let ids: Vec<ApplianceId> = columns
        .ids
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let (name, type_tag) = label.split_once(':').ok_or_else(|| {
                malformed(
                    columns.body_start - 1,
                    format!("column {} must be 'name:type', got '{label}'", i + 2),
                )
            })?;
            Ok(ApplianceId::new(name, type_tag)?)
        })
        .collect::<Result<_, ArchiveError>>()?;
    let body = parse_body(text, columns.body_start, ids.len(), parse_watt_cell)?;
    let traces: Vec<(ApplianceId, PowerTrace)> = ids
        .into_iter()
        .zip(body)
        .zip(&columns.partial)
        .map(|((id, samples), &flagged)| {
            let trace = make_trace(day, TraceOrigin::Appliance(id.clone()), samples, flagged)?;
            Ok((id, trace))
        })
        .collect::<Result<_, TraceError>>()?;
    Ok(TraceSet::new(day, traces)?)
}

/// Serialize an aggregate trace (single `AGGREGATE` column).
pub fn write_aggregate(trace: &PowerTrace) -> String {
    let mut out = String::new();
    write_trace_header(
        &mut out,
        trace.day(),
        &[AGGREGATE_TOKEN.to_string()],
        &[trace.is_partial()],
    );
    for (t, w) in trace.samples().iter().enumerate() {
        out.push_str(&t.to_string());
        out.push(',');
        out.push_str(&w.to_string());
        out.push('\n');
    }
    out
}

/// Parse an aggregate trace archive produced by [`write_aggregate`].
pub fn read_aggregate(text: &str) -> Result<PowerTrace, ArchiveError> {
    let mut lines = text.lines();
    let day = parse_day_header(lines.next(), TRACES_MAGIC)?;
    let columns = parse_columns(&mut lines)?;
    if columns.ids.len() != 1 || columns.ids[0] != AGGREGATE_TOKEN {
        return Err(malformed(
            columns.body_start - 1,
            format!("expected single column '{AGGREGATE_TOKEN}'"),
        ));
    }
    let mut body = parse_body(text, columns.body_start, 1, parse_watt_cell)?;
    Ok(make_trace(
        day,
        TraceOrigin::Aggregate,
        body.remove(0),
        columns.partial[0],
    )?)
}

/// Serialize an ON/OFF mask.
pub fn write_mask(mask: &StateMask) -> String {
    let labels: Vec<String> = mask.iter().map(|(id, _)| id.to_string()).collect();
    let rows: Vec<&[bool]> = mask.iter().map(|(_, row)| row).collect();
    let mut out = format!("{MASK_MAGIC} day={}\n", mask.day().format("%Y-%m-%d"));
    out.push_str("t,");
    out.push_str(&labels.join(","));
    out.push('\n');
    for t in 0..mask.sample_len() {
        out.push_str(&t.to_string());
        for row in &rows {
            out.push(',');
            out.push(if row[t] { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Parse a mask archive produced by [`write_mask`].
pub fn read_mask(text: &str) -> Result<StateMask, ArchiveError> {
    let mut lines = text.lines();
    let day = parse_day_header(lines.next(), MASK_MAGIC)?;
    let columns = parse_columns(&mut lines)?;
    let ids: Vec<ApplianceId> = columns
        .ids
        .iter()
        .map(|label| {
            let (name, type_tag) = label.split_once(':').ok_or_else(|| {
                malformed(
                    columns.body_start - 1,
                    format!("column must be 'name:type', got '{label}'"),
                )
            })?;
            Ok(ApplianceId::new(name, type_tag)?)
        })
        .collect::<Result<_, ArchiveError>>()?;
    let body = parse_body(text, columns.body_start, ids.len(), parse_bit_cell)?;
    let rows: Vec<(ApplianceId, Vec<bool>)> = ids
        .into_iter()
        .zip(body)
        .map(|(id, cells)| (id, cells.into_iter().map(|c| c == 1.0).collect()))
        .collect();
    Ok(StateMask::new(day, rows)?)
}

/// Serialize labeled confusion counts, closing with an `Overall` sum row.
pub fn write_counts_csv(rows: &[(String, ConfusionCounts)]) -> String {
    let mut out = String::from("appliance,tp,fp,tn,fn\n");
    let mut overall = ConfusionCounts::default();
    for (name, c) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{}\n",
            c.true_pos, c.false_pos, c.true_neg, c.false_neg
        ));
        overall.add(c);
    }
    out.push_str(&format!(
        "Overall,{},{},{},{}\n",
        overall.true_pos, overall.false_pos, overall.true_neg, overall.false_neg
    ));
    out
}

/// Parse a counts CSV. The `Overall` row is optional; when present it must
/// equal the column sums of the other rows. Returns per-appliance rows only.
pub fn read_counts_csv(text: &str) -> Result<Vec<(String, ConfusionCounts)>, ArchiveError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "appliance,tp,fp,tn,fn")) => {}
        other => {
            return Err(malformed(
                1,
                format!(
                    "expected header 'appliance,tp,fp,tn,fn', got '{}'",
                    other.map(|(_, l)| l).unwrap_or("")
                ),
            ))
        }
    }
    let mut rows: Vec<(String, ConfusionCounts)> = Vec::new();
    let mut overall: Option<(usize, ConfusionCounts)> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if overall.is_some() {
            return Err(malformed(line_no, "rows after the Overall row"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(malformed(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let parse = |cell: &str| -> Result<u64, ArchiveError> {
            cell.trim()
                .parse()
                .map_err(|_| malformed(line_no, format!("bad count '{cell}'")))
        };
        let counts = ConfusionCounts::new(
            parse(fields[1])?,
            parse(fields[2])?,
            parse(fields[3])?,
            parse(fields[4])?,
        );
        if fields[0] == "Overall" {
            overall = Some((line_no, counts));
        } else {
            rows.push((fields[0].to_string(), counts));
        }
    }
    if rows.is_empty() {
        return Err(ArchiveError::Empty);
    }
    if let Some((line_no, claimed)) = overall {
        let mut sum = ConfusionCounts::default();
        for (_, c) in &rows {
            sum.add(c);
        }
        if sum != claimed {
            return Err(malformed(
                line_no,
                format!("Overall row {claimed:?} does not match column sums {sum:?}"),
            ));
        }
    }
    Ok(rows)
}

/// Serialize usages as `appliance,start_iso8601,stop_iso8601` records.
pub fn write_usages(usages: &[UsageInterval]) -> String {
    let mut out = String::new();
    for usage in usages {
        out.push_str(&format!(
            "{},{},{}\n",
            usage.appliance().name,
            usage.start_iso8601(),
            usage.stop_iso8601()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 5, 6).unwrap()
    }

    fn id(name: &str) -> ApplianceId {
        ApplianceId::new(name, "x").unwrap()
    }

    fn random_trace_set(rng: &mut ChaCha8Rng, len: usize) -> TraceSet {
        let traces: Vec<(ApplianceId, PowerTrace)> = (0..3)
            .map(|k| {
                let appliance = id(&format!("A{k}"));
                // Mix of integers and awkward decimals to exercise exact
                // round-tripping.
                let samples: Vec<f64> = (0..len)
                    .map(|_| match rng.gen_range(0..4) {
                        0 => 0.0,
                        1 => rng.gen_range(0..2000) as f64,
                        2 => rng.gen_range(0.0..100.0),
                        _ => 0.1 + rng.gen_range(0..10) as f64 / 3.0,
                    })
                    .collect();
                let trace = PowerTrace::partial(
                    day(),
                    TraceOrigin::Appliance(appliance.clone()),
                    samples,
                )
                .unwrap();
                (appliance, trace)
            })
            .collect();
        TraceSet::new(day(), traces).unwrap()
    }

    #[test]
    fn trace_set_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = random_trace_set(&mut rng, 500);
        let text = write_trace_set(&set);
        let back = read_trace_set(&text).unwrap();
        assert_eq!(back, set);
        // Fixed point: a second write is byte-identical.
        assert_eq!(write_trace_set(&back), text);
    }

    #[test]
    fn trace_archive_header_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = random_trace_set(&mut rng, 5);
        let text = write_trace_set(&set);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "#nalm-traces v1 day=2024-05-06");
        // All columns are partial (len 5 < full day), so the flag line lists
        // every id.
        assert_eq!(lines.next().unwrap(), "#partial A0:x,A1:x,A2:x");
        assert_eq!(lines.next().unwrap(), "t,A0:x,A1:x,A2:x");
        assert!(lines.next().unwrap().starts_with("0,"));
    }

    #[test]
    fn full_day_trace_keeps_full_flag() {
        let samples = vec![1.5; SECONDS_PER_DAY];
        let trace = PowerTrace::full_day(day(), TraceOrigin::Aggregate, samples).unwrap();
        let text = write_aggregate(&trace);
        assert!(!text.contains("#partial"));
        let back = read_aggregate(&text).unwrap();
        assert!(!back.is_partial());
        assert_eq!(back, trace);
    }

    #[test]
    fn partial_flag_survives_even_at_full_length() {
        // A trace can span all 86400 seconds yet still be marked partial
        // (gaps were zero-filled); the flag must survive the round trip.
        let samples = vec![2.0; SECONDS_PER_DAY];
        let trace = PowerTrace::partial(day(), TraceOrigin::Aggregate, samples).unwrap();
        let text = write_aggregate(&trace);
        assert!(text.contains("#partial AGGREGATE"));
        assert!(read_aggregate(&text).unwrap().is_partial());
    }

    #[test]
    fn aggregate_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..4000.0)).collect();
        let trace = PowerTrace::partial(day(), TraceOrigin::Aggregate, samples).unwrap();
        let text = write_aggregate(&trace);
        let back = read_aggregate(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(write_aggregate(&back), text);
    }

    #[test]
    fn mask_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<(ApplianceId, Vec<bool>)> = (0..3)
            .map(|k| {
                (
                    id(&format!("M{k}")),
                    (0..400).map(|_| rng.gen_bool(0.3)).collect(),
                )
            })
            .collect();
        let mask = StateMask::new(day(), rows).unwrap();
        let text = write_mask(&mask);
        let back = read_mask(&text).unwrap();
        assert_eq!(back, mask);
        assert_eq!(write_mask(&back), text);
    }

    #[test]
    fn mask_cells_are_strictly_binary() {
        let text = "#nalm-mask v1 day=2024-05-06\nt,A:x\n0,1\n1,2\n";
        assert!(matches!(
            read_mask(text),
            Err(ArchiveError::Malformed { line: 4, .. })
        ));
    }

    #[test]
    fn header_errors_are_specific() {
        assert!(matches!(
            read_trace_set("#wrong v9 day=2024-05-06\nt,A:x\n0,1\n"),
            Err(ArchiveError::BadHeader { .. })
        ));
        assert!(matches!(
            read_trace_set("#nalm-traces v1 day=yesterday\nt,A:x\n0,1\n"),
            Err(ArchiveError::BadHeader { .. })
        ));
        // Mask magic on a traces reader.
        assert!(matches!(
            read_trace_set("#nalm-mask v1 day=2024-05-06\nt,A:x\n0,1\n"),
            Err(ArchiveError::BadHeader { .. })
        ));
    }

    #[test]
    fn row_index_gaps_are_rejected() {
        let text = "#nalm-traces v1 day=2024-05-06\nt,A:x\n0,1\n2,1\n";
        assert!(matches!(
            read_trace_set(text),
            Err(ArchiveError::RowIndex { got, expected: 1, .. }) if got == "2"
        ));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = "#nalm-traces v1 day=2024-05-06\nt,A:x,B:x\n0,1\n";
        assert!(matches!(read_trace_set(text), Err(ArchiveError::Malformed { line: 3, .. })));
        let text = "#nalm-traces v1 day=2024-05-06\nt,A:x\n0,1,2\n";
        assert!(matches!(read_trace_set(text), Err(ArchiveError::Malformed { line: 3, .. })));
    }

    #[test]
    fn counts_csv_round_trips_reference_shape() {
        let rows = vec![
            ("TV-CRT".to_string(), ConfusionCounts::new(12048, 21, 72280, 2049)),
            ("Lamp".to_string(), ConfusionCounts::new(3177, 1935, 73428, 7858)),
        ];
        let text = write_counts_csv(&rows);
        assert!(text.starts_with("appliance,tp,fp,tn,fn\n"));
        assert!(text.contains("TV-CRT,12048,21,72280,2049\n"));
        assert!(text.ends_with("Overall,15225,1956,145708,9907\n"));
        let back = read_counts_csv(&text).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn counts_csv_overall_mismatch_is_rejected() {
        let text = "appliance,tp,fp,tn,fn\nA,1,2,3,4\nOverall,9,9,9,9\n";
        assert!(matches!(
            read_counts_csv(text),
            Err(ArchiveError::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn counts_csv_without_overall_is_accepted() {
        let text = "appliance,tp,fp,tn,fn\nA,1,2,3,4\n";
        let rows = read_counts_csv(text).unwrap();
        assert_eq!(rows, vec![("A".to_string(), ConfusionCounts::new(1, 2, 3, 4))]);
    }

    #[test]
    fn usage_export_format_is_exact() {
        let kettle = ApplianceId::new("Kettle", "kettle").unwrap();
        let usages = vec![
            UsageInterval::new(day(), kettle.clone(), 25_200, 25_500).unwrap(),
            UsageInterval::new(day(), kettle, 86_000, 86_400).unwrap(),
        ];
        let text = write_usages(&usages);
        assert_eq!(
            text,
            "Kettle,2024-05-06T07:00:00,2024-05-06T07:05:00\n\
             Kettle,2024-05-06T23:53:20,2024-05-07T00:00:00\n"
        );
    }
}
