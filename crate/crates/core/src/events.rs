//! Conversion of per-second ON/OFF masks into usage intervals.
//!
//! Classifier output flickers: one second of OFF in the middle of a two-hour
//! TV session, or a three-second blip of ON at night. [`debounce`] smooths
//! both (gap merge first, then short-run drop), and [`extract_usages`] turns
//! the cleaned rows into half-open `[start, stop)` intervals.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ApplianceId, StateMask, Timestamp, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum EventError {
    #[error("interval start {start} must precede stop {stop}")]
    EmptyInterval { start: u32, stop: u32 },
    #[error("interval stop {stop} exceeds the end of day ({SECONDS_PER_DAY})")]
    StopPastDayEnd { stop: u32 },
}

/// One contiguous period during which an appliance was in use.
///
/// `start` is the first ON second, `stop` the first second after the run
/// (exclusive). A run still open at day end closes at `stop = 86400`, which
/// is why the bounds are plain seconds-of-day rather than [`Timestamp`]s:
/// the exclusive end of a full day is not itself a valid second of that day.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UsageInterval {
    day: NaiveDate,
    appliance: ApplianceId,
    start: u32,
    stop: u32,
}

impl UsageInterval {
    pub fn new(
        day: NaiveDate,
        appliance: ApplianceId,
        start: u32,
        stop: u32,
    ) -> Result<UsageInterval, EventError> {
        if start >= stop {
            return Err(EventError::EmptyInterval { start, stop });
        }
        if stop > SECONDS_PER_DAY as u32 {
            return Err(EventError::StopPastDayEnd { stop });
        }
        Ok(UsageInterval {
            day,
            appliance,
            start,
            stop,
        })
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn appliance(&self) -> &ApplianceId {
        &self.appliance
    }

    /// First ON second of day.
    pub fn start_second(&self) -> u32 {
        self.start
    }

    /// First second after the run (exclusive; may be 86400).
    pub fn stop_second(&self) -> u32 {
        self.stop
    }

    pub fn duration_seconds(&self) -> u32 {
        self.stop - self.start
    }

    pub fn start_timestamp(&self) -> Timestamp {
        Timestamp::new(self.day, self.start).expect("start < stop <= 86400")
    }

    /// ISO 8601 instant of the interval start.
    pub fn start_iso8601(&self) -> String {
        iso8601(self.day, self.start)
    }

    /// ISO 8601 instant of the exclusive stop; second 86400 rolls over to
    /// midnight of the next day.
    pub fn stop_iso8601(&self) -> String {
        iso8601(self.day, self.stop)
    }
}

fn iso8601(day: NaiveDate, second: u32) -> String {
    let instant = day
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        + chrono::Duration::seconds(second as i64);
    instant.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Flicker-smoothing parameters, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebounceParams {
    /// OFF gaps strictly shorter than this, with ON on both sides, are
    /// merged into the surrounding run.
    pub min_gap_seconds: u32,
    /// ON runs strictly shorter than this (after gap merging) are dropped.
    pub min_len_seconds: u32,
}

impl Default for DebounceParams {
    fn default() -> Self {
        DebounceParams {
            min_gap_seconds: 60,
            min_len_seconds: 120,
        }
    }
}

/// Smooth one mask row: first merge interior OFF gaps shorter than
/// `min_gap`, then drop ON runs shorter than `min_len` — in that order, so a
/// run assembled by gap-merging is measured at its merged length.
pub fn debounce(row: &[bool], min_gap: u32, min_len: u32) -> Vec<bool> {
    let mut out = row.to_vec();
    // Pass 1: close short OFF gaps that are strictly between ON samples.
    let mut i = 0;
    while i < out.len() {
        if !out[i] && i > 0 && out[i - 1] {
            let gap_start = i;
            while i < out.len() && !out[i] {
                i += 1;
            }
            let gap_len = i - gap_start;
            let followed_by_on = i < out.len(); // out[i] is ON when in range
            if followed_by_on && (gap_len as u32) < min_gap {
                out[gap_start..i].fill(true);
            }
        } else {
            i += 1;
        }
    }
    // Pass 2: drop short ON runs.
    let mut i = 0;
    while i < out.len() {
        if out[i] {
            let run_start = i;
            while i < out.len() && out[i] {
                i += 1;
            }
            if ((i - run_start) as u32) < min_len {
                out[run_start..i].fill(false);
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Maximal ON runs of `row` as half-open `[start, stop)` pairs.
fn on_runs(row: &[bool]) -> Vec<(u32, u32)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &on) in row.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s as u32, i as u32));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s as u32, row.len() as u32));
    }
    runs
}

/// Debounce every row of a mask and enumerate the usage intervals of each
/// appliance, sorted by (start, appliance).
pub fn extract_usages(mask: &StateMask, params: DebounceParams) -> Vec<UsageInterval> {
    let day = mask.day();
    let rows: Vec<(ApplianceId, &[bool])> =
        mask.iter().map(|(id, row)| (id.clone(), row)).collect();
    let mut intervals: Vec<UsageInterval> = rows
        .par_iter()
        .flat_map_iter(|(id, row)| {
            let smoothed = debounce(row, params.min_gap_seconds, params.min_len_seconds);
            on_runs(&smoothed)
                .into_iter()
                .map(|(start, stop)| UsageInterval {
                    day,
                    appliance: id.clone(),
                    start,
                    stop,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    intervals.sort_by(|a, b| {
        (a.start, &a.appliance.name, a.stop).cmp(&(b.start, &b.appliance.name, b.stop))
    });
    intervals
}

/// Paint intervals back onto all-OFF rows — the inverse of extraction, used
/// to cross-check that nothing was lost or invented.
pub fn paint_intervals(
    intervals: &[UsageInterval],
    appliance: &ApplianceId,
    len: usize,
) -> Vec<bool> {
    let mut row = vec![false; len];
    for iv in intervals.iter().filter(|iv| &iv.appliance == appliance) {
        let stop = (iv.stop as usize).min(len);
        row[iv.start as usize..stop].fill(true);
    }
    row
}
