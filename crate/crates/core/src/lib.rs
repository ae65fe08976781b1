//! Appliance load monitoring toolkit.
//!
//! The crate covers the full pipeline from per-appliance electricity traces to
//! natural-language behavior reports:
//!
//! * [`trace`] — core time-series types, virtual smart-meter aggregation, and
//!   threshold-based ground-truth labeling.
//! * [`ingest`] — trace-file parsing and resampling onto the uniform 1 Hz day grid.
//! * [`features`] / [`disagg`] — feature extraction and the two supervised
//!   disaggregation backends (randomized forest, linear margin classifier).
//! * [`events`] — debouncing and usage-interval extraction from state masks.
//! * [`eval`] — confusion counting and the standard classification metrics.
//! * [`report`] — the behavior object model, its interchange document, and
//!   template-based report rendering.
//! * [`storage`] — a durable REST measurement store for smart-meter data.
//! * [`synth`] — seeded synthetic scenarios used by the test suites and demos.
//!
//! All operations are deterministic given a seed: identical inputs and
//! configuration produce byte-identical models, masks, metrics, and reports,
//! regardless of worker-thread count.

pub mod archive;
pub mod config;
pub mod disagg;
pub mod eval;
pub mod events;
pub mod features;
pub mod ingest;
pub mod report;
pub mod storage;
pub mod synth;
pub mod trace;

pub use trace::{ApplianceId, PowerTrace, StateMask, Timestamp, TraceSet, SECONDS_PER_DAY};
