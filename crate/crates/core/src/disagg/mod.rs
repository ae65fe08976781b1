//! Supervised ON/OFF disaggregation of an aggregate power trace.
//!
//! Two interchangeable backends sit behind one train/predict contract: a
//! randomized decision forest ([`forest`]) and a per-appliance linear
//! max-margin classifier ([`margin`]). Both consume the feature vectors of
//! [`crate::features`] and emit one ON/OFF mask row per appliance.
//!
//! Training is deterministic: identical (data, config, seed) produce a
//! bit-identical model regardless of how many worker threads run, because
//! every randomized step draws from its own counter-derived stream rather
//! than from a shared generator.

pub mod forest;
pub mod margin;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{featurize, FeatureError, FeatureMatrix};
use crate::trace::{ApplianceId, PowerTrace, StateMask, TraceError};

pub use forest::ForestModel;
pub use margin::MarginModel;

/// Magic first line of a serialized model file.
const MODEL_MAGIC: &str = "NALM-MODEL 1";

#[derive(Debug, Error)]
pub enum DisaggError {
    #[error("labels cover {labels} samples but aggregate has {aggregate}")]
    LengthMismatch { labels: usize, aggregate: usize },
    #[error("no appliances to train on")]
    NoAppliances,
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("unknown backend '{0}' (expected 'forest' or 'margin')")]
    UnknownBackend(String),
    #[error("model file does not start with '{MODEL_MAGIC}'")]
    BadMagic,
    #[error("model was trained with window {model} but prediction requested width {requested}")]
    WindowMismatch { model: usize, requested: usize },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Which classifier family a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Forest,
    Margin,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Forest => "forest",
            BackendKind::Margin => "margin",
        })
    }
}

impl FromStr for BackendKind {
    type Err = DisaggError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forest" => Ok(BackendKind::Forest),
            "margin" => Ok(BackendKind::Margin),
            other => Err(DisaggError::UnknownBackend(other.to_string())),
        }
    }
}

/// Hyperparameters for both backends. Worker-thread count is deliberately
/// not part of the config: it must never influence results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub backend: BackendKind,
    /// Feature window width (odd).
    pub window_w: usize,
    /// Forest: number of trees per appliance.
    pub n_trees: usize,
    /// Forest: maximum tree depth.
    pub max_depth: usize,
    /// Forest: minimum training samples in a leaf.
    pub min_leaf: usize,
    /// Margin: passes over the shuffled training set.
    pub epochs: usize,
    /// Margin: SGD step size.
    pub learning_rate: f64,
    /// Margin: L2 penalty on the weight vector.
    pub regularization: f64,
    /// Weight samples inversely to their class frequency, so rarely-ON
    /// appliances are not drowned out by the OFF majority.
    pub balance_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            backend: BackendKind::Forest,
            window_w: 9,
            n_trees: 100,
            max_depth: 12,
            min_leaf: 5,
            epochs: 20,
            learning_rate: 0.01,
            regularization: 1e-4,
            balance_classes: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DisaggError> {
        let fail = |msg: &str| Err(DisaggError::BadConfig(msg.to_string()));
        if self.window_w == 0 || self.window_w % 2 == 0 {
            return fail("window_w must be odd and >= 1");
        }
        if self.n_trees == 0 {
            return fail("n_trees must be >= 1");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be >= 1");
        }
        if self.min_leaf == 0 {
            return fail("min_leaf must be >= 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be finite and > 0");
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return fail("regularization must be finite and >= 0");
        }
        Ok(())
    }
}

/// One appliance's trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ApplianceModel {
    Forest(ForestModel),
    Margin(MarginModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceEntry {
    pub id: ApplianceId,
    pub model: ApplianceModel,
}

/// A trained multi-appliance disaggregation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisaggModel {
    backend: BackendKind,
    window_w: usize,
    seed: u64,
    /// Sorted by appliance id; order is part of the serialized form.
    entries: Vec<ApplianceEntry>,
}

impl DisaggModel {
    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn window_w(&self) -> usize {
        self.window_w
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn appliances(&self) -> impl Iterator<Item = &ApplianceId> {
        self.entries.iter().map(|e| &e.id)
    }

    pub fn entries(&self) -> &[ApplianceEntry] {
        &self.entries
    }

    /// Serialize as a one-line magic header followed by JSON.
    pub fn to_bytes(&self) -> Result<Vec<u8>, DisaggError> {
        let mut out = format!("{MODEL_MAGIC}\n").into_bytes();
        out.extend(serde_json::to_vec(self)?);
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DisaggModel, DisaggError> {
        let text = std::str::from_utf8(bytes).map_err(|_| DisaggError::BadMagic)?;
        let body = text
            .strip_prefix(MODEL_MAGIC)
            .and_then(|rest| rest.strip_prefix('\n'))
            .ok_or(DisaggError::BadMagic)?;
        Ok(serde_json::from_str(body)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DisaggError> {
        Ok(std::fs::write(path, self.to_bytes()?)?)
    }

    pub fn load(path: &Path) -> Result<DisaggModel, DisaggError> {
        DisaggModel::from_bytes(&std::fs::read(path)?)
    }
}

/// 64-bit FNV-1a over a byte string.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive an independent RNG seed for one randomized step.
///
/// `scope` names the appliance, `stream` the step (tree index, or 0 for the
/// margin trainer). Hashing the triple means trees and appliances never share
/// a random stream, which is what makes thread count irrelevant.
pub(crate) fn stream_seed(seed: u64, scope: &str, stream: u64) -> u64 {
    let mut buf = Vec::with_capacity(16 + scope.len());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(scope.as_bytes());
    buf.extend_from_slice(&stream.to_le_bytes());
    fnv1a(&buf)
}

/// Per-class sample weights `(off, on)`.
///
/// With balancing, each class's total weight is the same: a class seen `k`
/// times out of `n` gets weight `n / (2k)`. Without balancing both are 1.
/// A class that never occurs keeps weight 1 (it has no samples to weight).
pub(crate) fn class_weights(labels: &[bool], balance: bool) -> (f64, f64) {
    if !balance {
        return (1.0, 1.0);
    }
    let n = labels.len() as f64;
    let on = labels.iter().filter(|&&l| l).count() as f64;
    let off = n - on;
    let w_off = if off > 0.0 { n / (2.0 * off) } else { 1.0 };
    let w_on = if on > 0.0 { n / (2.0 * on) } else { 1.0 };
    (w_off, w_on)
}

/// Train one model per appliance from an aggregate trace and per-appliance
/// ON/OFF labels aligned to it.
pub fn train(
    aggregate: &PowerTrace,
    labels: &StateMask,
    config: &TrainConfig,
    seed: u64,
) -> Result<DisaggModel, DisaggError> {
    config.validate()?;
    if labels.sample_len() != aggregate.len() {
        return Err(DisaggError::LengthMismatch {
            labels: labels.sample_len(),
            aggregate: aggregate.len(),
        });
    }
    if labels.len() == 0 {
        return Err(DisaggError::NoAppliances);
    }
    let features = featurize(aggregate.samples(), config.window_w)?;
    let rows: Vec<(ApplianceId, &[bool])> = labels
        .iter()
        .map(|(id, row)| (id.clone(), row))
        .collect();
    let entries: Vec<ApplianceEntry> = rows
        .par_iter()
        .map(|(id, row)| {
            let scope = id.to_string();
            let model = match config.backend {
                BackendKind::Forest => ApplianceModel::Forest(forest::train_forest(
                    &features, row, config, seed, &scope,
                )),
                BackendKind::Margin => ApplianceModel::Margin(margin::train_margin(
                    &features, row, config, seed, &scope,
                )),
            };
            ApplianceEntry {
                id: id.clone(),
                model,
            }
        })
        .collect();
    Ok(DisaggModel {
        backend: config.backend,
        window_w: config.window_w,
        seed,
        entries,
    })
}

/// Predict per-appliance ON/OFF states for every second of an aggregate
/// trace.
pub fn predict(model: &DisaggModel, aggregate: &PowerTrace) -> Result<StateMask, DisaggError> {
    let features = featurize(aggregate.samples(), model.window_w)?;
    let masks: Vec<(ApplianceId, Vec<bool>)> = model
        .entries
        .par_iter()
        .map(|entry| {
            let states = predict_rows(&entry.model, &features);
            (entry.id.clone(), states)
        })
        .collect();
    Ok(StateMask::new(aggregate.day(), masks)?)
}

fn predict_rows(model: &ApplianceModel, features: &FeatureMatrix) -> Vec<bool> {
    match model {
        ApplianceModel::Forest(f) => (0..features.n_rows())
            .into_par_iter()
            .map(|i| f.predict_row(features.row(i)))
            .collect(),
        ApplianceModel::Margin(m) => (0..features.n_rows())
            .into_par_iter()
            .map(|i| m.predict_row(features.row(i)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceOrigin;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 5, 6).unwrap()
    }

    /// A small two-appliance scene: A draws 400 W in the first half, B draws
    /// 1200 W in the second half, with mild noise.
    fn toy_scene(n: usize, noise: f64, rng_seed: u64) -> (PowerTrace, StateMask) {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let a_on: Vec<bool> = (0..n).map(|t| t < n / 2).collect();
        let b_on: Vec<bool> = (0..n).map(|t| t >= n / 2).collect();
        let samples: Vec<f64> = (0..n)
            .map(|t| {
                let mut w = 0.0;
                if a_on[t] {
                    w += 400.0;
                }
                if b_on[t] {
                    w += 1200.0;
                }
                if noise > 0.0 {
                    w += rng.gen_range(0.0..noise);
                }
                w
            })
            .collect();
        let agg = PowerTrace::partial(day(), TraceOrigin::Aggregate, samples).unwrap();
        let id_a = ApplianceId::new("A", "x").unwrap();
        let id_b = ApplianceId::new("B", "x").unwrap();
        let mask = StateMask::new(day(), vec![(id_a, a_on), (id_b, b_on)]).unwrap();
        (agg, mask)
    }

    fn small_config(backend: BackendKind) -> TrainConfig {
        TrainConfig {
            backend,
            window_w: 3,
            n_trees: 7,
            max_depth: 6,
            min_leaf: 2,
            epochs: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fnv1a_matches_published_vectors() {
        // Reference values for 64-bit FNV-1a.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn stream_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for stream in 0..200 {
            assert!(seen.insert(stream_seed(42, "A:x", stream)));
        }
        assert!(seen.insert(stream_seed(42, "B:x", 0)));
        assert!(seen.insert(stream_seed(43, "A:x", 0)));
        assert_eq!(stream_seed(7, "A:x", 3), stream_seed(7, "A:x", 3));
    }

    #[test]
    fn class_weights_are_inverse_frequency() {
        // 3 on out of 12: on weight 12/(2*3) = 2, off weight 12/(2*9) = 2/3.
        let labels: Vec<bool> = (0..12).map(|i| i < 3).collect();
        let (w_off, w_on) = class_weights(&labels, true);
        assert_eq!(w_on, 2.0);
        assert!((w_off - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(class_weights(&labels, false), (1.0, 1.0));
        // Equal classes weigh equally.
        let even: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert_eq!(class_weights(&even, true), (1.0, 1.0));
        // Single-class input must not divide by zero.
        let ones = vec![true; 5];
        let (w_off, w_on) = class_weights(&ones, true);
        assert!(w_off.is_finite() && w_on.is_finite());
    }

    #[test]
    fn both_backends_learn_a_toy_scene() {
        let (agg, mask) = toy_scene(600, 5.0, 1);
        for backend in [BackendKind::Forest, BackendKind::Margin] {
            let model = train(&agg, &mask, &small_config(backend), 99).unwrap();
            let pred = predict(&model, &agg).unwrap();
            for (id, truth) in mask.iter() {
                let got = pred.row(id).unwrap();
                let agree = truth.iter().zip(got).filter(|(a, b)| a == b).count();
                let acc = agree as f64 / truth.len() as f64;
                assert!(acc > 0.95, "{backend:?} {id} train accuracy {acc}");
            }
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (agg, mask) = toy_scene(300, 20.0, 2);
        for backend in [BackendKind::Forest, BackendKind::Margin] {
            let cfg = small_config(backend);
            let a = train(&agg, &mask, &cfg, 7).unwrap();
            let b = train(&agg, &mask, &cfg, 7).unwrap();
            assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap(), "{backend:?}");
            let c = train(&agg, &mask, &cfg, 8).unwrap();
            assert_ne!(
                a.to_bytes().unwrap(),
                c.to_bytes().unwrap(),
                "{backend:?} seed must matter"
            );
        }
    }

    #[test]
    fn training_is_invariant_to_thread_count() {
        let (agg, mask) = toy_scene(300, 20.0, 3);
        for backend in [BackendKind::Forest, BackendKind::Margin] {
            let cfg = small_config(backend);
            let single = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap()
                .install(|| train(&agg, &mask, &cfg, 11).unwrap());
            let many = rayon::ThreadPoolBuilder::new()
                .num_threads(4)
                .build()
                .unwrap()
                .install(|| train(&agg, &mask, &cfg, 11).unwrap());
            assert_eq!(
                single.to_bytes().unwrap(),
                many.to_bytes().unwrap(),
                "{backend:?}"
            );
        }
    }

    #[test]
    fn model_round_trips_through_bytes() {
        let (agg, mask) = toy_scene(200, 10.0, 4);
        for backend in [BackendKind::Forest, BackendKind::Margin] {
            let model = train(&agg, &mask, &small_config(backend), 5).unwrap();
            let bytes = model.to_bytes().unwrap();
            assert!(bytes.starts_with(b"NALM-MODEL 1\n"));
            let back = DisaggModel::from_bytes(&bytes).unwrap();
            assert_eq!(model, back);
            // And the reloaded model predicts identically.
            assert_eq!(
                predict(&model, &agg).unwrap(),
                predict(&back, &agg).unwrap()
            );
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(
            DisaggModel::from_bytes(b"NOPE 9\n{}"),
            Err(DisaggError::BadMagic)
        ));
    }

    #[test]
    fn mismatched_label_length_rejected() {
        let (agg, _) = toy_scene(100, 0.0, 5);
        let (_, short_mask) = toy_scene(50, 0.0, 5);
        assert!(matches!(
            train(&agg, &short_mask, &TrainConfig::default(), 1),
            Err(DisaggError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = TrainConfig::default();
        cfg.window_w = 4;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.n_trees = 0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn backend_kind_parses() {
        assert_eq!("forest".parse::<BackendKind>().unwrap(), BackendKind::Forest);
        assert_eq!("MARGIN".parse::<BackendKind>().unwrap(), BackendKind::Margin);
        assert!("svm".parse::<BackendKind>().is_err());
    }

    #[test]
    fn single_class_labels_train_without_panic() {
        let n = 120;
        let samples: Vec<f64> = (0..n).map(|t| (t % 7) as f64).collect();
        let agg = PowerTrace::partial(day(), TraceOrigin::Aggregate, samples).unwrap();
        let id = ApplianceId::new("Always-off", "x").unwrap();
        let mask = StateMask::new(day(), vec![(id.clone(), vec![false; n])]).unwrap();
        for backend in [BackendKind::Forest, BackendKind::Margin] {
            let model = train(&agg, &mask, &small_config(backend), 3).unwrap();
            let pred = predict(&model, &agg).unwrap();
            let on = pred.row(&id).unwrap().iter().filter(|&&b| b).count();
            assert_eq!(on, 0, "{backend:?} must predict the constant class");
        }
    }
}
