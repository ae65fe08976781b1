//! Confusion counting and classification metrics.
//!
//! Counting compares a predicted [`StateMask`] against ground truth second
//! by second, per appliance, plus an overall row summed across appliances.
//! Metrics are the standard closed forms over those counts; any 0/0 ratio is
//! defined as 0 and flagged degenerate so report tables stay total.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ApplianceId, StateMask};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("masks disagree on appliances: {0}")]
    ApplianceMismatch(String),
    #[error("masks disagree on sample count: predicted {pred}, truth {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("appliance sample totals differ: expected {expected}, {appliance} has {actual}")]
    UnequalTotals {
        appliance: String,
        expected: u64,
        actual: u64,
    },
    #[error("cannot compute metrics over all-zero counts")]
    EmptyCounts,
}

/// Per-appliance tallies of second-level agreement between prediction and
/// truth. ON is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, true_neg: u64, false_neg: u64) -> ConfusionCounts {
        ConfusionCounts {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.true_neg += other.true_neg;
        self.false_neg += other.false_neg;
    }
}

/// The five metrics, each in [0, 1]. `degenerate` is set when any ratio had
/// a zero denominator and was defined to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub accuracy: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// Compute the metric closed forms:
/// precision = tp/(tp+fp), accuracy = (tp+tn)/total, tpr = tp/(tp+fn),
/// tnr = tn/(tn+fp), f1 = 2tp/(2tp+fp+fn).
pub fn metrics(c: &ConfusionCounts) -> Result<MetricSet, EvalError> {
    if c.total() == 0 {
        return Err(EvalError::EmptyCounts);
    }
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| -> f64 {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos);
    let accuracy = ratio(c.true_pos + c.true_neg, c.total());
    let tpr = ratio(c.true_pos, c.true_pos + c.false_neg);
    let tnr = ratio(c.true_neg, c.true_neg + c.false_pos);
    let f1 = ratio(2 * c.true_pos, 2 * c.true_pos + c.false_pos + c.false_neg);
    Ok(MetricSet {
        precision,
        accuracy,
        tpr,
        tnr,
        f1,
        degenerate,
    })
}

/// Per-appliance confusion counts plus their overall sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_appliance: BTreeMap<ApplianceId, ConfusionCounts>,
    pub overall: ConfusionCounts,
}

/// Count agreement between predicted and true masks. Both masks must cover
/// the same appliances and the same number of seconds; every appliance must
/// contribute the same sample total (an internal-consistency assertion).
pub fn confusion(pred: &StateMask, truth: &StateMask) -> Result<Evaluation, EvalError> {
    if pred.sample_len() != truth.sample_len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.sample_len(),
            truth: truth.sample_len(),
        });
    }
    let pred_ids: Vec<&ApplianceId> = pred.iter().map(|(id, _)| id).collect();
    let truth_ids: Vec<&ApplianceId> = truth.iter().map(|(id, _)| id).collect();
    if pred_ids != truth_ids {
        let names = |ids: &[&ApplianceId]| {
            ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(",")
        };
        return Err(EvalError::ApplianceMismatch(format!(
            "predicted [{}] vs truth [{}]",
            names(&pred_ids),
            names(&truth_ids)
        )));
    }
    let mut per_appliance = BTreeMap::new();
    let mut overall = ConfusionCounts::default();
    let mut expected_total: Option<u64> = None;
    for (id, pred_row) in pred.iter() {
        let truth_row = truth.row(id).expect("ids checked equal");
        let mut c = ConfusionCounts::default();
        for (&p, &t) in pred_row.iter().zip(truth_row) {
            match (p, t) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        let total = c.total();
        match expected_total {
            None => expected_total = Some(total),
            Some(expected) if expected != total => {
                return Err(EvalError::UnequalTotals {
                    appliance: id.to_string(),
                    expected,
                    actual: total,
                })
            }
            Some(_) => {}
        }
        overall.add(&c);
        per_appliance.insert(id.clone(), c);
    }
    Ok(Evaluation {
        per_appliance,
        overall,
    })
}

/// Render labeled metric rows as a fixed-width text table, values to three
/// decimals (presentation only; stored metrics keep full precision).
pub fn format_table(rows: &[(String, MetricSet)]) -> String {
    let name_width = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once("Appliance".len()))
        .max()
        .unwrap_or(9);
    let mut out = format!(
        "{:<name_width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "Appliance", "Prec.", "Acc.", "TPR", "TNR", "F1"
    );
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<name_width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}\n",
            name, m.precision, m.accuracy, m.tpr, m.tnr, m.f1
        ));
    }
    out
}

/// Machine-readable export: one CSV row per label, full precision.
pub fn metrics_csv(rows: &[(String, MetricSet)]) -> String {
    let mut out = String::from("appliance,precision,accuracy,tpr,tnr,f1,degenerate\n");
    for (name, m) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            name, m.precision, m.accuracy, m.tpr, m.tnr, m.f1, m.degenerate
        ));
    }
    out
}

/// The per-appliance rows of an evaluation plus the overall row, in display
/// order, ready for [`format_table`] / [`metrics_csv`].
pub fn metric_rows(eval: &Evaluation) -> Result<Vec<(String, MetricSet)>, EvalError> {
    let mut rows = Vec::with_capacity(eval.per_appliance.len() + 1);
    for (id, counts) in &eval.per_appliance {
        rows.push((id.name.clone(), metrics(counts)?));
    }
    rows.push(("Overall".to_string(), metrics(&eval.overall)?));
    Ok(rows)
}

/// Metric rows from pre-counted labels (e.g. a parsed counts file): one row
/// per label in input order, closed by their `Overall` sum row.
pub fn metric_rows_from_counts(
    rows: &[(String, ConfusionCounts)],
) -> Result<Vec<(String, MetricSet)>, EvalError> {
    let mut out = Vec::with_capacity(rows.len() + 1);
    let mut overall = ConfusionCounts::default();
    for (name, counts) in rows {
        out.push((name.clone(), metrics(counts)?));
        overall.add(counts);
    }
    out.push(("Overall".to_string(), metrics(&overall)?));
    Ok(out)
}
