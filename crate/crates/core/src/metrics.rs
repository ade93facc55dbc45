//! Binary classification metrics over thresholded link scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub r#fn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.r#fn
    }
}

/// Tallies predictions against 0/1 labels; a probability equal to the
/// threshold counts as positive.
pub fn confusion(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        let positive = p >= threshold;
        match (positive, y == 1.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.r#fn += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Which metrics hit a zero denominator and were reported as 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub accuracy_undefined: bool,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    pub flags: MetricFlags,
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

impl Metrics {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        let mut flags = MetricFlags::default();
        let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.r#fn as f64);
        let acc = ratio(tp + tn, c.total() as f64, &mut flags.accuracy_undefined);
        let precision = ratio(tp, tp + fp, &mut flags.precision_undefined);
        let recall = ratio(tp, tp + fn_, &mut flags.recall_undefined);
        let f1 = ratio(2.0 * precision * recall, precision + recall, &mut flags.f1_undefined);
        Self { acc, precision, recall, f1, counts: c, flags }
    }

    pub fn evaluate(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<Self> {
        Ok(Self::from_counts(confusion(predictions, labels, threshold)?))
    }
}
