//! Binary classification metrics, averaged reports and image SNR.
//!
//! Orientation: rows are the truth, columns the prediction, and the positive
//! class is "defect". Counts are `f64` because reports average matrices over
//! repeated runs.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::scan::CScanImage;
use crate::stats::{mean, std_dev};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
}

impl ConfusionMatrix {
    pub fn new(tp: f64, fp: f64, fn_: f64, tn: f64) -> Result<Self> {
        let cm = Self { tp, fp, fn_, tn };
        if [tp, fp, fn_, tn].iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::range("confusion matrix entries must be finite and >= 0"));
        }
        Ok(cm)
    }

    /// Counts from predicted probabilities thresholded at `threshold`.
    pub fn from_predictions(probs: &[f64], truth: &[bool], threshold: f64) -> Self {
        let mut cm = Self::default();
        for (&p, &t) in probs.iter().zip(truth) {
            match (t, p >= threshold) {
                (true, true) => cm.tp += 1.0,
                (false, true) => cm.fp += 1.0,
                (true, false) => cm.fn_ += 1.0,
                (false, false) => cm.tn += 1.0,
            }
        }
        cm
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision_defined(&self) -> bool {
        self.tp + self.fp > 0.0
    }

    pub fn recall_defined(&self) -> bool {
        self.tp + self.fn_ > 0.0
    }

    /// Entrywise mean of several matrices.
    pub fn average(items: &[ConfusionMatrix]) -> Self {
        let n = items.len().max(1) as f64;
        let mut acc = Self::default();
        for c in items {
            acc.tp += c.tp;
            acc.fp += c.fp;
            acc.fn_ += c.fn_;
            acc.tn += c.tn;
        }
        Self {
            tp: acc.tp / n,
            fp: acc.fp / n,
            fn_: acc.fn_ / n,
            tn: acc.tn / n,
        }
    }
}

/// `tp / (tp + fp)`; 0 when nothing was predicted positive.
pub fn precision(cm: &ConfusionMatrix) -> f64 {
    if cm.precision_defined() {
        cm.tp / (cm.tp + cm.fp)
    } else {
        0.0
    }
}

/// `tp / (tp + fn)`; 0 when there are no positives.
pub fn recall(cm: &ConfusionMatrix) -> f64 {
    if cm.recall_defined() {
        cm.tp / (cm.tp + cm.fn_)
    } else {
        0.0
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let p = precision(cm);
    let r = recall(cm);
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if !(total > 0.0) {
        return Err(Error::Degenerate("accuracy of an empty confusion matrix".into()));
    }
    Ok((cm.tp + cm.tn) / total)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            std: std_dev(xs),
        }
    }
}

/// Metrics of one training run on the evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RunMetrics {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            confusion: cm,
            accuracy: accuracy(&cm)?,
            precision: precision(&cm),
            recall: recall(&cm),
            f1: f1(&cm),
        })
    }
}

/// Per-run metrics averaged over repeated fresh-initialization runs.
/// Each metric is computed per run and then averaged, so `f1.mean` is
/// generally not the F1 of `confusion`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub confusion: ConfusionMatrix,
    pub n_runs: usize,
    pub runs: Vec<RunMetrics>,
}

impl EvalReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Insufficient("report needs at least one run".into()));
        }
        let col = |f: fn(&RunMetrics) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
        let confusion =
            ConfusionMatrix::average(&runs.iter().map(|r| r.confusion).collect::<Vec<_>>());
        Ok(Self {
            accuracy: col(|r| r.accuracy),
            precision: col(|r| r.precision),
            recall: col(|r| r.recall),
            f1: col(|r| r.f1),
            confusion,
            n_runs: runs.len(),
            runs,
        })
    }
}

/// Peak inside the defect mask over mean outside it; `+inf` for a
/// zero-mean background.
pub fn snr(img: &CScanImage) -> Result<f64> {
    let mask = img
        .defect_mask
        .as_ref()
        .ok_or_else(|| Error::invalid("SNR needs a defect mask"))?;
    let mut peak = 0.0f64;
    let mut bg_sum = 0.0f64;
    let mut bg_n = 0usize;
    for (&p, &m) in img.pixels.iter().zip(mask) {
        if m {
            peak = peak.max(p as f64);
        } else {
            bg_sum += p as f64;
            bg_n += 1;
        }
    }
    if bg_n == 0 {
        return Err(Error::Degenerate("mask covers the whole image".into()));
    }
    let bg = bg_sum / bg_n as f64;
    Ok(if bg > 0.0 { peak / bg } else { f64::INFINITY })
}
