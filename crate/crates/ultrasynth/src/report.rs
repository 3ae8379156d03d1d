//! Evaluation reports: JSON, an aligned text table and a bar chart.

use std::fmt::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use ultrasynth_core::metrics::EvalReport;
use ultrasynth_core::nn::CnnConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub train: Vec<PathBuf>,
    pub n_train: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEvalReport {
    pub format: String,
    pub seed: u64,
    pub cnn: CnnConfig,
    pub n_runs: usize,
    pub test: Vec<PathBuf>,
    pub n_test: usize,
    pub experiments: Vec<ExperimentReport>,
}

/// One row per experiment: mean (std) of accuracy, F1, precision, recall.
pub fn metrics_table(experiments: &[ExperimentReport]) -> String {
    let name_w = experiments
        .iter()
        .map(|e| e.name.len())
        .max()
        .unwrap_or(0)
        .max("Dataset".len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<name_w$}  {:>15}  {:>15}  {:>15}  {:>15}",
        "Dataset", "Accuracy", "F1", "Precision", "Recall"
    );
    for e in experiments {
        let r = &e.report;
        let cell = |m: &ultrasynth_core::metrics::MeanStd| format!("{:.3} ({:.3})", m.mean, m.std);
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>15}  {:>15}  {:>15}  {:>15}",
            e.name,
            cell(&r.accuracy),
            cell(&r.f1),
            cell(&r.precision),
            cell(&r.recall)
        );
    }
    s
}

/// Bar heights for [`crate::png_io::bar_chart_png`]: one series per
/// experiment over (accuracy, F1, precision, recall).
pub fn bar_series(experiments: &[ExperimentReport]) -> Vec<Vec<f64>> {
    experiments
        .iter()
        .map(|e| {
            let r = &e.report;
            vec![r.accuracy.mean, r.f1.mean, r.precision.mean, r.recall.mean]
        })
        .collect()
}
