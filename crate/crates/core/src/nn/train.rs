use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::config::CnnConfig;
use super::data::Samples;
use super::model::CnnModel;
use crate::metrics::{ConfusionMatrix, EvalReport, RunMetrics};
use crate::rng::Rng;
use crate::{Error, Result};

/// Share of the training data held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each completed epoch.
    pub loss_curve: Vec<f64>,
    /// Validation loss per epoch; empty when early stopping is off.
    pub val_curve: Vec<f64>,
    pub stopped_epoch: u32,
    pub early_stopped: bool,
    pub params: Vec<f64>,
    pub seed: u64,
}

/// Mini-batch SGD with momentum on the mean binary cross-entropy. The model
/// keeps the weights of the last epoch run.
pub fn train(model: &mut CnnModel, data: &Samples, cfg: &CnnConfig, rng: &mut Rng) -> Result<TrainReport> {
    cfg.validate_trainable(model.input_side())?;
    if data.side() != model.input_side() {
        return Err(Error::dim("sample side", model.input_side(), data.side()));
    }
    if !data.has_both_classes() {
        return Err(Error::Insufficient("training data must contain both classes".into()));
    }
    let seed = rng.seed();
    let (mut train_idx, val_idx) = if cfg.early_stop > 0 {
        data.stratified_split(VALIDATION_FRACTION, rng)
    } else {
        ((0..data.len()).collect(), Vec::new())
    };
    if train_idx.is_empty() {
        return Err(Error::Insufficient("no training samples after holdout".into()));
    }
    let patience = if val_idx.is_empty() { 0 } else { cfg.early_stop };

    let n = model.params().len();
    let mut grads = vec![0.0; n];
    let mut velocity = vec![0.0; n];
    let lr = cfg.learning_rate;
    let m = cfg.momentum;
    let mut report = TrainReport {
        loss_curve: Vec::new(),
        val_curve: Vec::new(),
        stopped_epoch: 0,
        early_stopped: false,
        params: Vec::new(),
        seed,
    };
    let mut best_val = f64::INFINITY;
    let mut stale = 0u32;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut train_idx);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size as usize) {
            let loss = model.loss_and_grad(data, batch, &mut grads)?;
            epoch_loss += loss * batch.len() as f64;
            let p = model.params_mut();
            for ((w, v), g) in p.iter_mut().zip(&mut velocity).zip(&grads) {
                *v = m * *v - lr * g;
                *w += *v;
            }
        }
        epoch_loss /= train_idx.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "training loss diverged at epoch {}",
                epoch + 1
            )));
        }
        report.loss_curve.push(epoch_loss);
        report.stopped_epoch = epoch + 1;
        if patience > 0 {
            let val = model.loss(data, &val_idx)?;
            report.val_curve.push(val);
            if val < best_val {
                best_val = val;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    report.early_stopped = true;
                    break;
                }
            }
        }
    }
    report.params = model.params().to_vec();
    Ok(report)
}

/// Build a fresh model from `rng` and train it.
pub fn fit(cfg: &CnnConfig, data: &Samples, rng: &mut Rng) -> Result<(CnnModel, TrainReport)> {
    let mut model = CnnModel::build(cfg, data.side(), rng)?;
    let report = train(&mut model, data, cfg, rng)?;
    Ok((model, report))
}

/// Confusion matrix of `model` on `test` at the 0.5 threshold.
pub fn confusion(model: &CnnModel, test: &Samples) -> Result<ConfusionMatrix> {
    let probs = model.predict_all(test)?;
    Ok(ConfusionMatrix::from_predictions(
        &probs,
        &test.truth(),
        DECISION_THRESHOLD,
    ))
}

/// One fresh-initialization run: train on `train`, score on `test`.
pub fn run_single(train_set: &Samples, test: &Samples, cfg: &CnnConfig, rng: &mut Rng) -> Result<RunMetrics> {
    let (model, _) = fit(cfg, train_set, rng)?;
    RunMetrics::from_confusion(confusion(&model, test)?)
}

/// Random stream of run `run` in a repeated evaluation seeded by `base`.
pub fn run_rng(base: u64, run: usize) -> Rng {
    Rng::stream(base, run as u64)
}

/// `n_runs` independent trainings scored on `test`, averaged per metric.
pub fn repeated_eval(
    train_set: &Samples,
    test: &Samples,
    cfg: &CnnConfig,
    n_runs: usize,
    rng: &mut Rng,
) -> Result<EvalReport> {
    if n_runs == 0 {
        return Err(Error::invalid("n_runs must be >= 1"));
    }
    let base = rng.fork().seed();
    let runs = (0..n_runs)
        .map(|r| run_single(train_set, test, cfg, &mut run_rng(base, r)))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_runs(runs)
}
