//! Repeated evaluation across threads. Run `r` uses the same random stream
//! as the sequential version in the core crate, so results are identical.

use rayon::prelude::*;
use ultrasynth_core::metrics::{EvalReport, RunMetrics};
use ultrasynth_core::nn::{confusion, fit, run_rng, CnnConfig, CnnModel, Samples};
use ultrasynth_core::{Error as CoreError, Rng};

use crate::error::Result;

pub struct EvalOutcome {
    pub report: EvalReport,
    /// The model trained in run 0.
    pub first_model: CnnModel,
    /// Seed of run 0's stream, recorded in its checkpoint.
    pub first_seed: u64,
}

pub fn repeated_eval(
    train: &Samples,
    test: &Samples,
    cfg: &CnnConfig,
    n_runs: usize,
    rng: &mut Rng,
) -> Result<EvalOutcome> {
    if n_runs == 0 {
        return Err(CoreError::InvalidParameter("n_runs must be >= 1".into()).into());
    }
    let base = rng.fork().seed();
    let runs: Vec<(RunMetrics, Option<CnnModel>)> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let (model, _) = fit(cfg, train, &mut run_rng(base, r))?;
            let m = RunMetrics::from_confusion(confusion(&model, test)?)?;
            Ok((m, (r == 0).then_some(model)))
        })
        .collect::<std::result::Result<_, CoreError>>()?;
    let mut first_model = None;
    let mut metrics = Vec::with_capacity(n_runs);
    for (m, model) in runs {
        metrics.push(m);
        if model.is_some() {
            first_model = model;
        }
    }
    Ok(EvalOutcome {
        report: EvalReport::from_runs(metrics)?,
        first_model: first_model.expect("run 0 always returns its model"),
        first_seed: run_rng(base, 0).seed(),
    })
}
