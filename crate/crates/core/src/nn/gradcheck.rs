//! Central finite-difference check of the analytic parameter gradient.

use alloc::vec;

use super::data::Samples;
use super::model::{CnnModel, Layer};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub n_params: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares every parameter's gradient of the mean loss over `idx` with
/// `(L(w + h) - L(w - h)) / 2h`. `floor` bounds the denominator so that
/// gradients near zero are judged by absolute error.
///
/// A pre-activation sitting exactly on a ReLU kink has no derivative; zero
/// biases over an all-zero receptive field do this at initialization, so
/// check at generic parameters (see [`jitter_biases`]).
pub fn gradient_check(
    model: &CnnModel,
    samples: &Samples,
    idx: &[usize],
    h: f64,
    floor: f64,
) -> Result<GradCheck> {
    if !(h > 0.0) || !(floor > 0.0) {
        return Err(Error::invalid("step and floor must be positive"));
    }
    let mut grads = vec![0.0; model.params().len()];
    model.loss_and_grad(samples, idx, &mut grads)?;
    let mut probe = model.clone();
    let mut out = GradCheck {
        n_params: grads.len(),
        max_rel_error: 0.0,
        worst_param: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (i, &g) in grads.iter().enumerate() {
        let w = model.params()[i];
        probe.params_mut()[i] = w + h;
        let up = probe.loss(samples, idx)?;
        probe.params_mut()[i] = w - h;
        let down = probe.loss(samples, idx)?;
        probe.params_mut()[i] = w;
        let numeric = (up - down) / (2.0 * h);
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(floor);
        if rel > out.max_rel_error || !rel.is_finite() {
            out = GradCheck {
                max_rel_error: rel,
                worst_param: i,
                analytic: g,
                numeric,
                ..out
            };
        }
    }
    Ok(out)
}

/// Replaces every bias with a draw from `U(-amplitude, amplitude)`.
pub fn jitter_biases(model: &mut CnnModel, amplitude: f64, rng: &mut Rng) {
    let ranges: alloc::vec::Vec<(usize, usize)> = model
        .layers()
        .iter()
        .map(|l| match *l {
            Layer::Conv { c_out, b_off, .. } => (b_off, b_off + c_out),
            Layer::Dense { n_out, b_off, .. } => (b_off, b_off + n_out),
        })
        .collect();
    for (lo, hi) in ranges {
        for b in &mut model.params_mut()[lo..hi] {
            *b = rng.uniform_in(-amplitude, amplitude);
        }
    }
}
