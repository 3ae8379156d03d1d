use alloc::vec;
use alloc::vec::Vec;

use super::model::{BackwardOpts, CnnModel, ReluMode};
use crate::{Error, Result};

/// Weight of the guided Grad-CAM term in the mixed image.
pub const MIX_WEIGHT: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub side: usize,
    /// Grad-CAM of the last conv layer, upsampled, in [0, 1].
    pub heatmap: Vec<f64>,
    pub guided_backprop: Vec<f64>,
    pub guided_gradcam: Vec<f64>,
    /// `minmax(1.5 * guided_gradcam + input)`.
    pub mixed: Vec<f64>,
}

/// Class activation map of conv layer `layer` for the defect logit,
/// nearest-neighbour upsampled to the input size and max-normalized.
pub fn grad_cam(model: &CnnModel, input: &[f64], layer: usize) -> Result<Vec<f64>> {
    if layer >= model.n_conv_layers() {
        return Err(Error::range(alloc::format!(
            "conv layer {layer} of {}",
            model.n_conv_layers()
        )));
    }
    let tr = model.trace(input)?;
    let back = model.backward(
        &tr,
        1.0,
        None,
        BackwardOpts {
            record_conv: true,
            ..BackwardOpts::default()
        },
    );
    let act = &tr.conv_act[layer];
    let grad = &back.conv_act_grads[layer];
    let side = model.input_side();
    let ls = side >> layer;
    let l2 = ls * ls;
    let channels = act.len() / l2;
    let mut cam = vec![0.0; l2];
    for k in 0..channels {
        let alpha = grad[k * l2..(k + 1) * l2].iter().sum::<f64>() / l2 as f64;
        for (c, a) in cam.iter_mut().zip(&act[k * l2..(k + 1) * l2]) {
            *c += alpha * a;
        }
    }
    let mut out = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            out[y * side + x] = cam[(y * ls / side) * ls + x * ls / side].max(0.0);
        }
    }
    let max = out.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut out {
            *v /= max;
        }
    }
    Ok(out)
}

/// Guided backpropagation, guided Grad-CAM and the mixed overlay image.
pub fn guided_gradcam(model: &CnnModel, input: &[f64]) -> Result<Explanation> {
    let heatmap = grad_cam(model, input, model.n_conv_layers() - 1)?;
    let tr = model.trace(input)?;
    let back = model.backward(
        &tr,
        1.0,
        None,
        BackwardOpts {
            mode: ReluMode::Guided,
            input_grad: true,
            record_conv: false,
        },
    );
    let guided_backprop = back.input_grad.unwrap_or_default();
    let guided_gradcam: Vec<f64> = guided_backprop.iter().zip(&heatmap).map(|(g, h)| g * h).collect();
    let mixed = minmax(
        guided_gradcam
            .iter()
            .zip(input)
            .map(|(g, x)| MIX_WEIGHT * g + x)
            .collect(),
    );
    Ok(Explanation {
        side: model.input_side(),
        heatmap,
        guided_backprop,
        guided_gradcam,
        mixed,
    })
}

/// Rescale to [0, 1]; a constant image maps to zeros.
pub fn minmax(mut v: Vec<f64>) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for x in &mut v {
        *x = if span > 0.0 { (*x - lo) / span } else { 0.0 };
    }
    v
}

/// Share of heatmap mass that falls inside `mask`; 0 for an empty map.
pub fn mask_coverage(heatmap: &[f64], mask: &[bool]) -> f64 {
    let total: f64 = heatmap.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let inside: f64 = heatmap.iter().zip(mask).filter(|(_, &m)| m).map(|(h, _)| h).sum();
    inside / total
}
