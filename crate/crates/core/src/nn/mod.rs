//! A small convolutional classifier with hand-written backpropagation.
//!
//! Each conv layer is a 3x3 convolution (stride 1, padding 1) followed by a
//! ReLU and a 2x2 max pool. The flattened features go through a fully
//! connected stack whose hidden widths shrink by `floor(F / L)` per layer,
//! ending in a single logit. All arithmetic is `f64`.

mod config;
mod data;
mod explain;
mod gradcheck;
mod model;
mod train;

pub use config::{fc_widths, CnnConfig, BATCH_SIZES};
pub use data::{label_of, Samples};
pub use explain::{grad_cam, guided_gradcam, mask_coverage, minmax, Explanation, MIX_WEIGHT};
pub use gradcheck::{gradient_check, jitter_biases, GradCheck};
pub use model::{
    bce_with_logit, build_model, sigmoid, BackwardOpts, BackwardOut, CnnModel, Layer, ReluMode, Trace,
};
pub use train::{
    confusion, fit, repeated_eval, run_rng, run_single, train, TrainReport, DECISION_THRESHOLD,
    VALIDATION_FRACTION,
};

/// Side of the model input in pixels.
pub const INPUT_SIDE: usize = crate::scan::IMAGE_SIDE;
