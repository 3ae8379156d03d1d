//! File formats, parallel evaluation and the command-line pipeline built
//! on `ultrasynth-core`.
//!
//! - [`volume_io`]: binary volume files with a JSON sidecar.
//! - [`dataset_io`]: dataset directories (`images.bin` + `manifest.json`).
//! - [`png_io`]: grayscale exports, triptychs, histograms, bar charts.
//! - [`checkpoint`]: CNN weights.
//! - [`golden`]: golden loss vectors.
//! - [`config`]: TOML pipeline config with `key=value` overrides.
//! - [`pipeline`]: the commands behind the `ultrasynth` binary.

pub mod checkpoint;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod golden;
pub mod parallel;
pub mod pipeline;
pub mod png_io;
pub mod report;
pub mod volume_io;

pub use config::PipelineConfig;
pub use error::{Error, Result};
