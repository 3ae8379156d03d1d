//! Numerical core for generating and evaluating synthetic ultrasonic C-scan
//! defect datasets.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, the
//! command-line pipeline and any parallel drivers live in the `ultrasynth`
//! companion crate.
//!
//! Module map:
//!
//! - [`scan`]: volumes, C-scan images, datasets.
//! - [`rng`]: the single seeded generator used everywhere.
//! - [`sigproc`]: A-scan to C-scan chain (envelope, normalization, gating).
//! - [`phantom`]: analytical flat-bottom-hole pulse-echo responses.
//! - [`noise`]: the three statistical noise models and dataset assembly.
//! - [`nn`]: small CNN classifier, training and Grad-CAM.
//! - [`hpo`]: regularized evolution over CNN hyperparameters.
//! - [`metrics`]: confusion matrices, F1 and friends, SNR.
//! - [`gan`]: activation-map loss and combined generator loss.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fft;
pub mod gan;
pub mod hpo;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod phantom;
pub mod rng;
pub mod scan;
pub mod sigproc;
pub(crate) mod stats;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scan::{CScanImage, Dataset, Label, Provenance, VolumeMeta, VolumeScan};
