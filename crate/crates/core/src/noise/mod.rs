//! Statistical noise models and synthetic dataset assembly.
//!
//! Three methods turn clean simulated defect responses into noisy images:
//!
//! - real noise: pixelwise sum with measured defect-free C-scans;
//! - C-scan noise: i.i.d. shifted/scaled inverse-Gaussian pixels;
//! - A-scan noise: per-B-scan structural profile plus per-sample Gaussian
//!   noise, added to the gated volume before C-scan extraction.
//!
//! Every sum is clipped at 1 and images whose noise outshines the defect are
//! rejected (see [`RejectionPolicy`]).

mod ascan;
mod assemble;
mod invgauss;
mod savgol;
mod superpose;

pub use ascan::{
    decompose_bscan, fit_ascan_model, synth_ascan_noise_volume, synth_structural_profile,
    AScanNoiseModel,
};
pub use assemble::{
    defect_windows, make_dataset, noisy_clean_images, prepare_clean_volume, prepare_defect_volumes,
    DefectSource, DefectVolume, NoiseMethod, NoiseSource, NoisyClean, SynthOutcome,
};
pub use invgauss::{
    fit_invgauss, invgauss_cdf, invgauss_pdf, sample_invgauss, sample_invgauss_image,
    InvGaussParams, MIN_FIT_SAMPLES,
};
pub use savgol::{savgol_coefficients, savgol_filter, SavGol};
pub use superpose::{reject, superpose_clip, superpose_volume_clip, RejectionMode, RejectionPolicy};
