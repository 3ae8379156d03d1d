//! A-scan level noise: a structural profile shared by all A-scans of a
//! B-scan plus independent per-sample Gaussian noise.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use super::savgol::{savgol_filter, SavGol};
use crate::rng::Rng;
use crate::scan::{VolumeMeta, VolumeScan, ARRAY_ELEMENTS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AScanNoiseModel {
    /// Mean over B-scans of the per-B-scan structural profiles.
    pub mean_structural: Vec<f64>,
    #[serde(rename = "sigma_s")]
    pub structural_dev_sigma: f64,
    #[serde(rename = "sigma_r")]
    pub random_sigma: f64,
    /// `None` disables smoothing of synthesized structural profiles.
    pub savgol: Option<SavGol>,
}

impl AScanNoiseModel {
    pub const MEASURED_RANDOM_SIGMA: f64 = 0.013;
    pub const MEASURED_STRUCTURAL_SIGMA: f64 = 0.003;

    pub fn validate(&self) -> Result<()> {
        if !(self.structural_dev_sigma >= 0.0) || !(self.random_sigma >= 0.0) {
            return Err(Error::invalid("noise sigmas must be non-negative"));
        }
        if self.mean_structural.is_empty() {
            return Err(Error::invalid("structural profile is empty"));
        }
        if let Some(sg) = self.savgol {
            sg.validate()?;
            if sg.window > self.mean_structural.len() {
                return Err(Error::invalid(format!(
                    "Savitzky-Golay window {} exceeds profile length {}",
                    sg.window,
                    self.mean_structural.len()
                )));
            }
        }
        Ok(())
    }

    /// Stand-in for a model fitted to a measured defect-free panel:
    /// backscatter ripple at the ply spacing over a slowly decaying floor,
    /// with the measured deviation and random-noise sigmas. Deviations are
    /// left unsmoothed so a refit recovers those sigmas.
    pub fn reference(n_time: usize) -> Self {
        // 0.25 mm plies at 3 mm/us, 100 MHz: ~16.7 samples per round trip.
        let ply_period = 16.7;
        let mean_structural = (0..n_time)
            .map(|t| {
                let t = t as f64;
                let ripple = libm::cos(PI * t / ply_period);
                0.012 + 0.010 * ripple * ripple * (0.6 + 0.4 * libm::exp(-t / 300.0))
            })
            .collect();
        Self {
            mean_structural,
            structural_dev_sigma: Self::MEASURED_STRUCTURAL_SIGMA,
            random_sigma: Self::MEASURED_RANDOM_SIGMA,
            savgol: None,
        }
    }

    /// Zero-amplitude model of the given length.
    pub fn silent(n_time: usize) -> Self {
        Self {
            mean_structural: alloc::vec![0.0; n_time],
            structural_dev_sigma: 0.0,
            random_sigma: 0.0,
            savgol: None,
        }
    }

    /// All amplitudes multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mean_structural: self.mean_structural.iter().map(|m| m * k).collect(),
            structural_dev_sigma: self.structural_dev_sigma * k,
            random_sigma: self.random_sigma * k,
            savgol: self.savgol,
        }
    }
}

/// Splits one B-scan (element-major rows of `n_time` samples) into its
/// across-element mean and the per-A-scan residuals around it.
pub fn decompose_bscan(bscan: &[f32], n_time: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_time == 0 || bscan.len() % n_time != 0 {
        return Err(Error::dim("B-scan samples", n_time, bscan.len()));
    }
    let n_el = bscan.len() / n_time;
    if n_el < 2 {
        return Err(Error::Insufficient(
            "structural decomposition needs at least 2 A-scans".into(),
        ));
    }
    let mut structural = alloc::vec![0.0f64; n_time];
    for row in bscan.chunks_exact(n_time) {
        for (s, &x) in structural.iter_mut().zip(row) {
            *s += x as f64;
        }
    }
    for s in structural.iter_mut() {
        *s /= n_el as f64;
    }
    let residuals = bscan
        .chunks_exact(n_time)
        .flat_map(|row| row.iter().zip(&structural).map(|(&x, s)| x as f64 - s))
        .collect();
    Ok((structural, residuals))
}

/// Fits the noise model to defect-free gated volumes.
///
/// `random_sigma` pools residuals over every B-scan with one degree of
/// freedom removed per `(B-scan, sample)`. `structural_dev_sigma` is the
/// pooled deviation of each B-scan's profile from the mean profile, with
/// the random-noise share that survives element averaging
/// (`random_sigma^2 / n_elements`) subtracted, floored at zero.
pub fn fit_ascan_model(volumes: &[VolumeScan], savgol: Option<SavGol>) -> Result<AScanNoiseModel> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::Insufficient("no volumes to fit".into()))?;
    let n_time = first.n_time();
    let n_el = first.n_elements();
    let mut profiles: Vec<Vec<f64>> = Vec::new();
    let mut residual_ss = 0.0;
    for v in volumes {
        if v.n_time() != n_time {
            return Err(Error::dim("volume time axis", n_time, v.n_time()));
        }
        for b in 0..v.n_bscans() {
            let (s, r) = decompose_bscan(v.bscan(b), n_time)?;
            residual_ss += r.iter().map(|x| x * x).sum::<f64>();
            profiles.push(s);
        }
    }
    let n_b = profiles.len();
    if n_b < 2 {
        return Err(Error::Insufficient(
            "noise model fit needs at least 2 B-scans".into(),
        ));
    }
    let random_var = residual_ss / (n_b * n_time * (n_el - 1)) as f64;
    let mut mean = alloc::vec![0.0; n_time];
    for p in &profiles {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n_b as f64;
    }
    let dev_ss: f64 = profiles
        .iter()
        .flat_map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)))
        .sum();
    let dev_var = dev_ss / ((n_b - 1) * n_time) as f64;
    let structural_var = (dev_var - random_var / n_el as f64).max(0.0);
    let model = AScanNoiseModel {
        mean_structural: mean,
        structural_dev_sigma: libm::sqrt(structural_var),
        random_sigma: libm::sqrt(random_var),
        savgol,
    };
    model.validate()?;
    Ok(model)
}

/// A fresh structural profile: mean plus per-sample normal deviation,
/// smoothed, clamped at zero.
pub fn synth_structural_profile(m: &AScanNoiseModel, rng: &mut Rng) -> Result<Vec<f64>> {
    m.validate()?;
    let raw: Vec<f64> = m
        .mean_structural
        .iter()
        .map(|&mu| {
            if m.structural_dev_sigma > 0.0 {
                rng.normal(mu, m.structural_dev_sigma)
            } else {
                mu
            }
        })
        .collect();
    let smooth = match m.savgol {
        Some(sg) => savgol_filter(&raw, sg.window, sg.order)?,
        None => raw,
    };
    Ok(smooth.into_iter().map(|x| x.max(0.0)).collect())
}

/// Noise volume: one structural profile per B-scan shared by its A-scans,
/// then i.i.d. `N(0, random_sigma)` per sample, clamped at zero.
pub fn synth_ascan_noise_volume(
    m: &AScanNoiseModel,
    n_bscans: usize,
    rng: &mut Rng,
) -> Result<VolumeScan> {
    let n_time = m.mean_structural.len();
    let mut v = VolumeScan::zeros(n_bscans, n_time, VolumeMeta::acquisition(n_time))?;
    for b in 0..n_bscans {
        let profile = synth_structural_profile(m, rng)?;
        for e in 0..ARRAY_ELEMENTS {
            for (x, &s) in v.trace_mut(b, e).iter_mut().zip(&profile) {
                let value = if m.random_sigma > 0.0 {
                    rng.normal(s, m.random_sigma)
                } else {
                    s
                };
                *x = value.max(0.0) as f32;
            }
        }
    }
    Ok(v)
}
