use alloc::format;
use serde::{Deserialize, Serialize};

use crate::scan::{CScanImage, VolumeScan};
use crate::{Error, Result};

/// Pixelwise `min(defect + noise, 1)`; mask, label and origin follow the
/// defect image.
pub fn superpose_clip(defect: &CScanImage, noise: &CScanImage) -> Result<CScanImage> {
    if !defect.same_shape(noise) {
        return Err(Error::dim(
            "superposed image",
            defect.pixels.len(),
            noise.pixels.len(),
        ));
    }
    defect.check_range()?;
    noise.check_range()?;
    let mut out = defect.clone();
    for (o, &n) in out.pixels.iter_mut().zip(&noise.pixels) {
        *o = (*o + n).min(1.0);
    }
    Ok(out)
}

/// Samplewise `min(defect + noise, 1)` over equally shaped volumes.
pub fn superpose_volume_clip(defect: &VolumeScan, noise: &VolumeScan) -> Result<VolumeScan> {
    if defect.dims() != noise.dims() {
        return Err(Error::dim(
            "superposed volume",
            defect.samples().len(),
            noise.samples().len(),
        ));
    }
    let mut out = defect.clone();
    for (o, &n) in out.samples_mut().iter_mut().zip(noise.samples()) {
        *o = (*o + n).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionMode {
    /// Compare the peak inside the defect mask with the peak outside it.
    #[default]
    PeakInMaskVsPeakOutside,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionPolicy {
    #[serde(default)]
    pub mode: RejectionMode,
    pub margin: f64,
}

impl Default for RejectionPolicy {
    fn default() -> Self {
        Self {
            mode: RejectionMode::default(),
            margin: 1.0,
        }
    }
}

impl RejectionPolicy {
    pub fn with_margin(margin: f64) -> Result<Self> {
        if !(margin >= 1.0) {
            return Err(Error::invalid(format!("rejection margin {margin} below 1")));
        }
        Ok(Self {
            mode: RejectionMode::default(),
            margin,
        })
    }
}

/// True when the image should be dropped: the brightest pixel outside the
/// mask, times the margin, reaches the brightest pixel inside it.
pub fn reject(img: &CScanImage, policy: &RejectionPolicy) -> Result<bool> {
    let RejectionMode::PeakInMaskVsPeakOutside = policy.mode;
    let (inside, outside) = img
        .masked_peaks()
        .ok_or_else(|| Error::invalid("rejection needs a defect mask"))?;
    Ok(outside as f64 * policy.margin >= inside as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::Label;
    use alloc::vec;

    fn img(v: &[f32]) -> CScanImage {
        CScanImage::new(2, 2, v.to_vec(), Label::Defective).unwrap()
    }

    #[test]
    fn clip_examples() {
        let d = img(&[0.7, 0.3, 0.0, 1.0]);
        assert_eq!(superpose_clip(&d, &img(&[0.0; 4])).unwrap(), d);
        let s = superpose_clip(&d, &img(&[0.5, 0.2, 0.25, 0.0])).unwrap();
        assert_eq!(s.pixels, vec![1.0, 0.5, 0.25, 1.0]);
        assert!(superpose_clip(&d, &CScanImage::filled(3, 3, 0.0, Label::Clean)).is_err());
    }

    #[test]
    fn reject_examples() {
        let mask = vec![true, true, false, false];
        let keep = img(&[0.9, 0.1, 0.3, 0.0]).with_mask(mask.clone()).unwrap();
        assert!(!reject(&keep, &RejectionPolicy::default()).unwrap());
        let drop = img(&[0.4, 0.1, 0.5, 0.0]).with_mask(mask).unwrap();
        assert!(reject(&drop, &RejectionPolicy::default()).unwrap());
        assert!(reject(&img(&[0.0; 4]), &RejectionPolicy::default()).is_err());
        assert!(RejectionPolicy::with_margin(0.5).is_err());
    }
}
