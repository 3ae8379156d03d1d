//! Volumes, C-scan images and datasets.
//!
//! Amplitudes are stored as `f32`; all arithmetic elsewhere is `f64`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Elements of the linear array; also the width of every C-scan image.
pub const ARRAY_ELEMENTS: usize = 64;
/// Side of a square C-scan image in pixels.
pub const IMAGE_SIDE: usize = 64;
pub const DEFAULT_SAMPLE_RATE_HZ: f32 = 1.0e8;
pub const DEFAULT_ELEMENT_PITCH_MM: f32 = 0.8;
pub const DEFAULT_SCAN_STEP_MM: f32 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub sample_rate_hz: f32,
    pub element_pitch_mm: f32,
    pub scan_step_mm: f32,
    pub normalized: bool,
    /// Samples removed from the front by wall truncation.
    pub time_offset: u32,
    /// Samples the untruncated volume had along time.
    pub original_time_len: u32,
}

impl VolumeMeta {
    pub fn acquisition(n_time: usize) -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            element_pitch_mm: DEFAULT_ELEMENT_PITCH_MM,
            scan_step_mm: DEFAULT_SCAN_STEP_MM,
            normalized: false,
            time_offset: 0,
            original_time_len: n_time as u32,
        }
    }
}

/// Amplitude volume indexed `[b_scan][element][time]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeScan {
    n_bscans: usize,
    n_elements: usize,
    n_time: usize,
    samples: Vec<f32>,
    pub meta: VolumeMeta,
}

impl VolumeScan {
    /// The element count must equal [`ARRAY_ELEMENTS`]. The time axis only
    /// has to be non-empty: gated volumes are legitimately short.
    pub fn new(
        n_bscans: usize,
        n_elements: usize,
        n_time: usize,
        samples: Vec<f32>,
        meta: VolumeMeta,
    ) -> Result<Self> {
        if n_elements != ARRAY_ELEMENTS {
            return Err(Error::dim("volume element axis", ARRAY_ELEMENTS, n_elements));
        }
        if n_bscans == 0 || n_time == 0 {
            return Err(Error::invalid("volume axes must be non-empty"));
        }
        let expected = n_bscans * n_elements * n_time;
        if samples.len() != expected {
            return Err(Error::dim("volume payload", expected, samples.len()));
        }
        if meta.normalized && samples.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::range("normalized volume has samples outside [0, 1]"));
        }
        Ok(Self {
            n_bscans,
            n_elements,
            n_time,
            samples,
            meta,
        })
    }

    pub fn zeros(n_bscans: usize, n_time: usize, meta: VolumeMeta) -> Result<Self> {
        Self::new(
            n_bscans,
            ARRAY_ELEMENTS,
            n_time,
            vec![0.0; n_bscans * ARRAY_ELEMENTS * n_time],
            meta,
        )
    }

    /// `(b_scans, elements, time)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_bscans, self.n_elements, self.n_time)
    }

    pub fn n_bscans(&self) -> usize {
        self.n_bscans
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    #[inline]
    fn offset(&self, b: usize, e: usize) -> usize {
        (b * self.n_elements + e) * self.n_time
    }

    pub fn get(&self, b: usize, e: usize, t: usize) -> f32 {
        self.samples[self.offset(b, e) + t]
    }

    pub fn set(&mut self, b: usize, e: usize, t: usize, value: f32) {
        let o = self.offset(b, e);
        self.samples[o + t] = value;
    }

    /// The A-scan recorded by element `e` in B-scan `b`.
    pub fn trace(&self, b: usize, e: usize) -> &[f32] {
        let o = self.offset(b, e);
        &self.samples[o..o + self.n_time]
    }

    pub fn trace_mut(&mut self, b: usize, e: usize) -> &mut [f32] {
        let o = self.offset(b, e);
        let n = self.n_time;
        &mut self.samples[o..o + n]
    }

    /// All A-scans of B-scan `b`, element-major.
    pub fn bscan(&self, b: usize) -> &[f32] {
        let o = self.offset(b, 0);
        &self.samples[o..o + self.n_elements * self.n_time]
    }

    pub fn max_amplitude(&self) -> f32 {
        self.samples.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Defective,
    Clean,
}

impl Label {
    /// Classifier target: defect is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Defective => 1.0,
            Label::Clean => 0.0,
        }
    }
}

/// Parameters of the simulated defect an image was cut from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectOrigin {
    pub diameter_mm: f64,
    pub depth_mm: f64,
    pub center_element: f64,
    pub center_bscan: f64,
    /// Gate window index within the source volume.
    pub window: usize,
}

/// Single-channel amplitude image, row index = element, column = B-scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CScanImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
    /// `[start, end)` in samples of the untruncated volume.
    pub depth_gate: (u32, u32),
    pub label: Label,
    pub defect_mask: Option<Vec<bool>>,
    pub origin: Option<DefectOrigin>,
}

impl CScanImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>, label: Label) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::dim("image pixels", width * height, pixels.len()));
        }
        Ok(Self {
            width,
            height,
            pixels,
            depth_gate: (0, 0),
            label,
            defect_mask: None,
            origin: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32, label: Label) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            depth_gate: (0, 0),
            label,
            defect_mask: None,
            origin: None,
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.pixels.len() {
            return Err(Error::dim("defect mask", self.pixels.len(), mask.len()));
        }
        self.defect_mask = Some(mask);
        Ok(self)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn same_shape(&self, other: &CScanImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Fails on the first pixel outside `[0, 1]` (NaN included).
    pub fn check_range(&self) -> Result<()> {
        match self.pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            None => Ok(()),
            Some(i) => Err(Error::range(alloc::format!(
                "pixel {} = {} outside [0, 1]",
                i,
                self.pixels[i]
            ))),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    pub fn max(&self) -> f32 {
        self.pixels.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Peak inside and outside the defect mask, `None` without a mask.
    pub fn masked_peaks(&self) -> Option<(f32, f32)> {
        let mask = self.defect_mask.as_ref()?;
        let mut inside = 0.0f32;
        let mut outside = 0.0f32;
        for (&p, &m) in self.pixels.iter().zip(mask) {
            if m {
                inside = inside.max(p);
            } else {
                outside = outside.max(p);
            }
        }
        Some((inside, outside))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExperimentalAnalog,
    Simulated,
    Gan,
    RealNoise,
    CscanNoise,
    AscanNoise,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ExperimentalAnalog => "experimental-analog",
            Provenance::Simulated => "simulated",
            Provenance::Gan => "gan",
            Provenance::RealNoise => "real-noise",
            Provenance::CscanNoise => "cscan-noise",
            Provenance::AscanNoise => "ascan-noise",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<CScanImage>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Dataset {
    pub fn new(images: Vec<CScanImage>, provenance: Provenance, seed: u64) -> Result<Self> {
        if let Some(first) = images.first() {
            if let Some(bad) = images.iter().find(|im| !im.same_shape(first)) {
                return Err(Error::dim(
                    "dataset image size",
                    first.width * first.height,
                    bad.width * bad.height,
                ));
            }
        }
        Ok(Self {
            images,
            provenance,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.images.iter().filter(|im| im.label == label).count()
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "{} images ({} defective, {} clean), provenance {}",
            self.len(),
            self.count(Label::Defective),
            self.count(Label::Clean),
            self.provenance.as_str()
        )
    }
}
