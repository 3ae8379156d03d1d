//! A-scan to C-scan processing: zero-centering, Hilbert envelope, dataset
//! normalization, wall truncation and depth gating.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::Fft;
use crate::scan::{CScanImage, Label, VolumeScan, IMAGE_SIDE};
use crate::{Error, Result};

/// Time-sample gate between the front- and back-wall echoes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub front_wall_end: usize,
    pub back_wall_start: usize,
    #[serde(default = "default_window")]
    pub window_len: usize,
}

fn default_window() -> usize {
    5
}

impl GateSpec {
    pub fn new(front_wall_end: usize, back_wall_start: usize, window_len: usize) -> Self {
        Self {
            front_wall_end,
            back_wall_start,
            window_len,
        }
    }

    pub fn validate(&self, n_time: usize) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::invalid("gate window_len must be at least 1"));
        }
        if self.front_wall_end >= self.back_wall_start || self.back_wall_start > n_time {
            return Err(Error::invalid(format!(
                "gate ({}, {}) invalid for {} time samples",
                self.front_wall_end, self.back_wall_start, n_time
            )));
        }
        Ok(())
    }

    pub fn gated_len(&self) -> usize {
        self.back_wall_start - self.front_wall_end
    }

    pub fn n_windows(&self) -> usize {
        self.gated_len() / self.window_len
    }
}

pub fn zero_center(trace: &[f64]) -> Vec<f64> {
    let mean = crate::stats::mean(trace);
    trace.iter().map(|x| x - mean).collect()
}

/// Magnitude of the analytic signal.
///
/// Errors for traces shorter than four samples.
pub fn hilbert_envelope(trace: &[f64]) -> Result<Vec<f64>> {
    if trace.len() < 4 {
        return Err(Error::Insufficient(format!(
            "Hilbert envelope needs at least 4 samples, got {}",
            trace.len()
        )));
    }
    let plan = Fft::new(trace.len());
    let mut buf = Vec::with_capacity(trace.len());
    let mut out = vec![0.0; trace.len()];
    envelope_into(&plan, trace.iter().copied(), &mut buf, &mut out);
    Ok(out)
}

fn envelope_into(
    plan: &Fft,
    trace: impl Iterator<Item = f64>,
    buf: &mut Vec<Complex64>,
    out: &mut [f64],
) {
    let n = plan.len();
    buf.clear();
    buf.extend(trace.map(|x| Complex64::new(x, 0.0)));
    plan.forward(buf);
    // Keep DC (and Nyquist for even n) single, double positive bins, drop negative ones.
    let half = n / 2;
    let positive_end = if n % 2 == 0 { half } else { half + 1 };
    for x in buf.iter_mut().take(positive_end).skip(1) {
        *x *= 2.0;
    }
    for x in buf.iter_mut().skip(half + 1) {
        *x = Complex64::new(0.0, 0.0);
    }
    plan.inverse(buf);
    for (o, z) in out.iter_mut().zip(buf.iter()) {
        *o = z.norm();
    }
}

/// Zero-centers and envelopes every A-scan of a raw volume.
pub fn envelope_volume(v: &VolumeScan) -> Result<VolumeScan> {
    let (nb, ne, nt) = v.dims();
    if nt < 4 {
        return Err(Error::Insufficient(format!(
            "Hilbert envelope needs at least 4 samples, got {nt}"
        )));
    }
    let plan = Fft::new(nt);
    let mut out = v.clone();
    out.meta.normalized = false;
    let mut buf = Vec::with_capacity(nt);
    let mut env = vec![0.0; nt];
    for b in 0..nb {
        for e in 0..ne {
            let trace = v.trace(b, e);
            let mean = trace.iter().map(|&x| x as f64).sum::<f64>() / nt as f64;
            envelope_into(
                &plan,
                trace.iter().map(|&x| x as f64 - mean),
                &mut buf,
                &mut env,
            );
            for (d, &s) in out.trace_mut(b, e).iter_mut().zip(&env) {
                *d = s as f32;
            }
        }
    }
    Ok(out)
}

/// Scope of the max used for normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeScope {
    /// One global max across every volume of the dataset.
    #[default]
    PerDataset,
}

/// Divides every volume by the dataset-wide maximum.
pub fn normalize(volumes: Vec<VolumeScan>, scope: NormalizeScope) -> Result<Vec<VolumeScan>> {
    let NormalizeScope::PerDataset = scope;
    let max = volumes
        .iter()
        .map(|v| v.max_amplitude())
        .fold(f32::NEG_INFINITY, f32::max);
    normalize_by(volumes, max as f64)
}

/// Divides by an externally computed dataset max. Used when volumes were
/// truncated before the whole dataset's max was known: truncation does not
/// change sample values, so the result equals normalize-then-truncate.
pub fn normalize_by(mut volumes: Vec<VolumeScan>, max: f64) -> Result<Vec<VolumeScan>> {
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize dataset with max amplitude {max}"
        )));
    }
    for v in volumes.iter_mut() {
        if v.samples().iter().any(|&s| s < 0.0) {
            return Err(Error::range("normalize expects non-negative envelopes"));
        }
        for s in v.samples_mut() {
            // Division in f64 keeps the global max at exactly 1.
            *s = ((*s as f64) / max).min(1.0) as f32;
        }
        v.meta.normalized = true;
    }
    Ok(volumes)
}

/// Keeps samples `[front_wall_end, back_wall_start)`.
pub fn truncate_walls(v: &VolumeScan, g: &GateSpec) -> Result<VolumeScan> {
    let (nb, ne, nt) = v.dims();
    g.validate(nt)?;
    let len = g.gated_len();
    let mut samples = Vec::with_capacity(nb * ne * len);
    for b in 0..nb {
        for e in 0..ne {
            samples.extend_from_slice(&v.trace(b, e)[g.front_wall_end..g.back_wall_start]);
        }
    }
    let mut meta = v.meta;
    meta.time_offset += g.front_wall_end as u32;
    VolumeScan::new(nb, ne, len, samples, meta)
}

/// One C-scan per full window of `window_len` samples over a truncated
/// volume. Pixel `(row, col)` is the window max of element `row` in B-scan
/// `col`; only the first 64 elements and B-scans are imaged. A trailing
/// partial window is dropped.
pub fn extract_cscans(v: &VolumeScan, g: &GateSpec) -> Result<Vec<CScanImage>> {
    let (nb, ne, nt) = v.dims();
    if g.window_len == 0 {
        return Err(Error::invalid("gate window_len must be at least 1"));
    }
    if nt < g.window_len {
        return Err(Error::Insufficient(format!(
            "{nt} gated samples is fewer than one window of {}",
            g.window_len
        )));
    }
    if nb < IMAGE_SIDE || ne < IMAGE_SIDE {
        return Err(Error::dim("volume lateral size", IMAGE_SIDE, nb.min(ne)));
    }
    let n_windows = nt / g.window_len;
    let mut images: Vec<CScanImage> = (0..n_windows)
        .map(|k| {
            let mut im = CScanImage::filled(IMAGE_SIDE, IMAGE_SIDE, 0.0, Label::Clean);
            let start = v.meta.time_offset + (k * g.window_len) as u32;
            im.depth_gate = (start, start + g.window_len as u32);
            im
        })
        .collect();
    for b in 0..IMAGE_SIDE {
        for e in 0..IMAGE_SIDE {
            let trace = v.trace(b, e);
            for (k, im) in images.iter_mut().enumerate() {
                let w = &trace[k * g.window_len..(k + 1) * g.window_len];
                let peak = w.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                im.pixels[e * IMAGE_SIDE + b] = peak;
            }
        }
    }
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::VolumeMeta;
    use core::f64::consts::PI;

    fn volume_with(nb: usize, nt: usize, f: impl Fn(usize, usize, usize) -> f32) -> VolumeScan {
        let mut v = VolumeScan::zeros(nb, nt, VolumeMeta::acquisition(nt)).unwrap();
        for b in 0..nb {
            for e in 0..64 {
                for t in 0..nt {
                    v.set(b, e, t, f(b, e, t));
                }
            }
        }
        v
    }

    #[test]
    fn zero_center_examples() {
        assert_eq!(zero_center(&[5.0, 5.0, 5.0, 5.0]), vec![0.0; 4]);
        assert_eq!(zero_center(&[1.0, 3.0]), vec![-1.0, 1.0]);
        let n = 64;
        let sine: Vec<f64> = (0..n)
            .map(|i| libm::sin(2.0 * PI * 4.0 * i as f64 / n as f64))
            .collect();
        let shifted: Vec<f64> = sine.iter().map(|s| s + 0.2).collect();
        let c = zero_center(&shifted);
        for (a, b) in c.iter().zip(&sine) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(crate::stats::mean(&c).abs() < 1e-12);
    }

    #[test]
    fn envelope_rejects_short_traces() {
        assert!(hilbert_envelope(&[1.0, -1.0, 1.0]).is_err());
        assert_eq!(hilbert_envelope(&[0.0; 8]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn pure_tone_envelope_is_flat() {
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| libm::cos(2.0 * PI * 8.0 * i as f64 / n as f64))
            .collect();
        let env = hilbert_envelope(&x).unwrap();
        for &e in &env[10..n - 10] {
            assert!((e - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn odd_length_tone_envelope() {
        let n = 255;
        let x: Vec<f64> = (0..n)
            .map(|i| libm::cos(2.0 * PI * 8.0 * i as f64 / n as f64))
            .collect();
        let env = hilbert_envelope(&x).unwrap();
        for &e in &env[10..n - 10] {
            assert!((e - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn normalize_examples() {
        let v = volume_with(1, 4, |_, e, t| if e == 0 && t == 0 { 2.0 } else { 0.5 });
        let out = normalize(vec![v], NormalizeScope::PerDataset).unwrap();
        assert_eq!(out[0].get(0, 0, 0), 1.0);
        assert_eq!(out[0].get(0, 1, 1), 0.25);
        assert!(out[0].meta.normalized);

        let a = volume_with(1, 4, |_, _, _| 0.5);
        let b = volume_with(1, 4, |_, _, t| if t == 2 { 2.0 } else { 1.0 });
        let out = normalize(vec![a, b], NormalizeScope::PerDataset).unwrap();
        assert_eq!(out[0].get(0, 5, 1), 0.25);
        assert_eq!(out[1].get(0, 5, 2), 1.0);
        assert_eq!(out[1].get(0, 5, 0), 0.5);

        let z = volume_with(1, 4, |_, _, _| 0.0);
        assert!(normalize(vec![z], NormalizeScope::PerDataset).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let v = volume_with(2, 8, |b, e, t| ((b * 7 + e * 3 + t) % 11) as f32 * 0.3);
        let once = normalize(vec![v], NormalizeScope::PerDataset).unwrap();
        let twice = normalize(once.clone(), NormalizeScope::PerDataset).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn truncate_examples() {
        let v = volume_with(1, 128, |_, _, t| t as f32);
        let out = truncate_walls(&v, &GateSpec::new(10, 110, 5)).unwrap();
        assert_eq!(out.n_time(), 100);
        assert_eq!(out.get(0, 3, 0), 10.0);
        assert_eq!(out.meta.time_offset, 10);

        let id = truncate_walls(&v, &GateSpec::new(0, 128, 5)).unwrap();
        assert_eq!(id.samples(), v.samples());

        assert!(truncate_walls(&v, &GateSpec::new(50, 40, 5)).is_err());
        assert!(truncate_walls(&v, &GateSpec::new(0, 129, 5)).is_err());
        assert!(truncate_walls(&v, &GateSpec::new(0, 100, 0)).is_err());
    }

    #[test]
    fn single_hot_sample_lands_in_one_image() {
        let v = volume_with(64, 20, |b, e, t| {
            if (b, e, t) == (3, 7, 12) {
                0.9
            } else {
                0.0
            }
        });
        let images = extract_cscans(&v, &GateSpec::new(0, 20, 5)).unwrap();
        assert_eq!(images.len(), 4);
        for (k, im) in images.iter().enumerate() {
            for r in 0..64 {
                for c in 0..64 {
                    let want = if k == 2 && (r, c) == (7, 3) { 0.9 } else { 0.0 };
                    assert_eq!(im.get(r, c), want);
                }
            }
        }
        assert_eq!(images[2].depth_gate, (10, 15));
    }

    #[test]
    fn constant_volume_gives_constant_images_and_drops_partial_window() {
        let v = volume_with(64, 23, |_, _, _| 0.2);
        let images = extract_cscans(&v, &GateSpec::new(0, 23, 5)).unwrap();
        assert_eq!(images.len(), 4);
        assert!(images.iter().all(|im| im.pixels.iter().all(|&p| p == 0.2)));
        let short = volume_with(64, 3, |_, _, _| 0.2);
        assert!(extract_cscans(&short, &GateSpec::new(0, 3, 5)).is_err());
    }
}
