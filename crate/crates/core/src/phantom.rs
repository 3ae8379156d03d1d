//! Analytical flat-bottom-hole pulse-echo responses.
//!
//! Each A-scan is a sum of Gaussian-windowed tonebursts: the front-wall echo,
//! the back-wall echo and, under the hole footprint, the defect echo. The
//! defect amplitude tapers laterally as `exp(-2 (r/R)^2)` and decays with
//! depth by `10^(-att * depth / 20)`. There is no structural noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scan::{VolumeMeta, VolumeScan, ARRAY_ELEMENTS, IMAGE_SIDE};
use crate::sigproc::GateSpec;
use crate::{Error, Result};

pub const STUDY_DIAMETERS_MM: [f64; 3] = [3.0, 6.0, 9.0];
pub const STUDY_DEPTHS_MM: [f64; 5] = [1.5, 3.0, 4.5, 6.0, 7.5];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbhSpec {
    pub diameter_mm: f64,
    pub depth_mm: f64,
    /// `(element, b_scan)` in pixel units; fractional values allowed.
    pub center: (f64, f64),
}

impl FbhSpec {
    /// Hole centered on the 64 x 64 image.
    pub fn centered(diameter_mm: f64, depth_mm: f64) -> Self {
        let c = (IMAGE_SIDE as f64 - 1.0) / 2.0;
        Self {
            diameter_mm,
            depth_mm,
            center: (c, c),
        }
    }

    pub fn radius_mm(&self) -> f64 {
        self.diameter_mm / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseSpec {
    pub center_freq_hz: f64,
    /// The burst is windowed to `cycles` periods either side of its center.
    pub cycles: f64,
    pub envelope_sigma_samples: f64,
    pub attenuation_db_per_mm: f64,
    pub velocity_mm_per_us: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            center_freq_hz: 5.0e6,
            cycles: 3.0,
            envelope_sigma_samples: 10.0,
            attenuation_db_per_mm: 1.5,
            velocity_mm_per_us: 3.0,
        }
    }
}

impl PulseSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.center_freq_hz > 0.0 && self.center_freq_hz < sample_rate_hz / 2.0) {
            return Err(Error::invalid(format!(
                "center frequency {} Hz must lie in (0, Nyquist)",
                self.center_freq_hz
            )));
        }
        if !(self.attenuation_db_per_mm >= 0.0) {
            return Err(Error::invalid("attenuation must be non-negative"));
        }
        if !(self.velocity_mm_per_us > 0.0)
            || !(self.envelope_sigma_samples > 0.0)
            || !(self.cycles > 0.0)
        {
            return Err(Error::invalid(
                "velocity, envelope width and cycle count must be positive",
            ));
        }
        Ok(())
    }

    /// Unit-amplitude burst value at `tau` samples from its center.
    pub fn burst(&self, tau: f64, sample_rate_hz: f64) -> f64 {
        let period = sample_rate_hz / self.center_freq_hz;
        if tau.abs() > self.cycles * period {
            return 0.0;
        }
        let s = self.envelope_sigma_samples;
        libm::exp(-tau * tau / (2.0 * s * s)) * libm::cos(2.0 * PI * tau / period)
    }

    pub fn depth_gain(&self, depth_mm: f64) -> f64 {
        libm::pow(10.0, -self.attenuation_db_per_mm * depth_mm / 20.0)
    }
}

/// Acquisition and specimen geometry shared by a whole study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDims {
    pub n_bscans: usize,
    pub n_time: usize,
    pub sample_rate_hz: f64,
    pub element_pitch_mm: f64,
    pub scan_step_mm: f64,
    /// Arrival of the front-wall echo, in samples.
    pub t_front: f64,
    pub thickness_mm: f64,
    pub front_wall_amplitude: f64,
    pub back_wall_amplitude: f64,
    pub defect_reflectivity: f64,
    pub gate: GateSpec,
}

impl Default for SimDims {
    fn default() -> Self {
        Self {
            n_bscans: IMAGE_SIDE,
            n_time: 640,
            sample_rate_hz: 1.0e8,
            element_pitch_mm: 0.8,
            scan_step_mm: 0.8,
            t_front: 30.0,
            thickness_mm: 8.6,
            front_wall_amplitude: 1.0,
            back_wall_amplitude: 0.6,
            defect_reflectivity: 0.5,
            gate: GateSpec::new(80, 560, 5),
        }
    }
}

impl SimDims {
    /// Pulse-echo arrival time of a reflector at `depth_mm`.
    pub fn echo_time(&self, depth_mm: f64, pulse: &PulseSpec) -> f64 {
        let us_per_mm = 2.0 / pulse.velocity_mm_per_us;
        self.t_front + depth_mm * us_per_mm * self.sample_rate_hz * 1e-6
    }

    fn meta(&self) -> VolumeMeta {
        let mut m = VolumeMeta::acquisition(self.n_time);
        m.sample_rate_hz = self.sample_rate_hz as f32;
        m.element_pitch_mm = self.element_pitch_mm as f32;
        m.scan_step_mm = self.scan_step_mm as f32;
        m
    }

    pub fn validate(&self, pulse: &PulseSpec) -> Result<()> {
        pulse.validate(self.sample_rate_hz)?;
        if self.n_bscans < IMAGE_SIDE {
            return Err(Error::invalid(format!(
                "need at least {IMAGE_SIDE} B-scans, got {}",
                self.n_bscans
            )));
        }
        self.gate.validate(self.n_time)
    }
}

/// A simulated volume with the footprint of its hole.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomVolume {
    pub volume: VolumeScan,
    pub spec: FbhSpec,
    /// 64 x 64 footprint, row = element, column = B-scan.
    pub mask: Vec<bool>,
}

/// Lateral distance in mm of pixel `(element, bscan)` from the hole axis.
fn lateral_distance(spec: &FbhSpec, dims: &SimDims, element: usize, bscan: usize) -> f64 {
    let de = (element as f64 - spec.center.0) * dims.element_pitch_mm;
    let db = (bscan as f64 - spec.center.1) * dims.scan_step_mm;
    libm::sqrt(de * de + db * db)
}

/// Pixels with `r <= radius`.
pub fn defect_mask(spec: &FbhSpec, dims: &SimDims) -> Vec<bool> {
    let mut mask = vec![false; IMAGE_SIDE * IMAGE_SIDE];
    for e in 0..IMAGE_SIDE {
        for b in 0..IMAGE_SIDE {
            mask[e * IMAGE_SIDE + b] = lateral_distance(spec, dims, e, b) <= spec.radius_mm();
        }
    }
    mask
}

fn check_spec(spec: &FbhSpec, pulse: &PulseSpec, dims: &SimDims) -> Result<()> {
    if !(spec.diameter_mm > 0.0) || !(spec.depth_mm > 0.0) {
        return Err(Error::invalid("hole diameter and depth must be positive"));
    }
    let r_e = spec.radius_mm() / dims.element_pitch_mm;
    let r_b = spec.radius_mm() / dims.scan_step_mm;
    let hi = (IMAGE_SIDE - 1) as f64;
    let (ce, cb) = spec.center;
    if ce - r_e < 0.0 || ce + r_e > hi || cb - r_b < 0.0 || cb + r_b > hi {
        return Err(Error::range(format!(
            "{} mm hole at ({ce:.2}, {cb:.2}) overflows the {IMAGE_SIDE}x{IMAGE_SIDE} image",
            spec.diameter_mm
        )));
    }
    if spec.depth_mm >= dims.thickness_mm {
        return Err(Error::range(format!(
            "depth {} mm is not inside the {} mm specimen",
            spec.depth_mm, dims.thickness_mm
        )));
    }
    let t = dims.echo_time(spec.depth_mm, pulse);
    if t < dims.gate.front_wall_end as f64 || t >= dims.gate.back_wall_start as f64 {
        return Err(Error::range(format!(
            "depth {} mm echoes at sample {t:.1}, outside gate [{}, {})",
            spec.depth_mm, dims.gate.front_wall_end, dims.gate.back_wall_start
        )));
    }
    Ok(())
}

fn add_burst(trace: &mut [f32], pulse: &PulseSpec, fs: f64, center: f64, amplitude: f64) {
    if amplitude == 0.0 {
        return;
    }
    let half = pulse.cycles * fs / pulse.center_freq_hz;
    let lo = libm::floor(center - half).max(0.0) as usize;
    let hi = (libm::ceil(center + half) as usize + 1).min(trace.len());
    for (t, x) in trace.iter_mut().enumerate().take(hi).skip(lo) {
        *x += (amplitude * pulse.burst(t as f64 - center, fs)) as f32;
    }
}

fn walls(pulse: &PulseSpec, dims: &SimDims) -> Result<VolumeScan> {
    dims.validate(pulse)?;
    let mut v = VolumeScan::zeros(dims.n_bscans, dims.n_time, dims.meta())?;
    let fs = dims.sample_rate_hz;
    let t_back = dims.echo_time(dims.thickness_mm, pulse);
    let back_amp = dims.back_wall_amplitude * pulse.depth_gain(dims.thickness_mm);
    let mut template = vec![0.0f32; dims.n_time];
    add_burst(&mut template, pulse, fs, dims.t_front, dims.front_wall_amplitude);
    add_burst(&mut template, pulse, fs, t_back, back_amp);
    for b in 0..dims.n_bscans {
        for e in 0..ARRAY_ELEMENTS {
            v.trace_mut(b, e).copy_from_slice(&template);
        }
    }
    Ok(v)
}

/// Defect-free volume: wall echoes only.
pub fn clean_volume(pulse: &PulseSpec, dims: &SimDims) -> Result<VolumeScan> {
    walls(pulse, dims)
}

pub fn simulate_fbh_volume(
    spec: &FbhSpec,
    pulse: &PulseSpec,
    dims: &SimDims,
) -> Result<PhantomVolume> {
    dims.validate(pulse)?;
    check_spec(spec, pulse, dims)?;
    let mut volume = walls(pulse, dims)?;
    let fs = dims.sample_rate_hz;
    let t_defect = dims.echo_time(spec.depth_mm, pulse);
    let gain = dims.defect_reflectivity * pulse.depth_gain(spec.depth_mm);
    let radius = spec.radius_mm();
    for b in 0..IMAGE_SIDE {
        for e in 0..IMAGE_SIDE {
            let r = lateral_distance(spec, dims, e, b);
            if r <= radius {
                let taper = libm::exp(-2.0 * (r / radius) * (r / radius));
                add_burst(volume.trace_mut(b, e), pulse, fs, t_defect, gain * taper);
            }
        }
    }
    Ok(PhantomVolume {
        volume,
        spec: *spec,
        mask: defect_mask(spec, dims),
    })
}

/// One volume per `(diameter, depth)` cell, diameters outermost. Each
/// center is jittered uniformly by up to half a pixel along both axes.
pub fn parametric_study(
    diameters_mm: &[f64],
    depths_mm: &[f64],
    pulse: &PulseSpec,
    dims: &SimDims,
    rng: &mut Rng,
) -> Result<Vec<PhantomVolume>> {
    let mut out = Vec::with_capacity(diameters_mm.len() * depths_mm.len());
    for &d in diameters_mm {
        for &z in depths_mm {
            let mut spec = FbhSpec::centered(d, z);
            spec.center.0 += rng.uniform_in(-0.5, 0.5);
            spec.center.1 += rng.uniform_in(-0.5, 0.5);
            out.push(simulate_fbh_volume(&spec, pulse, dims)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dims() -> SimDims {
        SimDims::default()
    }

    #[test]
    fn nine_mm_footprint_spans_twelve_pixels() {
        let dims = small_dims();
        let spec = FbhSpec::centered(9.0, 1.5);
        let pv = simulate_fbh_volume(&spec, &PulseSpec::default(), &dims).unwrap();
        let row = 31;
        let span = (0..IMAGE_SIDE)
            .filter(|&b| pv.mask[row * IMAGE_SIDE + b])
            .count();
        assert_eq!(span, libm::ceil(9.0 / 0.8) as usize);
    }

    #[test]
    fn depth_outside_gate_is_rejected() {
        let mut dims = small_dims();
        dims.gate = GateSpec::new(80, 300, 5);
        let err = simulate_fbh_volume(&FbhSpec::centered(6.0, 7.5), &PulseSpec::default(), &dims);
        assert!(matches!(err, Err(Error::OutOfRange(_))));
    }

    #[test]
    fn footprint_overflow_is_rejected() {
        let mut spec = FbhSpec::centered(9.0, 3.0);
        spec.center = (2.0, 30.0);
        assert!(simulate_fbh_volume(&spec, &PulseSpec::default(), &small_dims()).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = FbhSpec::centered(6.0, 3.0);
        let a = simulate_fbh_volume(&spec, &PulseSpec::default(), &small_dims()).unwrap();
        let b = simulate_fbh_volume(&spec, &PulseSpec::default(), &small_dims()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn echo_time_is_linear_in_depth() {
        let dims = small_dims();
        let pulse = PulseSpec::default();
        let slope = 2.0 / pulse.velocity_mm_per_us * dims.sample_rate_hz * 1e-6;
        for z in STUDY_DEPTHS_MM {
            let t = dims.echo_time(z, &pulse);
            assert!((t - dims.t_front - slope * z).abs() < 1e-9);
        }
    }

    #[test]
    fn study_sizes() {
        let dims = small_dims();
        let pulse = PulseSpec::default();
        let mut rng = Rng::new(1);
        let s = parametric_study(&STUDY_DIAMETERS_MM, &STUDY_DEPTHS_MM, &pulse, &dims, &mut rng)
            .unwrap();
        assert_eq!(s.len(), 15);
        let five = [3.0, 4.0, 6.0, 7.0, 9.0];
        let s = parametric_study(&five, &STUDY_DEPTHS_MM, &pulse, &dims, &mut rng).unwrap();
        assert_eq!(s.len(), 25);
        let s = parametric_study(&five, &[], &pulse, &dims, &mut rng).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn clean_volume_has_walls_and_empty_interior() {
        let dims = small_dims();
        let pulse = PulseSpec::default();
        let v = clean_volume(&pulse, &dims).unwrap();
        let tr = v.trace(10, 20);
        // Wall bursts are windowed to +-cycles periods; only their far
        // Gaussian tails reach into the gate.
        let support = pulse.cycles * dims.sample_rate_hz / pulse.center_freq_hz;
        let t_back = dims.echo_time(dims.thickness_mm, &pulse);
        let lo = (dims.t_front + support) as usize + 1;
        let hi = (t_back - support) as usize;
        assert!(tr[lo..hi].iter().all(|&x| x == 0.0));
        let gated = &tr[dims.gate.front_wall_end..dims.gate.back_wall_start];
        assert!(gated.iter().all(|&x| x.abs() < 1e-4));
        let front = tr[dims.t_front as usize] as f64;
        assert!(front >= 0.9 * dims.front_wall_amplitude);
        assert_eq!(v, clean_volume(&pulse, &dims).unwrap());
    }

    #[test]
    fn deeper_holes_echo_weaker() {
        let dims = small_dims();
        let pulse = PulseSpec::default();
        let peaks: Vec<f64> = STUDY_DEPTHS_MM
            .iter()
            .map(|&z| {
                let pv = simulate_fbh_volume(&FbhSpec::centered(6.0, z), &pulse, &dims).unwrap();
                let t = dims.echo_time(z, &pulse);
                // Burst centers fall on whole samples for the default geometry.
                pv.volume.trace(31, 31)[libm::round(t) as usize] as f64
            })
            .collect();
        for w in peaks.windows(2) {
            assert!(w[1] < w[0], "{peaks:?}");
        }
    }
}
