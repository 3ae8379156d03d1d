//! Shifted and scaled inverse-Gaussian noise.
//!
//! With `y = (x - loc) / scale` the density is
//! `f(y; mu) / scale`, `f(y; mu) = exp(-(y - mu)^2 / (2 y mu^2)) / sqrt(2 pi y^3)`:
//! an inverse Gaussian with mean `mu` and unit shape.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scan::{CScanImage, Label};
use crate::stats::normal_cdf;
use crate::{Error, Result};

/// Smallest sample accepted by [`fit_invgauss`].
pub const MIN_FIT_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGaussParams {
    pub mu: f64,
    pub loc: f64,
    pub scale: f64,
}

impl InvGaussParams {
    /// Fit to the defect-free experimental C-scans of the reference study.
    pub const MEASURED: InvGaussParams = InvGaussParams {
        mu: 0.410,
        loc: -0.003,
        scale: 0.066,
    };

    pub fn new(mu: f64, loc: f64, scale: f64) -> Result<Self> {
        let p = Self { mu, loc, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.scale > 0.0) || !self.loc.is_finite() {
            return Err(Error::invalid(format!(
                "inverse Gaussian needs mu > 0 and scale > 0, got mu={} scale={}",
                self.mu, self.scale
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.loc + self.scale * self.mu
    }

    /// Same distribution with the noise amplitude multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            mu: self.mu,
            loc: self.loc * k,
            scale: self.scale * k,
        }
    }
}

/// Density; zero wherever the standardized argument is not positive.
pub fn invgauss_pdf(x: f64, p: &InvGaussParams) -> f64 {
    let y = (x - p.loc) / p.scale;
    if !(y > 0.0) {
        return 0.0;
    }
    let mu = p.mu;
    let d = y - mu;
    libm::exp(-d * d / (2.0 * y * mu * mu)) / libm::sqrt(2.0 * PI * y * y * y) / p.scale
}

/// Closed-form CDF of the unit-shape inverse Gaussian.
pub fn invgauss_cdf(x: f64, p: &InvGaussParams) -> f64 {
    let y = (x - p.loc) / p.scale;
    if !(y > 0.0) {
        return 0.0;
    }
    let mu = p.mu;
    let s = libm::sqrt(1.0 / y);
    let a = normal_cdf(s * (y / mu - 1.0));
    // exp(2/mu) * Phi(-b) overflows for small mu; combine in log space.
    let b = s * (y / mu + 1.0);
    let tail = libm::erfc(b / core::f64::consts::SQRT_2) / 2.0;
    let second = if tail > 0.0 {
        libm::exp(2.0 / mu + libm::log(tail))
    } else {
        0.0
    };
    (a + second).clamp(0.0, 1.0)
}

/// Unit-shape inverse Gaussian draw by the transformation-with-rejection
/// scheme: root of the chi-square transform, then pick the smaller or larger
/// root with a uniform.
fn standard_draw(mu: f64, rng: &mut Rng) -> f64 {
    let v = rng.standard_normal();
    let y = v * v;
    let x = mu + 0.5 * mu * mu * y - 0.5 * mu * libm::sqrt(4.0 * mu * y + mu * mu * y * y);
    if rng.uniform() <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

pub fn sample_invgauss(p: &InvGaussParams, rng: &mut Rng) -> f64 {
    p.loc + p.scale * standard_draw(p.mu, rng)
}

/// Noise image of i.i.d. pixels, clamped into `[0, 1]`.
pub fn sample_invgauss_image(
    p: &InvGaussParams,
    width: usize,
    height: usize,
    rng: &mut Rng,
) -> Result<CScanImage> {
    p.validate()?;
    let pixels: Vec<f32> = (0..width * height)
        .map(|_| sample_invgauss(p, rng).clamp(0.0, 1.0) as f32)
        .collect();
    CScanImage::new(width, height, pixels, Label::Clean)
}

/// `(mean, shape)` maximum-likelihood estimates for a two-parameter inverse
/// Gaussian, and the profile log-likelihood up to a constant.
fn fit_fixed_loc(xs: &[f64], loc: f64) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mut sum = 0.0;
    let mut sum_inv = 0.0;
    let mut sum_log = 0.0;
    for &x in xs {
        let z = x - loc;
        if !(z > 0.0) {
            return None;
        }
        sum += z;
        sum_inv += 1.0 / z;
        sum_log += libm::log(z);
    }
    let m = sum / n;
    let denom = sum_inv - n / m;
    if !(denom > 0.0) {
        return None;
    }
    let shape = n / denom;
    // At the MLE the quadratic term of the log-likelihood is exactly n/2.
    let ll = 0.5 * n * libm::log(shape) - 1.5 * sum_log;
    Some((m, shape, ll))
}

/// Maximum-likelihood `(mu, loc, scale)`.
///
/// For fixed `loc` the shifted data is inverse Gaussian with mean `m` and
/// shape `lambda`, both closed-form; `scale = lambda` and `mu = m / lambda`.
/// `loc` is profiled by a log-spaced grid over the gap below the sample
/// minimum followed by golden-section refinement.
pub fn fit_invgauss(samples: &[f64]) -> Result<InvGaussParams> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Insufficient(format!(
            "inverse Gaussian fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = max - min;
    if !(spread > 0.0) {
        return Err(Error::Degenerate("constant samples".into()));
    }
    let ll_at = |gap: f64| fit_fixed_loc(samples, min - gap).map(|(_, _, ll)| ll);

    // Search the gap `min - loc` over (1e-9, 10) x spread, log-spaced.
    let lo = libm::log(spread * 1e-9);
    let hi = libm::log(spread * 10.0);
    let steps = 200;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=steps {
        let g = libm::exp(lo + (hi - lo) * i as f64 / steps as f64);
        if let Some(ll) = ll_at(g) {
            if best.map_or(true, |(_, b)| ll > b) {
                best = Some((i, ll));
            }
        }
    }
    let (i_best, _) = best.ok_or_else(|| Error::Numeric("no feasible location".into()))?;
    let to_log = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let mut a = to_log(i_best.saturating_sub(1));
    let mut b = to_log((i_best + 1).min(steps));
    let phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let f = |lg: f64| ll_at(libm::exp(lg)).unwrap_or(f64::NEG_INFINITY);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let gap = libm::exp(0.5 * (a + b));
    let loc = min - gap;
    let (m, shape, _) = fit_fixed_loc(samples, loc)
        .ok_or_else(|| Error::Numeric("profile optimum infeasible".into()))?;
    InvGaussParams::new(m / shape, loc, shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_mean_with_unit_params() {
        let p = InvGaussParams::new(1.0, 0.0, 1.0).unwrap();
        let want = 1.0 / libm::sqrt(2.0 * PI);
        assert!((invgauss_pdf(1.0, &p) - want).abs() < 1e-15);
        assert!((want - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn density_vanishes_off_support() {
        let p = InvGaussParams::MEASURED;
        assert_eq!(invgauss_pdf(p.loc, &p), 0.0);
        assert_eq!(invgauss_pdf(-1.0, &p), 0.0);
    }

    #[test]
    fn invalid_params() {
        assert!(InvGaussParams::new(0.0, 0.0, 1.0).is_err());
        assert!(InvGaussParams::new(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn fit_rejects_small_and_constant_samples() {
        let mut rng = Rng::new(1);
        let few: Vec<f64> = (0..10)
            .map(|_| sample_invgauss(&InvGaussParams::MEASURED, &mut rng))
            .collect();
        assert!(matches!(fit_invgauss(&few), Err(Error::Insufficient(_))));
        assert!(matches!(
            fit_invgauss(&[0.3; 2000]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn images_are_reproducible_and_in_range() {
        let p = InvGaussParams::MEASURED;
        let a = sample_invgauss_image(&p, 64, 64, &mut Rng::new(5)).unwrap();
        let b = sample_invgauss_image(&p, 64, 64, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        a.check_range().unwrap();
    }
}
