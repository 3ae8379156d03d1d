//! Savitzky-Golay smoothing.
//!
//! Each output is the value at its own position of the least-squares
//! polynomial through the surrounding window. Within half a window of either
//! end the first or last full window is fitted instead, so polynomials up to
//! `order` pass through unchanged everywhere.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavGol {
    pub window: usize,
    pub order: usize,
}

impl Default for SavGol {
    fn default() -> Self {
        Self {
            window: 11,
            order: 3,
        }
    }
}

impl SavGol {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 || self.window <= self.order {
            return Err(Error::invalid(format!(
                "Savitzky-Golay window must be odd and greater than the order, got window={} order={}",
                self.window, self.order
            )));
        }
        Ok(())
    }
}

/// Solves `a x = b` for each column of `b`, overwriting `b`.
fn solve_in_place(a: &mut [Vec<f64>], b: &mut [Vec<f64>]) -> Result<()> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numeric("singular Savitzky-Golay system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    for row in 0..n {
        let d = a[row][row];
        for v in b[row].iter_mut() {
            *v /= d;
        }
    }
    Ok(())
}

/// Weights that evaluate the window's fitted polynomial at `eval_pos`.
fn weights_at(window: usize, order: usize, eval_pos: usize) -> Result<Vec<f64>> {
    let half = (window / 2).max(1) as f64;
    let c = (window / 2) as f64;
    let x: Vec<f64> = (0..window).map(|k| (k as f64 - c) / half).collect();
    let p = order + 1;
    // Gram matrix and design transpose in scaled coordinates.
    let mut gram = vec![vec![0.0; p]; p];
    let mut design_t = vec![vec![0.0; window]; p];
    for (k, &xk) in x.iter().enumerate() {
        let mut pw = 1.0;
        for j in 0..p {
            design_t[j][k] = pw;
            pw *= xk;
        }
    }
    for i in 0..p {
        for j in 0..p {
            gram[i][j] = (0..window).map(|k| design_t[i][k] * design_t[j][k]).sum();
        }
    }
    solve_in_place(&mut gram, &mut design_t)?;
    let u = x[eval_pos];
    let mut h = vec![0.0; window];
    let mut pw = 1.0;
    for row in design_t.iter() {
        for (hk, r) in h.iter_mut().zip(row) {
            *hk += pw * r;
        }
        pw *= u;
    }
    Ok(h)
}

/// Central smoothing weights for a window.
pub fn savgol_coefficients(window: usize, order: usize) -> Result<Vec<f64>> {
    SavGol { window, order }.validate()?;
    weights_at(window, order, window / 2)
}

pub fn savgol_filter(signal: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    SavGol { window, order }.validate()?;
    let n = signal.len();
    if window > n {
        return Err(Error::invalid(format!(
            "Savitzky-Golay window {window} longer than signal of {n} samples"
        )));
    }
    let half = window / 2;
    let center = weights_at(window, order, half)?;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = center
            .iter()
            .zip(&signal[i - half..=i + half])
            .map(|(h, s)| h * s)
            .sum();
    }
    let tail_start = n - window;
    for pos in 0..half {
        let w = weights_at(window, order, pos)?;
        out[pos] = w.iter().zip(&signal[..window]).map(|(h, s)| h * s).sum();
        let end_pos = window - 1 - pos;
        let w = weights_at(window, order, end_pos)?;
        out[tail_start + end_pos] = w
            .iter()
            .zip(&signal[tail_start..])
            .map(|(h, s)| h * s)
            .sum();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_five_point_quadratic_weights() {
        // Classic 5-point quadratic smoother: (-3, 12, 17, 12, -3) / 35.
        let h = savgol_coefficients(5, 2).unwrap();
        let want = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reproduces_cubic() {
        let x: Vec<f64> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.1 - 2.0;
                0.5 - 1.2 * t + 0.3 * t * t + 0.7 * t * t * t
            })
            .collect();
        let y = savgol_filter(&x, 11, 3).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_is_fixed_point() {
        let x = vec![0.42; 30];
        let y = savgol_filter(&x, 11, 3).unwrap();
        for v in y {
            assert!((v - 0.42).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_windows() {
        assert!(savgol_filter(&[0.0; 20], 10, 3).is_err());
        assert!(savgol_filter(&[0.0; 20], 3, 3).is_err());
        assert!(savgol_filter(&[0.0; 5], 11, 3).is_err());
    }
}
