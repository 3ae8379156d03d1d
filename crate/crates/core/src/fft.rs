//! Complex DFT of arbitrary length.
//!
//! Powers of two use an iterative radix-2 transform; every other length goes
//! through Bluestein's chirp-z reformulation onto a power-of-two convolution.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Reusable plan for one transform length.
#[derive(Clone, Debug)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Radix2 { twiddles: Vec<Complex64> },
    Bluestein(Bluestein),
}

#[derive(Clone, Debug)]
struct Bluestein {
    m: usize,
    /// `exp(-i pi k^2 / n)` for `k < n`.
    chirp: Vec<Complex64>,
    /// Forward transform of the conjugate chirp, wrapped to length `m`.
    kernel_fft: Vec<Complex64>,
    inner_twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        if n.is_power_of_two() {
            return Self {
                n,
                kind: Kind::Radix2 {
                    twiddles: twiddles(n),
                },
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                // k^2 mod 2n keeps the phase argument small.
                let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        let inner_twiddles = twiddles(m);
        radix2(&mut kernel, &inner_twiddles, false);
        Self {
            n,
            kind: Kind::Bluestein(Bluestein {
                m,
                chirp,
                kernel_fft: kernel,
                inner_twiddles,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X[k] = sum x[j] exp(-2 pi i jk/n)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
        let s = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "buffer length does not match plan");
        match &self.kind {
            Kind::Radix2 { twiddles } => radix2(data, twiddles, inverse),
            Kind::Bluestein(b) => b.run(data, inverse),
        }
    }
}

impl Bluestein {
    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = data.len();
        // The inverse is the forward transform of the conjugated input, conjugated.
        if inverse {
            for x in data.iter_mut() {
                *x = x.conj();
            }
        }
        let mut work = vec![Complex64::new(0.0, 0.0); self.m];
        for k in 0..n {
            work[k] = data[k] * self.chirp[k];
        }
        radix2(&mut work, &self.inner_twiddles, false);
        for (w, k) in work.iter_mut().zip(&self.kernel_fft) {
            *w *= k;
        }
        radix2(&mut work, &self.inner_twiddles, true);
        let scale = 1.0 / self.m as f64;
        for k in 0..n {
            data[k] = work[k] * scale * self.chirp[k];
        }
        if inverse {
            for x in data.iter_mut() {
                *x = x.conj();
            }
        }
    }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// In-place radix-2 DIT transform without normalization.
fn radix2(data: &mut [Complex64], twiddles: &[Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let mut w = twiddles[k * stride];
                if inverse {
                    w = w.conj();
                }
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new(libm::sin(0.37 * t) + 0.1 * t, libm::cos(1.3 * t))
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 17, 23, 64, 100, 127] {
            let x = signal(n);
            let want = naive_dft(&x);
            let mut got = x.clone();
            Fft::new(n).forward(&mut got);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < 1e-9 * (1.0 + w.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for n in [16usize, 45, 680] {
            let x = signal(n);
            let plan = Fft::new(n);
            let mut y = x.clone();
            plan.forward(&mut y);
            plan.inverse(&mut y);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }
}
