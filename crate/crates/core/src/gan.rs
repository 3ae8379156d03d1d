//! Generator-side loss terms for simulated-to-experimental translation.
//!
//! The activation-map loss compares a generated image with its simulated
//! source only where the source has a response. The map `M` is the source
//! normalized to a unit max, `K` is the fraction of non-zero entries of `M`,
//! and the loss is `mean(|gen - sim| * M / K)`. Dividing by `K` makes the
//! loss independent of the defect's area.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationMap {
    pub values: Vec<f64>,
    pub scale_factor: f64,
}

/// Activation map counting entries strictly above zero as response.
pub fn activation_map(sim: &[f64]) -> ActivationMap {
    activation_map_with_threshold(sim, 0.0)
}

/// Like [`activation_map`] but entries `<= threshold` (after normalization)
/// do not count towards `K`; for measured inputs with a non-zero floor.
pub fn activation_map_with_threshold(sim: &[f64], threshold: f64) -> ActivationMap {
    let max = sim.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return ActivationMap {
            values: vec![0.0; sim.len()],
            scale_factor: 0.0,
        };
    }
    let values: Vec<f64> = sim.iter().map(|&s| s / max).collect();
    let nonzero = values.iter().filter(|&&v| v > threshold).count();
    ActivationMap {
        scale_factor: nonzero as f64 / values.len() as f64,
        values,
    }
}

/// Per-image activation-map loss.
pub fn activmap_loss(gen_out: &[f64], sim: &[f64]) -> Result<f64> {
    if gen_out.len() != sim.len() {
        return Err(Error::dim("generated image", sim.len(), gen_out.len()));
    }
    let map = activation_map(sim);
    if map.scale_factor == 0.0 {
        return Err(Error::Degenerate(
            "activation map is empty; the loss is undefined".into(),
        ));
    }
    let k = map.scale_factor;
    // |.|, times M, over K, then the mean.
    let total: f64 = gen_out
        .iter()
        .zip(sim)
        .zip(&map.values)
        .map(|((g, s), m)| (g - s).abs() * m / k)
        .sum();
    Ok(total / sim.len() as f64)
}

/// Batch expectation: mean of per-image losses.
pub fn activmap_loss_batch(pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Insufficient("empty batch".into()));
    }
    let mut acc = 0.0;
    for (g, s) in pairs {
        acc += activmap_loss(g, s)?;
    }
    Ok(acc / pairs.len() as f64)
}

/// Weights of the combined generator loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub w_gan_exp: f64,
    pub w_gan_sim: f64,
    pub w_cyc_sim: f64,
    pub w_cyc_exp: f64,
    pub w_activ: f64,
}

impl LossWeights {
    /// Experimental adversarial term weighted twice the simulated one,
    /// simulated cycle twice the experimental one, activation loss at
    /// twice the cycle coefficient.
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            w_gan_exp: 2.0 / 3.0,
            w_gan_sim: 1.0 / 3.0,
            w_cyc_sim: 2.0 / 3.0,
            w_cyc_exp: 1.0 / 3.0,
            w_activ: 2.0 * lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda,
            self.w_gan_exp,
            self.w_gan_sim,
            self.w_cyc_sim,
            self.w_cyc_exp,
            self.w_activ,
        ];
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::with_lambda(100.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub gan_exp: f64,
    pub gan_sim: f64,
    pub cyc_sim: f64,
    pub cyc_exp: f64,
    pub activ: f64,
}

pub fn total_generator_loss(parts: &LossParts, w: &LossWeights) -> f64 {
    w.w_gan_exp * parts.gan_exp
        + w.w_gan_sim * parts.gan_sim
        + w.lambda * (w.w_cyc_sim * parts.cyc_sim + w.w_cyc_exp * parts.cyc_exp)
        + w.w_activ * parts.activ
}

/// One reference case for cross-implementation loss parity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: alloc::string::String,
    /// `[height, width]`.
    pub shape: [usize; 2],
    pub sim: Vec<f64>,
    pub gen_out: Vec<f64>,
    pub expected_activ_loss: f64,
    pub parts: LossParts,
    pub weights: LossWeights,
    pub expected_total: f64,
}

fn golden_case(
    name: &str,
    side: usize,
    sim: Vec<f64>,
    gen_out: Vec<f64>,
    parts: LossParts,
    weights: LossWeights,
) -> Result<GoldenCase> {
    let activ = activmap_loss(&gen_out, &sim)?;
    let parts = LossParts { activ, ..parts };
    Ok(GoldenCase {
        name: name.into(),
        shape: [side, side],
        expected_activ_loss: activ,
        expected_total: total_generator_loss(&parts, &weights),
        sim,
        gen_out,
        parts,
        weights,
    })
}

/// Four defect pixels at 1.0 in a 4 x 4 image; the generator is off by
/// `0.5` on the defect only.
fn square_defect(n_defect: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sim = vec![0.0; 16];
    for s in sim.iter_mut().take(n_defect) {
        *s = 1.0;
    }
    let gen_out = sim.iter().map(|&s| if s > 0.0 { 0.5 } else { s }).collect();
    (sim, gen_out)
}

/// The two hand-evaluated cases followed by `n_random` randomized ones.
pub fn golden_cases(n_random: usize, rng: &mut Rng) -> Result<Vec<GoldenCase>> {
    let ones = LossParts {
        gan_exp: 1.0,
        gan_sim: 1.0,
        cyc_sim: 1.0,
        cyc_exp: 1.0,
        activ: 0.0,
    };
    let w = LossWeights::default();
    let mut out = Vec::with_capacity(n_random + 2);
    let (s, g) = square_defect(4);
    out.push(golden_case("hand-4px", 4, s, g, ones, w)?);
    let (s, g) = square_defect(8);
    out.push(golden_case("hand-8px", 4, s, g, ones, w)?);
    for i in 0..n_random {
        let side = 4 + rng.below(13);
        let n = side * side;
        // Blob of response on a zero background, so K < 1.
        let cx = rng.uniform_in(0.0, side as f64);
        let cy = rng.uniform_in(0.0, side as f64);
        let radius = rng.uniform_in(1.0, side as f64 / 2.0);
        let peak = rng.uniform_in(0.1, 1.0);
        let sim: Vec<f64> = (0..n)
            .map(|k| {
                let (r, c) = ((k / side) as f64, (k % side) as f64);
                let d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                if d2 <= radius * radius {
                    peak * libm::exp(-d2 / (radius * radius))
                } else {
                    0.0
                }
            })
            .collect();
        if sim.iter().all(|&s| s == 0.0) {
            continue;
        }
        let gen_out: Vec<f64> = sim
            .iter()
            .map(|&s| (s + rng.normal(0.0, 0.1)).clamp(0.0, 1.0))
            .collect();
        let parts = LossParts {
            gan_exp: rng.uniform(),
            gan_sim: rng.uniform(),
            cyc_sim: rng.uniform(),
            cyc_exp: rng.uniform(),
            activ: 0.0,
        };
        let weights = LossWeights::with_lambda(rng.uniform_in(0.0, 200.0));
        out.push(golden_case(
            &alloc::format!("random-{i}"),
            side,
            sim,
            gen_out,
            parts,
            weights,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_map_examples() {
        let m = activation_map(&[0.0; 9]);
        assert_eq!(m.scale_factor, 0.0);
        assert!(m.values.iter().all(|&v| v == 0.0));

        let mut sim = vec![0.0; 16];
        for i in [0, 5, 10, 15] {
            sim[i] = 0.5;
        }
        let m = activation_map(&sim);
        assert_eq!(m.scale_factor, 0.25);
        for i in 0..16 {
            assert_eq!(m.values[i], if sim[i] > 0.0 { 1.0 } else { 0.0 });
        }

        let sim = [0.2, 1.0, 0.0, 0.7];
        assert_eq!(activation_map(&sim).values, sim.to_vec());
    }

    #[test]
    fn identical_images_have_zero_loss() {
        let sim = [0.0, 0.3, 1.0, 0.1];
        assert_eq!(activmap_loss(&sim, &sim).unwrap(), 0.0);
    }

    #[test]
    fn empty_map_is_an_error() {
        assert!(activmap_loss(&[0.1; 4], &[0.0; 4]).is_err());
    }

    #[test]
    fn hand_cases() {
        let (s, g) = square_defect(4);
        assert_eq!(activmap_loss(&g, &s).unwrap(), 0.5);
        let (s, g) = square_defect(8);
        assert_eq!(activmap_loss(&g, &s).unwrap(), 0.5);
    }

    #[test]
    fn combined_loss_arithmetic() {
        let w = LossWeights::default();
        assert_eq!(total_generator_loss(&LossParts::default(), &w), 0.0);
        let ones = LossParts {
            gan_exp: 1.0,
            gan_sim: 1.0,
            cyc_sim: 1.0,
            cyc_exp: 1.0,
            activ: 1.0,
        };
        assert!((total_generator_loss(&ones, &w) - 301.0).abs() < 1e-12);
        let doubled = LossParts {
            gan_exp: 2.0,
            ..ones
        };
        let diff = total_generator_loss(&doubled, &w) - total_generator_loss(&ones, &w);
        assert!((diff - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn golden_cases_are_deterministic_and_start_with_hand_cases() {
        let a = golden_cases(5, &mut Rng::new(11)).unwrap();
        let b = golden_cases(5, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].expected_activ_loss, 0.5);
        assert_eq!(a[1].expected_activ_loss, 0.5);
        assert!((a[0].expected_total - (1.0 + 100.0 + 200.0 * 0.5)).abs() < 1e-12);
    }
}
