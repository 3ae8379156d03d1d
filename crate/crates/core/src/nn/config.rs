use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BATCH_SIZES: [u32; 5] = [16, 32, 64, 128, 256];

/// Architecture and SGD hyperparameters searched by the HPO. Missing
/// fields deserialize to [`CnnConfig::optimal`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub n_fc_layers: u32,
    pub n_conv_layers: u32,
    pub channel_ratio: u32,
    pub batch_size: u32,
    pub early_stop: u32,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: u32,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self::optimal()
    }
}

impl CnnConfig {
    /// The optimized configuration reported for the experimental data.
    pub fn optimal() -> Self {
        Self {
            n_fc_layers: 1,
            n_conv_layers: 3,
            channel_ratio: 3,
            batch_size: 16,
            early_stop: 1,
            learning_rate: 0.014,
            momentum: 0.176,
            epochs: 264,
        }
    }

    /// Check every field against the HPO domain.
    pub fn validate(&self) -> Result<()> {
        let int = |name: &str, v: u32, lo: u32, hi: u32| {
            if v < lo || v > hi {
                Err(Error::range(alloc::format!("{name} = {v} not in [{lo}, {hi}]")))
            } else {
                Ok(())
            }
        };
        int("n_fc_layers", self.n_fc_layers, 1, 6)?;
        int("n_conv_layers", self.n_conv_layers, 1, 6)?;
        int("channel_ratio", self.channel_ratio, 1, 3)?;
        int("early_stop", self.early_stop, 0, 5)?;
        int("epochs", self.epochs, 100, 500)?;
        if !BATCH_SIZES.contains(&self.batch_size) {
            return Err(Error::range(alloc::format!(
                "batch_size = {} not one of {:?}",
                self.batch_size,
                BATCH_SIZES
            )));
        }
        if !(1e-5..=0.5).contains(&self.learning_rate) {
            return Err(Error::range("learning_rate not in [1e-5, 0.5]"));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::range("momentum not in [0, 1]"));
        }
        self.validate_shape(super::INPUT_SIDE)
    }

    /// Looser check used by training: structural sanity only, so scaled
    /// down budgets and `learning_rate = 0` remain usable.
    pub fn validate_trainable(&self, input_side: usize) -> Result<()> {
        if self.n_fc_layers == 0 || self.n_conv_layers == 0 || self.channel_ratio == 0 {
            return Err(Error::invalid("layer counts and channel ratio must be >= 1"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch_size and epochs must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum not in [0, 1]"));
        }
        self.validate_shape(input_side)
    }

    fn validate_shape(&self, input_side: usize) -> Result<()> {
        if self.n_conv_layers >= usize::BITS || input_side >> self.n_conv_layers == 0 {
            return Err(Error::invalid(alloc::format!(
                "{} pooling stages collapse a {input_side} px input",
                self.n_conv_layers
            )));
        }
        Ok(())
    }

    /// Output channels of each conv layer: `ratio^k`.
    pub fn channels(&self) -> alloc::vec::Vec<usize> {
        let r = self.channel_ratio as usize;
        let mut c = 1usize;
        (0..self.n_conv_layers)
            .map(|_| {
                c *= r;
                c
            })
            .collect()
    }
}

/// Widths of the fully connected stack after a flatten of `flat` units:
/// hidden `i` has `flat - i * floor(flat / n_layers)` units, the last is 1.
pub fn fc_widths(flat: usize, n_layers: usize) -> alloc::vec::Vec<usize> {
    let step = flat / n_layers.max(1);
    let mut w: alloc::vec::Vec<usize> = (1..n_layers).map(|i| flat - i * step).collect();
    w.push(1);
    w
}
