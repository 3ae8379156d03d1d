//! Declarative pipeline configuration (TOML) with `key.path=value`
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ultrasynth_core::hpo::{EvolutionParams, SearchSpace};
use ultrasynth_core::nn::CnnConfig;
use ultrasynth_core::noise::{InvGaussParams, NoiseMethod, SavGol};
use ultrasynth_core::phantom::{PulseSpec, SimDims, STUDY_DEPTHS_MM, STUDY_DIAMETERS_MM};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workdir: PathBuf,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub analog: AnalogConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "CnnConfig::optimal")]
    pub cnn: CnnConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub hpo: HpoConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub golden: GoldenConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub diameters_mm: Vec<f64>,
    pub depths_mm: Vec<f64>,
    /// Windows whose in-mask peak reaches this share of the best window
    /// become defect images.
    pub defect_min_fraction: f64,
    pub pulse: PulseSpec,
    pub dims: SimDims,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            diameters_mm: STUDY_DIAMETERS_MM.to_vec(),
            depths_mm: STUDY_DEPTHS_MM.to_vec(),
            defect_min_fraction: 0.1,
            pulse: PulseSpec::default(),
            dims: SimDims::default(),
        }
    }
}

/// The experimental analog: phantom responses plus the reference A-scan
/// noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogConfig {
    pub enabled: bool,
    pub noise_scale: f64,
    pub clean_volumes: usize,
    pub windows_per_volume: usize,
}

impl Default for AnalogConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            noise_scale: 1.0,
            clean_volumes: 4,
            windows_per_volume: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub method: NoiseMethod,
    /// Fitted model file written by `fit-noise`.
    pub model: Option<PathBuf>,
    /// Inverse-Gaussian parameters given directly; take precedence over
    /// the model file for `cscan-noise`.
    pub invgauss: Option<InvGaussParams>,
    /// Defect-free datasets: the `real-noise` pool and the pixels `fit-noise`
    /// fits the inverse Gaussian to.
    pub clean_datasets: Vec<PathBuf>,
    /// Directory of defect-free volumes for `fit-noise`.
    pub volumes: Option<PathBuf>,
    /// Multiplies the noise amplitude.
    pub scale: f64,
    pub rejection_margin: f64,
    pub savgol: Option<SavGol>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            method: NoiseMethod::AscanNoise,
            model: None,
            invgauss: None,
            clean_datasets: Vec::new(),
            volumes: None,
            scale: 1.0,
            rejection_margin: 1.0,
            savgol: Some(SavGol::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub train: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_runs: usize,
    /// A `best.json` from `hpo`; replaces `[cnn]` when set.
    pub cnn_file: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
    pub test: Vec<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_runs: 10,
            cnn_file: None,
            experiments: Vec::new(),
            test: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoConfig {
    pub population: usize,
    pub sample_size: usize,
    pub iterations: usize,
    pub k_splits: usize,
    pub data: Vec<PathBuf>,
    pub space: SearchSpace,
}

impl Default for HpoConfig {
    fn default() -> Self {
        let p = EvolutionParams::paper();
        Self {
            population: p.population,
            sample_size: p.sample_size,
            iterations: p.iterations,
            k_splits: 10,
            data: Vec::new(),
            space: SearchSpace::paper(),
        }
    }
}

impl HpoConfig {
    pub fn params(&self) -> EvolutionParams {
        EvolutionParams {
            population: self.population,
            sample_size: self.sample_size,
            iterations: self.iterations,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub checkpoint: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Explain only the first `max_images` images.
    pub max_images: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoldenConfig {
    pub n_random: usize,
}

impl Default for GoldenConfig {
    fn default() -> Self {
        Self { n_random: 20 }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `a.b.c=value` overrides to a parsed table. Values are read as TOML
/// and fall back to plain strings.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("bad override key `{key}`")));
        }
        let mut t = &mut *table;
        for p in &parts[..parts.len() - 1] {
            let entry = t
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            t = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
        }
        t.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        apply_overrides(&mut table, overrides)?;
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: ultrasynth_core::Error| Error::Config(e.to_string());
        let d = &self.phantom.dims;
        d.validate(&self.phantom.pulse).map_err(cfg_err)?;
        if !(0.0..=1.0).contains(&self.phantom.defect_min_fraction) {
            return Err(Error::Config("phantom.defect_min_fraction not in [0, 1]".into()));
        }
        if !(self.noise.scale >= 0.0) || !(self.analog.noise_scale >= 0.0) {
            return Err(Error::Config("noise scales must be >= 0".into()));
        }
        if !(self.noise.rejection_margin >= 1.0) {
            return Err(Error::Config("noise.rejection_margin must be >= 1".into()));
        }
        if let Some(sg) = &self.noise.savgol {
            sg.validate().map_err(cfg_err)?;
        }
        if let Some(p) = &self.noise.invgauss {
            p.validate().map_err(cfg_err)?;
        }
        self.cnn.validate_trainable(ultrasynth_core::nn::INPUT_SIDE).map_err(cfg_err)?;
        Ok(())
    }

    /// Canonical JSON used for run stamps and echoed into every run.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// `<command>-<seed>-<crc32 of the canonical config>`.
    pub fn run_stamp(&self, command: &str) -> String {
        let crc = crc32fast::hash(self.canonical_json().as_bytes());
        format!("{command}-{}-{crc:08x}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = PipelineConfig::from_toml_str("seed = 3\nworkdir = \"w\"", &[]).unwrap();
        assert_eq!(c.cnn, CnnConfig::optimal());
        assert_eq!(c.phantom.diameters_mm, [3.0, 6.0, 9.0]);
        assert_eq!(c.hpo.population, 128);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(
            PipelineConfig::from_toml_str("workdir = \"w\"", &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overrides_are_typed() {
        let c = PipelineConfig::from_toml_str(
            "seed = 3\nworkdir = \"w\"",
            &[
                "cnn.epochs=60".into(),
                "noise.method=cscan-noise".into(),
                "phantom.depths_mm=[1.5, 3.0]".into(),
                "seed=9".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.cnn.epochs, 60);
        assert_eq!(c.noise.method, NoiseMethod::CscanNoise);
        assert_eq!(c.phantom.depths_mm, [1.5, 3.0]);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("seed = 1\nworkdir = \"w\"\n[noise]\nmethd = 1", &[]).is_err());
        assert!(PipelineConfig::from_toml_str("seed = 1\nworkdir = \"w\"", &["novalue".into()]).is_err());
    }

    #[test]
    fn stamp_depends_on_config() {
        let a = PipelineConfig::from_toml_str("seed = 3\nworkdir = \"w\"", &[]).unwrap();
        let b = PipelineConfig::from_toml_str("seed = 3\nworkdir = \"w\"", &["cnn.epochs=60".into()]).unwrap();
        assert_eq!(a.run_stamp("x"), a.clone().run_stamp("x"));
        assert_ne!(a.run_stamp("x"), b.run_stamp("x"));
    }
}
