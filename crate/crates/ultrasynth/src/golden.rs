//! Golden loss vectors shared with other implementations of the
//! activation-map and combined generator losses.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ultrasynth_core::gan::{golden_cases, GoldenCase};
use ultrasynth_core::rng::RNG_ALGORITHM;
use ultrasynth_core::Rng;

use crate::dataset_io::{read_json, write_json};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub format: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub cases: Vec<GoldenCase>,
}

pub fn golden_file(n_random: usize, seed: u64) -> Result<GoldenFile> {
    Ok(GoldenFile {
        format: "ultrasynth-golden-losses".into(),
        seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        cases: golden_cases(n_random, &mut Rng::new(seed))?,
    })
}

pub fn emit_golden_vectors(path: &Path, n_random: usize, seed: u64) -> Result<GoldenFile> {
    let g = golden_file(n_random, seed)?;
    write_json(path, &g)?;
    Ok(g)
}

pub fn load_golden(path: &Path) -> Result<GoldenFile> {
    let g: GoldenFile = read_json(path)?;
    if g.cases.is_empty() {
        return Err(Error::Data(format!("{}: no golden cases", path.display())));
    }
    Ok(g)
}
