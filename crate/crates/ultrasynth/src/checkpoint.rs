//! Model checkpoints: `u32` header length, a JSON header, then the weights
//! as little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ultrasynth_core::nn::{CnnConfig, CnnModel};

use crate::error::{self, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub config: CnnConfig,
    pub input_side: usize,
    pub seed: u64,
    pub n_params: usize,
    pub weights_crc32: String,
}

pub fn encode_checkpoint(model: &CnnModel, seed: u64) -> Vec<u8> {
    let mut blob = Vec::with_capacity(model.params().len() * 8);
    for p in model.params() {
        blob.extend_from_slice(&p.to_le_bytes());
    }
    let header = CheckpointHeader {
        format: "ultrasynth-cnn".into(),
        version: 1,
        config: *model.config(),
        input_side: model.input_side(),
        seed,
        n_params: model.params().len(),
        weights_crc32: format!("{:08x}", crc32fast::hash(&blob)),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(4 + json.len() + blob.len());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(CnnModel, CheckpointHeader)> {
    let len = bytes
        .get(..4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        .ok_or_else(|| Error::header(path, "empty checkpoint"))?;
    let json = bytes
        .get(4..4 + len)
        .ok_or_else(|| Error::header(path, "header truncated"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(json).map_err(|e| Error::header(path, e.to_string()))?;
    let blob = &bytes[4 + len..];
    if blob.len() != header.n_params * 8 {
        return Err(Error::header(
            path,
            format!("{} weight bytes for {} parameters", blob.len(), header.n_params),
        ));
    }
    let computed = crc32fast::hash(blob);
    let stored = u32::from_str_radix(&header.weights_crc32, 16)
        .map_err(|_| Error::header(path, "bad checksum field"))?;
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let model = CnnModel::from_params(&header.config, header.input_side, params)?;
    Ok((model, header))
}

pub fn save_checkpoint(model: &CnnModel, seed: u64, path: &Path) -> Result<()> {
    error::write(path, encode_checkpoint(model, seed))
}

pub fn load_checkpoint(path: &Path) -> Result<(CnnModel, CheckpointHeader)> {
    decode_checkpoint(&error::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ultrasynth_core::Rng;

    #[test]
    fn round_trip_is_exact() {
        let cfg = CnnConfig {
            n_conv_layers: 2,
            n_fc_layers: 2,
            ..CnnConfig::optimal()
        };
        let m = CnnModel::build(&cfg, 16, &mut Rng::new(4)).unwrap();
        let (back, h) = decode_checkpoint(&encode_checkpoint(&m, 99), Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert_eq!(h.seed, 99);
    }

    #[test]
    fn corrupted_weights_are_detected() {
        let m = CnnModel::build(&CnnConfig::optimal(), 8, &mut Rng::new(4)).unwrap();
        let mut b = encode_checkpoint(&m, 1);
        let last = b.len() - 3;
        b[last] ^= 0x10;
        assert!(matches!(
            decode_checkpoint(&b, Path::new("mem")),
            Err(Error::Checksum { .. })
        ));
    }
}
