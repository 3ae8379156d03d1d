//! Dataset directories: `images.bin` holds pixels and masks, `manifest.json`
//! describes provenance, seed, lineage and every image.
//!
//! `images.bin` layout (little-endian): a 32-byte header of magic
//! `USDATSET`, version, image count, width, height, reserved u32 and the
//! CRC-32 of the body; then per image a label byte (1 = defective), a mask
//! flag byte, two zero bytes, the depth gate as two u32, the `f32` pixels and,
//! when flagged, one byte per mask pixel.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ultrasynth_core::rng::RNG_ALGORITHM;
use ultrasynth_core::scan::DefectOrigin;
use ultrasynth_core::{CScanImage, Dataset, Label, Provenance};

use crate::error::{self, Error, Result};

pub const MAGIC: &[u8; 8] = b"USDATSET";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
pub const IMAGES_FILE: &str = "images.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub index: usize,
    pub label: Label,
    pub depth_gate: (u32, u32),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub origin: Option<DefectOrigin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub defective: usize,
    pub clean: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub seed: u64,
    pub rng_algorithm: String,
    pub width: usize,
    pub height: usize,
    pub counts: Counts,
    pub images_crc32: String,
    /// How the dataset was produced: parameters, inputs, kept/rejected.
    pub lineage: serde_json::Value,
    pub images: Vec<ImageEntry>,
}

pub fn encode_images(images: &[CScanImage]) -> Result<Vec<u8>> {
    let (w, h) = images.first().map_or((0, 0), |i| (i.width, i.height));
    let mut body = Vec::new();
    for im in images {
        if im.width != w || im.height != h {
            return Err(Error::Data("dataset images differ in size".into()));
        }
        body.push(u8::from(im.label == Label::Defective));
        body.push(u8::from(im.defect_mask.is_some()));
        body.extend_from_slice(&[0, 0]);
        body.extend_from_slice(&im.depth_gate.0.to_le_bytes());
        body.extend_from_slice(&im.depth_gate.1.to_le_bytes());
        for p in &im.pixels {
            body.extend_from_slice(&p.to_le_bytes());
        }
        if let Some(m) = &im.defect_mask {
            body.extend(m.iter().map(|&b| u8::from(b)));
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    for u in [VERSION, images.len() as u32, w as u32, h as u32, 0, crc32fast::hash(&body)] {
        out.extend_from_slice(&u.to_le_bytes());
    }
    out.extend_from_slice(&body);
    Ok(out)
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

pub fn decode_images(bytes: &[u8], path: &Path) -> Result<Vec<CScanImage>> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::header(path, "not a dataset image file"));
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(Error::header(path, format!("unsupported version {version}")));
    }
    let n = u32_at(bytes, 12) as usize;
    let (w, h) = (u32_at(bytes, 16) as usize, u32_at(bytes, 20) as usize);
    let stored = u32_at(bytes, 28);
    let body = &bytes[HEADER_LEN..];
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let np = w * h;
    let truncated = || Error::header(path, "image records truncated");
    let mut images = Vec::with_capacity(n);
    let mut off = 0usize;
    for _ in 0..n {
        let rec = body.get(off..off + 12).ok_or_else(truncated)?;
        let label = if rec[0] == 1 { Label::Defective } else { Label::Clean };
        let has_mask = rec[1] == 1;
        let gate = (u32_at(rec, 4), u32_at(rec, 8));
        off += 12;
        let px = body.get(off..off + 4 * np).ok_or_else(truncated)?;
        let pixels = px
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        off += 4 * np;
        let mut im = CScanImage::new(w, h, pixels, label)?;
        im.depth_gate = gate;
        if has_mask {
            let m = body.get(off..off + np).ok_or_else(truncated)?;
            im.defect_mask = Some(m.iter().map(|&b| b == 1).collect());
            off += np;
        }
        images.push(im);
    }
    if off != body.len() {
        return Err(Error::header(path, "trailing bytes after the last image"));
    }
    Ok(images)
}

/// Write `dir/images.bin` and `dir/manifest.json`; returns the manifest.
pub fn save_dataset(ds: &Dataset, dir: &Path, lineage: serde_json::Value) -> Result<Manifest> {
    error::create_dir(dir)?;
    let bytes = encode_images(&ds.images)?;
    let (w, h) = ds.images.first().map_or((0, 0), |i| (i.width, i.height));
    let manifest = Manifest {
        format: "ultrasynth-dataset".into(),
        version: VERSION,
        provenance: ds.provenance,
        seed: ds.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        width: w,
        height: h,
        counts: Counts {
            defective: ds.count(Label::Defective),
            clean: ds.count(Label::Clean),
        },
        images_crc32: format!("{:08x}", u32_at(&bytes, 28)),
        lineage,
        images: ds
            .images
            .iter()
            .enumerate()
            .map(|(index, im)| ImageEntry {
                index,
                label: im.label,
                depth_gate: im.depth_gate,
                origin: im.origin,
            })
            .collect(),
    };
    error::write(&dir.join(IMAGES_FILE), bytes)?;
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join(MANIFEST_FILE))
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, Manifest)> {
    let manifest = load_manifest(dir)?;
    let path: PathBuf = dir.join(IMAGES_FILE);
    let mut images = decode_images(&error::read(&path)?, &path)?;
    if images.len() != manifest.images.len() {
        return Err(Error::Data(format!(
            "{}: manifest lists {} images, file holds {}",
            dir.display(),
            manifest.images.len(),
            images.len()
        )));
    }
    for (im, e) in images.iter_mut().zip(&manifest.images) {
        im.origin = e.origin;
    }
    let ds = Dataset::new(images, manifest.provenance, manifest.seed)?;
    Ok((ds, manifest))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| error::json_error(path, e))?;
    s.push('\n');
    error::write(path, s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = error::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| error::json_error(path, e))
}
