//! Binary volume files.
//!
//! A fixed 64-byte little-endian header followed by the `f32` payload in
//! `[b_scan][element][time]` order:
//!
//! | offset | field |
//! |---|---|
//! | 0 | magic `USVOLUME` |
//! | 8 | version (u32) |
//! | 12 | n_bscans, n_elements, n_time (u32 each) |
//! | 24 | sample_rate_hz, element_pitch_mm, scan_step_mm (f32 each) |
//! | 36 | flags (u32; bit 0 = normalized) |
//! | 40 | time_offset, original_time_len (u32 each) |
//! | 48 | CRC-32 of the payload (u32) |
//! | 52 | zero padding |
//!
//! A JSON sidecar (`<file>.json`) repeats the metadata for inspection.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ultrasynth_core::{VolumeMeta, VolumeScan};

use crate::error::{self, Error, Result};

pub const MAGIC: &[u8; 8] = b"USVOLUME";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
const FLAG_NORMALIZED: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub n_bscans: usize,
    pub n_elements: usize,
    pub n_time: usize,
    pub meta: VolumeMeta,
    pub payload_crc32: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_volume(v: &VolumeScan) -> Vec<u8> {
    let (nb, ne, nt) = v.dims();
    let mut payload = Vec::with_capacity(v.samples().len() * 4);
    for x in v.samples() {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&payload);
    let m = &v.meta;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [nb, ne, nt] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for f in [m.sample_rate_hz, m.element_pitch_mm, m.scan_step_mm] {
        out.extend_from_slice(&f.to_le_bytes());
    }
    let flags = if m.normalized { FLAG_NORMALIZED } else { 0 };
    for u in [flags, m.time_offset, m.original_time_len, crc] {
        out.extend_from_slice(&u.to_le_bytes());
    }
    out.resize(HEADER_LEN, 0);
    out.extend_from_slice(&payload);
    out
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

/// Decode a volume; `path` only labels errors.
pub fn decode_volume(bytes: &[u8], path: &Path) -> Result<VolumeScan> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::header(path, format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::header(path, "bad magic"));
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(Error::header(path, format!("unsupported version {version}")));
    }
    let (nb, ne, nt) = (
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
        u32_at(bytes, 20) as usize,
    );
    let flags = u32_at(bytes, 36);
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::header(path, format!("unknown flags {flags:#x}")));
    }
    let meta = VolumeMeta {
        sample_rate_hz: f32_at(bytes, 24),
        element_pitch_mm: f32_at(bytes, 28),
        scan_step_mm: f32_at(bytes, 32),
        normalized: flags & FLAG_NORMALIZED != 0,
        time_offset: u32_at(bytes, 40),
        original_time_len: u32_at(bytes, 44),
    };
    let stored = u32_at(bytes, 48);
    let expected = nb
        .checked_mul(ne)
        .and_then(|n| n.checked_mul(nt))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::header(path, "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::header(
            path,
            format!("payload is {} bytes, dimensions need {expected}", payload.len()),
        ));
    }
    let computed = crc32fast::hash(payload);
    if computed != stored {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let samples = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(VolumeScan::new(nb, ne, nt, samples, meta)?)
}

/// Write the binary file and its JSON sidecar.
pub fn save_volume(v: &VolumeScan, path: &Path) -> Result<()> {
    let bytes = encode_volume(v);
    let (nb, ne, nt) = v.dims();
    let side = Sidecar {
        format: "ultrasynth-volume".into(),
        version: VERSION,
        n_bscans: nb,
        n_elements: ne,
        n_time: nt,
        meta: v.meta,
        payload_crc32: format!("{:08x}", u32_at(&bytes, 48)),
    };
    error::write(path, &bytes)?;
    let json = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    error::write(&sidecar_path(path), json)
}

pub fn load_volume(path: &Path) -> Result<VolumeScan> {
    decode_volume(&error::read(path)?, path)
}
