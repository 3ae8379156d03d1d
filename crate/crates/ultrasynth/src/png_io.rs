//! 8-bit grayscale PNG output: images, Grad-CAM triptychs and plain plots.

use std::path::Path;

use ultrasynth_core::CScanImage;

use crate::error::{self, Error, Result};

/// `round(p * 255)` with halves rounded up; values outside [0, 1] are an
/// error, never clipped.
pub fn to_gray(values: impl IntoIterator<Item = f64>) -> Result<Vec<u8>> {
    values
        .into_iter()
        .map(|p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Data(format!("pixel {p} outside [0, 1]")));
            }
            Ok((p * 255.0 + 0.5).floor() as u8)
        })
        .collect()
}

pub fn encode_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::Data(format!(
            "{} gray pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::Data(format!("png header: {e}")))?;
        w.write_image_data(pixels)
            .map_err(|e| Error::Data(format!("png data: {e}")))?;
    }
    Ok(out)
}

pub fn decode_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut r = dec.read_info().map_err(|e| Error::Data(format!("png: {e}")))?;
    let mut buf = vec![0; r.output_buffer_size().unwrap_or(0)];
    let info = r
        .next_frame(&mut buf)
        .map_err(|e| Error::Data(format!("png: {e}")))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Data("expected 8-bit grayscale".into()));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

pub fn export_png(img: &CScanImage, path: &Path) -> Result<()> {
    let gray = to_gray(img.pixels.iter().map(|&p| p as f64))?;
    error::write(path, encode_gray(img.width, img.height, &gray)?)
}

/// A white canvas with simple filled shapes.
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width * height],
        }
    }

    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, level: u8) {
        for y in y0.min(self.height)..y1.min(self.height) {
            for x in x0.min(self.width)..x1.min(self.width) {
                self.pixels[y * self.width + x] = level;
            }
        }
    }

    pub fn blit(&mut self, x0: usize, y0: usize, w: usize, src: &[u8]) {
        for (i, &v) in src.iter().enumerate() {
            let (x, y) = (x0 + i % w, y0 + i / w);
            if x < self.width && y < self.height {
                self.pixels[y * self.width + x] = v;
            }
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        encode_gray(self.width, self.height, &self.pixels)
    }
}

/// Input, heatmap and mixed image side by side, separated by white gaps.
pub fn triptych(side: usize, panels: [&[f64]; 3]) -> Result<Vec<u8>> {
    const GAP: usize = 4;
    let mut c = Canvas::new(3 * side + 2 * GAP, side);
    for (k, p) in panels.iter().enumerate() {
        let g = to_gray(p.iter().map(|v| v.clamp(0.0, 1.0)))?;
        c.blit(k * (side + GAP), 0, side, &g);
    }
    c.encode()
}

/// Histogram with an optional density curve drawn over it.
pub fn histogram_png(values: &[f64], bins: usize, density: Option<&dyn Fn(f64) -> f64>) -> Result<Vec<u8>> {
    const W: usize = 400;
    const H: usize = 240;
    let mut c = Canvas::new(W, H);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return c.encode();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = finite.len() as f64;
    let dens: Vec<f64> = counts.iter().map(|&k| k as f64 / (n * width)).collect();
    let curve: Vec<f64> = match density {
        Some(f) => (0..W).map(|x| f(lo + (hi - lo) * x as f64 / W as f64)).collect(),
        None => Vec::new(),
    };
    let top = dens
        .iter()
        .chain(curve.iter().filter(|v| v.is_finite()))
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let bar_w = W / bins;
    for (i, d) in dens.iter().enumerate() {
        let h = ((d / top) * (H - 10) as f64) as usize;
        c.fill_rect(i * bar_w, H - h, (i + 1) * bar_w, H, 160);
    }
    for (x, v) in curve.iter().enumerate() {
        if v.is_finite() {
            let y = H - 1 - ((v / top) * (H - 10) as f64).min((H - 1) as f64) as usize;
            c.fill_rect(x, y.saturating_sub(1), x + 1, y + 1, 0);
        }
    }
    c.encode()
}

/// Grouped bars: one group per metric, one bar per series, values in [0, 1].
pub fn bar_chart_png(series: &[Vec<f64>]) -> Result<Vec<u8>> {
    const H: usize = 240;
    const BAR: usize = 14;
    const GAP: usize = 20;
    let n_groups = series.iter().map(Vec::len).max().unwrap_or(0);
    let group_w = series.len().max(1) * BAR + GAP;
    let mut c = Canvas::new((n_groups * group_w + GAP).max(1), H);
    for g in 0..n_groups {
        for (s, vals) in series.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let h = (v * (H - 10) as f64) as usize;
            let x = GAP + g * group_w + s * BAR;
            let level = (40 + (s * 160) / series.len().max(1)) as u8;
            c.fill_rect(x, H - h, x + BAR - 2, H, level);
        }
    }
    c.encode()
}
