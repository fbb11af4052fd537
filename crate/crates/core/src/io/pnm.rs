//! Binary PNM (P5/P6) reading and writing, heatmaps and overlays.

use std::path::Path;

use super::manifest::ImageRecord;
use super::tensor_file;
use crate::error::{Error, Result};
use crate::kernels;
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Decoded binary PNM payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub maxval: u16,
    /// Interleaved samples, row-major.
    pub data: Vec<u8>,
}

impl Pnm {
    /// Samples scaled by `maxval` as a planar `[C,H,W]` tensor.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let (c, plane) = (self.channels, self.width * self.height);
        let scale = self.maxval as f32;
        Tensor::from_fn(vec![c, self.height, self.width], |i| {
            let (ch, p) = (i / plane, i % plane);
            self.data[p * c + ch] as f32 / scale
        })
        .expect("PNM dimensions are positive")
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => {
                return Err(Error::TruncatedFile {
                    offset: *pos,
                    needed: 1,
                    available: 0,
                })
            }
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = header_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::UnsupportedFormat(format!("bad PNM {what} {:?}", String::from_utf8_lossy(tok))))
}

/// Parses binary P5/P6 with `maxval ≤ 255`.
pub fn read_pnm(bytes: &[u8]) -> Result<Pnm> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(Error::UnsupportedFormat(
                "not a binary PGM/PPM (expected P5 or P6)".into(),
            ))
        }
    };
    let mut pos = 2;
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("16-bit PNM (maxval {maxval})")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::TruncatedFile {
                offset: pos,
                needed: 1,
                available: 0,
            })
        }
    }
    let needed = width * height * channels;
    let available = bytes.len() - pos;
    if available < needed {
        return Err(Error::TruncatedFile {
            offset: pos,
            needed,
            available,
        });
    }
    Ok(Pnm {
        width,
        height,
        channels,
        maxval: maxval as u16,
        data: bytes[pos..pos + needed].to_vec(),
    })
}

/// `round(255 · v)` with halves rounded up, clamped to `0..=255`.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Linear blue→red ramp: entry `i` is `(i, 0, 255 - i)`.
pub fn colormap(i: u8) -> [u8; 3] {
    [i, 0, 255 - i]
}

fn heatmap_pnm<S: Scalar>(map: &SaliencyMap<S>) -> Pnm {
    Pnm {
        width: map.width(),
        height: map.height(),
        channels: 1,
        maxval: 255,
        data: map.values().data().iter().map(|v| quantize(v.acc())).collect(),
    }
}

/// Writes the map as an 8-bit P5 file.
pub fn write_heatmap<S: Scalar>(map: &SaliencyMap<S>, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &heatmap_pnm(map).encode())
}

/// Blends the colour-mapped heatmap with `image` (a `[3,H,W]` tensor in
/// `[0,1]`, resized to the map if needed) at alpha 0.5 and writes a P6 file.
pub fn overlay<S: Scalar>(map: &SaliencyMap<S>, image: &Tensor<f32>) -> Result<Pnm> {
    let (c, _, _) = image.chw()?;
    if c != 3 {
        return Err(Error::shape(format!("overlay needs a 3-channel image, got {c}")));
    }
    let (h, w) = (map.height(), map.width());
    let image = kernels::bilinear_resize(image, h, w)?;
    let px = image.data();
    let plane = h * w;
    let mut data = Vec::with_capacity(3 * plane);
    for (p, v) in map.values().data().iter().enumerate() {
        let color = colormap(quantize(v.acc()));
        for ch in 0..3 {
            let src = px[ch * plane + p].clamp(0.0, 1.0) as f64 * 255.0;
            data.push((0.5 * src + 0.5 * color[ch] as f64 + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(Pnm {
        width: w,
        height: h,
        channels: 3,
        maxval: 255,
        data,
    })
}

pub fn write_overlay<S: Scalar>(map: &SaliencyMap<S>, image: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &overlay(map, image)?.encode())
}

/// Quantises a `[3,H,W]` (or `[1,H,W]`) tensor in `[0,1]` to a PNM image.
pub fn tensor_to_pnm(t: &Tensor<f32>) -> Result<Pnm> {
    let (c, h, w) = t.chw()?;
    if c != 1 && c != 3 {
        return Err(Error::shape(format!("PNM needs 1 or 3 channels, got {c}")));
    }
    let plane = h * w;
    let data = (0..plane * c)
        .map(|i| quantize(t.data()[(i % c) * plane + i / c] as f64))
        .collect();
    Ok(Pnm {
        width: w,
        height: h,
        channels: c,
        maxval: 255,
        data,
    })
}

/// Loads a P6 PPM (scaled by maxval into `[0,1]`) or an `SCTN` raw `[C,H,W]`
/// tensor (taken as-is).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRecord> {
    let path = path.as_ref();
    let bytes = super::read_file(path)?;
    let pixels = decode_image(&bytes).map_err(|e| e.in_file(path))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ImageRecord {
        id,
        pixels,
        label: None,
        bbox: None,
    })
}

fn decode_image(bytes: &[u8]) -> Result<Tensor<f32>> {
    match bytes.get(..4) {
        Some(b) if b == tensor_file::MAGIC => {
            let t = tensor_file::decode_tensor(bytes)?;
            t.chw()?;
            Ok(t)
        }
        _ => match bytes.get(..2) {
            Some(b"P6") => Ok(read_pnm(bytes)?.to_tensor()),
            Some(b"P5") => Err(Error::UnsupportedFormat(
                "grayscale PGM input; images must be P6 or SCTN".into(),
            )),
            _ => Err(Error::UnsupportedFormat("expected a P6 PPM or SCTN tensor".into())),
        },
    }
}
