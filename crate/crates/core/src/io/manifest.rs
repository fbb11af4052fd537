//! Tab-separated dataset manifests: `image_path<TAB>label[<TAB>x,y,w,h]`.
//!
//! Relative image paths resolve against the manifest's directory. Blank lines
//! are ignored.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Axis-aligned box in pixel units: columns `x..x+w`, rows `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.y..self.y + self.h).contains(&row) && (self.x..self.x + self.w).contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    /// `[C,H,W]` in `[0,1]`.
    pub pixels: Tensor<f32>,
    pub label: Option<usize>,
    pub bbox: Option<BBox>,
}

/// A parsed manifest line, before the image is loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    pub path: PathBuf,
    pub label: usize,
    pub bbox: Option<BBox>,
}

fn parse_bbox(field: &str) -> Option<BBox> {
    let parts: Vec<usize> = field.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [x, y, w, h] => Some(BBox { x, y, w, h }),
        _ => None,
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!(
                "expected 2 or 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() {
            return Err(err("empty image path".into()));
        }
        let label = fields[1]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad label index {:?}", fields[1])))?;
        let bbox = match fields.get(2) {
            Some(f) => Some(parse_bbox(f).ok_or_else(|| err(format!("bad bbox {f:?}, expected x,y,w,h")))?),
            None => None,
        };
        entries.push(ManifestEntry {
            line,
            path: PathBuf::from(fields[0]),
            label,
            bbox,
        });
    }
    Ok(entries)
}

/// Parses the manifest and loads every referenced image.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries = parse_manifest(&text).map_err(|e| e.in_file(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .into_iter()
        .map(|entry| {
            let image_path = base.join(&entry.path);
            let mut record = super::load_image(&image_path)?;
            let (_, h, w) = record.pixels.chw()?;
            if let Some(b) = entry.bbox {
                if !b.fits(h, w) {
                    return Err(Error::Parse {
                        line: entry.line,
                        message: format!("bbox {b:?} outside the {w}x{h} image"),
                    }
                    .in_file(path));
                }
            }
            record.label = Some(entry.label);
            record.bbox = entry.bbox;
            Ok(record)
        })
        .collect()
}
