//! IDX reader for MNIST-family image/label pairs.
//!
//! Layout: big-endian `u32` magic, big-endian `u32` dimension sizes, raw bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, Matrix};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

fn parse_images(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let magic = read_u32_be(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4, "images")? as usize;
    let rows = read_u32_be(bytes, 8, "images")? as usize;
    let cols = read_u32_be(bytes, 12, "images")? as usize;
    let n_features = rows
        .checked_mul(cols)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("images: invalid dimensions {rows}x{cols}")))?;
    let need = count
        .checked_mul(n_features)
        .ok_or_else(|| Error::Format("images: size overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "images: truncated, header declares {need} pixel bytes but {} present",
            payload.len()
        )));
    }
    Ok((count, n_features, &payload[..need]))
}

fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32_be(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4, "labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Format(format!(
            "labels: truncated, header declares {count} labels but {} present",
            payload.len()
        )));
    }
    Ok(&payload[..count])
}

/// Parses an in-memory IDX image/label pair.
pub(crate) fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let (count, n_features, pixels) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != count {
        return Err(Error::Format(format!(
            "image count {count} does not match label count {}",
            labels.len()
        )));
    }
    if count == 0 {
        return Err(Error::Format("IDX files contain no samples".into()));
    }
    let features = Matrix::new(
        count,
        n_features,
        pixels.iter().map(|&p| p as f32).collect(),
    )?;
    let labels: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
    let n_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    Dataset::new(features, labels, n_classes)
}

/// Loads an IDX image file (magic `0x803`) and its label file (magic `0x801`).
///
/// Pixels are widened to `f32` without rescaling.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx(&images, &labels)
}

/// Loads several IDX pairs and concatenates them (e.g. MNIST train + t10k).
pub fn load_idx_pairs<P: AsRef<Path>>(pairs: &[(P, P)]) -> Result<Dataset> {
    let mut iter = pairs.iter();
    let (img, lbl) = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("no IDX files given".into()))?;
    let mut out = load_idx(img, lbl)?;
    for (img, lbl) in iter {
        out = out.concat(&load_idx(img, lbl)?)?;
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn encode_idx(rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let count = labels.len() as u32;
    let mut img = Vec::new();
    for v in [IMAGES_MAGIC, count, rows, cols] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lbl = Vec::new();
    for v in [LABELS_MAGIC, count] {
        lbl.extend_from_slice(&v.to_be_bytes());
    }
    lbl.extend_from_slice(labels);
    (img, lbl)
}
