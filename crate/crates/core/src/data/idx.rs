//! IDX binary format (the MNIST distribution format).
//!
//! Images: `u32 magic = 2051, u32 count, u32 rows, u32 cols`, then
//! `count·rows·cols` unsigned bytes. Labels: `u32 magic = 2049, u32 count`,
//! then `count` bytes. All integers big-endian. Files ending in `.gz` are
//! decompressed transparently.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::matrix::Matrix;
use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn idx_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Idx {
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| idx_err(offset, "truncated header"))
}

fn payload(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    let available = bytes.len().saturating_sub(offset);
    if available < len {
        return Err(idx_err(
            bytes.len(),
            format!("truncated payload: expected {len} bytes, found {available}"),
        ));
    }
    if available > len {
        return Err(idx_err(offset + len, "trailing bytes after payload"));
    }
    Ok(&bytes[offset..])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(idx_err(0, format!("bad image magic {magic}, expected {IMAGES_MAGIC}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| idx_err(4, "image dimensions overflow"))?;
    let pixels = payload(bytes, 16, len)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(idx_err(0, format!("bad label magic {magic}, expected {LABELS_MAGIC}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an image/label IDX pair as a 10-class dataset with pixels scaled to [0, 1].
pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let images = parse_idx_images(&read_maybe_gz(images_path)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    mnist_dataset(&images, &labels, images_path.display().to_string())
}

pub(crate) fn mnist_dataset(images: &IdxImages, labels: &[u8], name: String) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(idx_err(
            4,
            format!("{} images but {} labels", images.count, labels.len()),
        ));
    }
    if images.count == 0 {
        return Err(Error::Empty("IDX files contain no samples".into()));
    }
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(idx_err(8 + pos, format!("label {} outside 0..=9", labels[pos])));
    }
    let n_in = images.rows * images.cols;
    let inputs = Matrix::new(
        images.count,
        n_in,
        images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    Dataset::classification(name, inputs, labels.iter().map(|&l| usize::from(l)).collect(), 10)
}
