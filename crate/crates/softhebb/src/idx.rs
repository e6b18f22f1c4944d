//! IDX files as distributed for MNIST and Fashion-MNIST, raw or gzipped.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};
use softhebb_core::dataset::LabeledDataset;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compression {
    Raw,
    Gzip,
    /// Gzip if the file starts with the gzip signature.
    #[default]
    Detect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn read_bytes(path: &Path, compression: Compression) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let gzip = match compression {
        Compression::Raw => false,
        Compression::Gzip => true,
        Compression::Detect => raw.starts_with(&[0x1f, 0x8b]),
    };
    if !gzip {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(&raw[..])
        .read_to_end(&mut out)
        .map_err(|e| Error::io(path, e))?;
    Ok(out)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| Error::TruncatedFile {
        path: path.into(),
        needed: at + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.into(),
            expected,
            found,
        });
    }
    Ok(())
}

fn body(bytes: &[u8], offset: usize, len: usize, path: &Path) -> Result<Vec<u8>> {
    let needed = offset + len;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            path: path.into(),
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - needed)));
    }
    Ok(bytes[offset..].to_vec())
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let pixels = body(bytes, 16, count * rows * cols, path)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    body(bytes, 8, count, path)
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Loads an image/label file pair. Pixels are scaled by 1/255 and the class
/// count is the largest label plus one. Provenance records each file's
/// SHA-256 (of the bytes on disk).
pub fn load_idx(images_path: &Path, labels_path: &Path, compression: Compression) -> Result<LabeledDataset> {
    let image_bytes = read_bytes(images_path, compression)?;
    let label_bytes = read_bytes(labels_path, compression)?;
    let images = parse_images(&image_bytes, images_path)?;
    let labels = parse_labels(&label_bytes, labels_path)?;
    if images.count != labels.len() {
        return Err(softhebb_core::Error::DimensionMismatch {
            expected: images.count,
            found: labels.len(),
        }
        .into());
    }
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(1);
    let samples = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels = labels.iter().map(|&l| l as usize).collect();
    let mut ds = LabeledDataset::new(images.rows, images.cols, classes, samples, labels)?;
    for p in [images_path, labels_path] {
        ds.provenance.push(format!("{} sha256:{}", p.display(), sha256_file(p)?));
    }
    Ok(ds)
}
