//! Big-endian IDX files (MNIST), optionally gzip-compressed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Read a file, transparently inflating it when it starts with the gzip
/// signature.
pub fn read_maybe_gz(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            what,
            expected: at + 4,
            got: bytes.len(),
        })
}

/// Returns `(count, height, width, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "IDX header")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, "IDX header")? as usize;
    let h = be_u32(bytes, 8, "IDX header")? as usize;
    let w = be_u32(bytes, 12, "IDX header")? as usize;
    let need = n * h * w;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Truncated {
            what: "IDX image data",
            expected: need,
            got: body.len(),
        });
    }
    Ok((n, h, w, &body[..need]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "IDX header")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, "IDX header")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Truncated {
            what: "IDX label data",
            expected: n,
            got: body.len(),
        });
    }
    Ok(&body[..n])
}

/// Bytes `0..=255` map linearly onto `[-1, 1]`.
pub(crate) fn byte_to_unit(b: u8) -> f32 {
    (f64::from(b) / 127.5 - 1.0) as f32
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: Option<&Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let bytes = read_maybe_gz(images_path)?;
    let (n, h, w, pixels) = parse_idx_images(&bytes)?;
    let labels = match labels_path {
        Some(p) => {
            let lb = read_maybe_gz(p)?;
            let labels = parse_idx_labels(&lb)?.to_vec();
            if labels.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    got: labels.len(),
                });
            }
            Some(labels)
        }
        None => None,
    };
    let meta = DatasetMeta::new("mnist", "idx").with_param("path", images_path.display());
    Dataset::new(meta, h, w, pixels.iter().map(|&b| byte_to_unit(b)).collect(), labels)
}

pub fn write_idx_images<W: Write>(w: &mut W, n: usize, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    crate::error::check_len(n * height * width, pixels.len())?;
    for v in [IMAGES_MAGIC, n as u32, height as u32, width as u32] {
        w.write_all(&v.to_be_bytes())?;
    }
    w.write_all(pixels)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(w: &mut W, labels: &[u8]) -> Result<()> {
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}
