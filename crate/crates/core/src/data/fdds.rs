//! `FDDS` dataset container.
//!
//! `b"FDDS"`, little-endian `u32` N, H, W, `N*H*W` little-endian `f32`
//! pixels, then a `u32` length and UTF-8 TOML metadata (provenance and
//! optional labels).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};

pub const FDDS_MAGIC: &[u8; 4] = b"FDDS";

#[derive(Serialize, Deserialize)]
struct Trailer {
    meta: DatasetMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u8>>,
}

pub fn write_fdds<W: Write>(w: &mut W, data: &Dataset) -> Result<()> {
    w.write_all(FDDS_MAGIC)?;
    for v in [data.len(), data.height(), data.width()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let mut bytes = Vec::with_capacity(data.raw().len() * 4);
    for v in data.raw() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    let trailer = Trailer {
        meta: data.meta().clone(),
        labels: data.labels().map(<[u8]>::to_vec),
    };
    let text = toml::to_string(&trailer).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, len: usize, what: &'static str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::Truncated {
            what,
            expected: len,
            got: buf.len(),
        });
    }
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<usize> {
    let b = read_exact(r, 4, what)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
}

pub fn read_fdds<R: Read>(r: &mut R) -> Result<Dataset> {
    let magic = read_exact(r, 4, "FDDS magic")?;
    if magic != FDDS_MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:?}")));
    }
    let n = read_u32(r, "FDDS header")?;
    let h = read_u32(r, "FDDS header")?;
    let w = read_u32(r, "FDDS header")?;
    let bytes = read_exact(r, n * h * w * 4, "FDDS pixels")?;
    let images = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let len = read_u32(r, "FDDS metadata length")?;
    let text = String::from_utf8(read_exact(r, len, "FDDS metadata")?)
        .map_err(|_| Error::Format("dataset metadata is not UTF-8".into()))?;
    let trailer: Trailer = toml::from_str(&text).map_err(|e| Error::Format(format!("dataset metadata: {e}")))?;
    Dataset::new(trailer.meta, h, w, images, trailer.labels)
}

pub fn save_fdds(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fdds(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn load_fdds(path: impl AsRef<Path>) -> Result<Dataset> {
    read_fdds(&mut BufReader::new(File::open(path)?))
}
