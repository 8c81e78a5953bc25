//! `FDCK` checkpoint container.
//!
//! Layout (all integers little-endian):
//! `b"FDCK"`, `u32` version, `u32` length + UTF-8 architecture text,
//! `u32` segment count, then per segment `u32` name length, name bytes,
//! `u64` value count and the values as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::Denoiser;
use super::unet::Arch;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FDCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Decoded checkpoint before it is bound to a network type.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCheckpoint {
    pub version: u32,
    pub arch_text: String,
    pub segments: Vec<(String, Vec<f32>)>,
}

impl RawCheckpoint {
    /// Concatenate segment values, checking names and lengths against the
    /// expected layout.
    pub fn flatten(&self, expected: &[(String, usize)]) -> Result<Vec<f32>> {
        if self.segments.len() != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} segments, expected {}",
                self.segments.len(),
                expected.len()
            )));
        }
        let mut flat = Vec::with_capacity(expected.iter().map(|e| e.1).sum());
        for ((name, values), (want, len)) in self.segments.iter().zip(expected) {
            if name != want || values.len() != *len {
                return Err(Error::Format(format!(
                    "segment {name} ({}) does not match expected {want} ({len})",
                    values.len()
                )));
            }
            flat.extend_from_slice(values);
        }
        Ok(flat)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| Error::Format("string too long".into()))?;
    put_u32(w, len)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn take<R: Read, const N: usize>(r: &mut R, what: &'static str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated {
            what,
            expected: N,
            got: 0,
        },
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn take_vec<R: Read>(r: &mut R, len: usize, what: &'static str) -> Result<Vec<u8>> {
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

fn take_str<R: Read>(r: &mut R, what: &'static str) -> Result<String> {
    let len = u32::from_le_bytes(take(r, what)?) as usize;
    String::from_utf8(take_vec(r, len, what)?).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

pub fn write_checkpoint<W: Write>(w: &mut W, arch_text: &str, segments: &[(&str, &[f32])]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_str(w, arch_text)?;
    put_u32(w, segments.len() as u32)?;
    for (name, values) in segments {
        put_str(w, name)?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in *values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<RawCheckpoint> {
    let magic: [u8; 4] = take(r, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = u32::from_le_bytes(take(r, "version")?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let arch_text = take_str(r, "architecture")?;
    let count = u32::from_le_bytes(take(r, "segment count")?) as usize;
    let mut segments = Vec::with_capacity(count);
    for _ in 0..count {
        let name = take_str(r, "segment name")?;
        let len = u64::from_le_bytes(take(r, "segment length")?) as usize;
        let bytes = take_vec(r, len * 4, "segment values")?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        segments.push((name, values));
    }
    Ok(RawCheckpoint {
        version,
        arch_text,
        segments,
    })
}

impl Denoiser<f32> {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let segs: Vec<(&str, &[f32])> = self
            .net()
            .segments()
            .iter()
            .map(|s| (s.name.as_str(), &self.params()[s.range()]))
            .collect();
        write_checkpoint(w, &self.arch().to_text(), &segs)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let raw = read_checkpoint(r)?;
        let arch = Arch::from_text(&raw.arch_text)?;
        let net = super::unet::UNet::new(&arch)?;
        let layout: Vec<(String, usize)> = net.segments().iter().map(|s| (s.name.clone(), s.len)).collect();
        Denoiser::from_params(&arch, raw.flatten(&layout)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Load and require the stored architecture to equal `arch`.
    pub fn load_expecting(path: impl AsRef<Path>, arch: &Arch) -> Result<Self> {
        let model = Self::load(path)?;
        if model.arch() != arch {
            return Err(Error::InvalidArch(format!(
                "checkpoint architecture {:?} does not match expected {:?}",
                model.arch(),
                arch
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::init_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Arch {
        Arch {
            height: 8,
            width: 8,
            widths: vec![4, 8],
            time_dim: 8,
            groups: 2,
        }
    }

    #[test]
    fn round_trip_in_memory() {
        let model: Denoiser<f32> = init_model(&small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"FDCK");
        let back = Denoiser::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(back.arch(), model.arch());
    }

    #[test]
    fn truncated_and_corrupt_inputs_fail() {
        let model: Denoiser<f32> = init_model(&small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(Denoiser::read_from(&mut &cut[..]), Err(Error::Truncated { .. })));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Denoiser::read_from(&mut bad.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_arch_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fdck");
        let model: Denoiser<f32> = init_model(&small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        model.save(&path).unwrap();
        let mut other = small();
        other.widths = vec![4, 4];
        assert!(matches!(
            Denoiser::load_expecting(&path, &other),
            Err(Error::InvalidArch(_))
        ));
        assert!(Denoiser::load_expecting(&path, &small()).is_ok());
    }
}
