//! PGM contact sheets and the `FDNF` float field format.
//!
//! `FDNF` layout: `b"FDNF"`, little-endian `u32` H, W and field count N
//! (16-byte header), then `N*H*W` little-endian `f32` values, row-major.

use std::io::{Read, Write};

use crate::error::{check_len, Error, Result};

pub const FDNF_MAGIC: &[u8; 4] = b"FDNF";

/// `[-1, 1]` to `0..=255`, clamping outside values.
pub fn to_gray8(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// Binary (P5) PGM.
pub fn write_pgm<W: Write>(w: &mut W, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    check_len(height * width, pixels.len())?;
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}

/// Tile images into a grid with `cols` columns and a `pad`-pixel mid-gray
/// border. Returns `(height, width, pixels)`.
pub fn contact_sheet(images: &[Vec<f64>], height: usize, width: usize, cols: usize, pad: usize) -> Result<(usize, usize, Vec<u8>)> {
    if images.is_empty() || cols == 0 {
        return Err(Error::Config("contact sheet needs images and at least one column".into()));
    }
    let cols = cols.min(images.len());
    let rows = images.len().div_ceil(cols);
    let sh = rows * (height + pad) + pad;
    let sw = cols * (width + pad) + pad;
    let mut sheet = vec![128u8; sh * sw];
    for (k, img) in images.iter().enumerate() {
        check_len(height * width, img.len())?;
        let (oy, ox) = ((k / cols) * (height + pad) + pad, (k % cols) * (width + pad) + pad);
        for y in 0..height {
            for x in 0..width {
                sheet[(oy + y) * sw + ox + x] = to_gray8(img[y * width + x]);
            }
        }
    }
    Ok((sh, sw, sheet))
}

pub fn write_fdnf<W: Write>(w: &mut W, height: usize, width: usize, fields: &[&[f64]]) -> Result<()> {
    w.write_all(FDNF_MAGIC)?;
    for v in [height, width, fields.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for f in fields {
        check_len(height * width, f.len())?;
        let mut bytes = Vec::with_capacity(f.len() * 4);
        for &v in *f {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Returns `(height, width, fields)`.
pub fn read_fdnf<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<Vec<f32>>)> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| Error::Truncated {
        what: "FDNF header",
        expected: 16,
        got: 0,
    })?;
    if &head[..4] != FDNF_MAGIC {
        return Err(Error::Format("bad FDNF magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes([head[i], head[i + 1], head[i + 2], head[i + 3]]) as usize;
    let (h, w, n) = (word(4), word(8), word(12));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() < n * h * w * 4 {
        return Err(Error::Truncated {
            what: "FDNF values",
            expected: n * h * w * 4,
            got: body.len(),
        });
    }
    let values: Vec<f32> = body[..n * h * w * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((h, w, values.chunks(h * w).map(<[f32]>::to_vec).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_mapping() {
        assert_eq!(to_gray8(-1.0), 0);
        assert_eq!(to_gray8(1.0), 255);
        assert_eq!(to_gray8(7.0), 255);
        assert_eq!(to_gray8(0.0), 128);
    }

    #[test]
    fn sheet_layout() {
        let imgs = vec![vec![1.0; 4], vec![-1.0; 4], vec![0.0; 4]];
        let (h, w, px) = contact_sheet(&imgs, 2, 2, 2, 1).unwrap();
        assert_eq!((h, w), (7, 7));
        assert_eq!(px[7 + 1], 255);
        assert_eq!(px[7 + 4], 0);
        let mut buf = Vec::new();
        write_pgm(&mut buf, h, w, &px).unwrap();
        assert!(buf.starts_with(b"P5\n7 7\n255\n"));
    }

    #[test]
    fn fdnf_round_trip() {
        let a: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let mut buf = Vec::new();
        write_fdnf(&mut buf, 3, 4, &[&a, &b]).unwrap();
        assert_eq!(buf.len(), 16 + 2 * 12 * 4);
        let (h, w, fields) = read_fdnf(&mut buf.as_slice()).unwrap();
        assert_eq!((h, w, fields.len()), (3, 4, 2));
        assert_eq!(fields[1][3], -(a[3] as f32));
        assert!(read_fdnf(&mut &buf[..30]).is_err());
    }
}
