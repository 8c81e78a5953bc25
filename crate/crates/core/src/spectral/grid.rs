use std::sync::Arc;

use num_complex::Complex64;

use super::fft::Fft2;
use crate::error::{Error, Result};

/// Normalized radial frequency coordinate for every bin of an `H x W` DFT.
///
/// Bins are stored in the unshifted FFT layout (DC at index 0). Each index is
/// mapped to a signed frequency in `(-1/2, 1/2]`, and the Euclidean distance
/// from DC is divided by the largest attainable distance so that DC sits at 0
/// and the Nyquist corner at 1.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    height: usize,
    width: usize,
    radial: Vec<f64>,
    fft: Arc<Fft2>,
}

/// Signed frequency index of DFT bin `k` out of `n`, in `(-n/2, n/2]`.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn build_grid(height: usize, width: usize) -> Result<FrequencyGrid> {
    if height < 2 || width < 2 {
        return Err(Error::InvalidDimension { height, width });
    }
    // radial^2 = (sx^2/W^2 + sy^2/H^2) / (mx^2/W^2 + my^2/H^2). Multiplying
    // through by W^2 H^2 keeps everything integral, so bins that sit exactly on
    // a band edge (e.g. radius 0.5) land there without rounding drift.
    let (h2, w2) = ((height * height) as u64, (width * width) as u64);
    let mx = (width / 2) as u64;
    let my = (height / 2) as u64;
    let denom = (mx * mx * h2 + my * my * w2) as f64;
    let mut radial = Vec::with_capacity(height * width);
    for ky in 0..height {
        let sy = signed_index(ky, height).unsigned_abs();
        for kx in 0..width {
            let sx = signed_index(kx, width).unsigned_abs();
            let num = (sx * sx * h2 + sy * sy * w2) as f64;
            radial.push((num / denom).sqrt());
        }
    }
    Ok(FrequencyGrid {
        height,
        width,
        radial,
        fft: Arc::new(Fft2::new(height, width)),
    })
}

impl FrequencyGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        build_grid(height, width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radial(&self) -> &[f64] {
        &self.radial
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Index of the bin conjugate to `idx` (the bin at `-k`).
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (ky, kx) = (idx / self.width, idx % self.width);
        let cy = (self.height - ky) % self.height;
        let cx = (self.width - kx) % self.width;
        cy * self.width + cx
    }

    /// Per-bin power `|F(x)|^2` of a real image under the orthonormal DFT.
    pub fn power(&self, image: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.len(), image.len())?;
        Ok(self
            .fft
            .forward_real(image)
            .iter()
            .map(Complex64::norm_sqr)
            .collect())
    }

    /// Multiply each frequency bin of `image` by `gain` and return the real
    /// part of the filtered image.
    pub fn filter(&self, image: &[f64], gain: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.len(), image.len())?;
        crate::error::check_len(self.len(), gain.len())?;
        let mut spec = self.fft.forward_real(image);
        for (c, &g) in spec.iter_mut().zip(gain) {
            *c *= g;
        }
        Ok(self.fft.inverse_real(spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_dimensions() {
        assert!(matches!(build_grid(1, 4), Err(Error::InvalidDimension { .. })));
        assert!(matches!(build_grid(4, 0), Err(Error::InvalidDimension { .. })));
    }

    #[test]
    fn dc_and_nyquist_corner() {
        let g = build_grid(4, 4).unwrap();
        assert_eq!(g.radial()[0], 0.0);
        // Nyquist corner is (ky, kx) = (2, 2).
        assert_eq!(g.radial()[2 * 4 + 2], 1.0);
        assert!(g.radial().iter().all(|&r| (0.0..=1.0).contains(&r)));
    }

    #[test]
    fn matches_brute_force_8x8() {
        let g = build_grid(8, 8).unwrap();
        // Direct double loop over signed frequencies in (-0.5, 0.5].
        let signed = |k: usize, n: usize| {
            let f = k as f64 / n as f64;
            if f > 0.5 {
                f - 1.0
            } else {
                f
            }
        };
        let mut raw = vec![0.0; 64];
        let mut r_max: f64 = 0.0;
        for ky in 0..8 {
            for kx in 0..8 {
                let (u, v) = (signed(kx, 8), signed(ky, 8));
                let d = (u * u + v * v).sqrt();
                raw[ky * 8 + kx] = d;
                r_max = r_max.max(d);
            }
        }
        for (i, (&got, &d)) in g.radial().iter().zip(&raw).enumerate() {
            assert!((got - d / r_max).abs() < 1e-12, "bin {i}: {got} vs {}", d / r_max);
        }
    }

    #[test]
    fn conjugate_symmetry_rectangular_odd() {
        for &(h, w) in &[(5usize, 7usize), (6, 9), (28, 28), (3, 2)] {
            let g = build_grid(h, w).unwrap();
            for i in 0..g.len() {
                assert_eq!(g.radial()[i], g.radial()[g.conjugate_index(i)]);
            }
            let max = g.radial().iter().cloned().fold(0.0, f64::max);
            assert_eq!(max, 1.0);
        }
    }

    #[test]
    fn half_radius_is_exact() {
        // (8, 8) on a 32x32 grid is exactly at radius 0.5.
        let g = build_grid(32, 32).unwrap();
        assert_eq!(g.radial()[8 * 32 + 8], 0.5);
    }
}
