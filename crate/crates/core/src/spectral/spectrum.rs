use serde::Serialize;

use super::grid::FrequencyGrid;
use crate::error::{check_len, Result};

/// One annulus of a radially averaged power spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBin {
    pub center: f64,
    /// Mean `|F(x)|^2` over the bins of the annulus (and over images).
    pub power: f64,
    /// Number of frequency bins falling in the annulus.
    pub count: usize,
    pub empty: bool,
}

/// Annulus index of radial coordinate `r` for `n_bins` equal-width annuli on
/// `[0, 1]`; `r = 1` belongs to the last annulus.
pub fn annulus_index(r: f64, n_bins: usize) -> usize {
    ((r * n_bins as f64) as usize).min(n_bins - 1)
}

/// Average per-bin power over annuli of the normalized radial coordinate,
/// pooled over every image in `images` (each `H*W`, row-major).
pub fn radial_power_spectrum<'a, I>(images: I, grid: &FrequencyGrid, n_bins: usize) -> Result<Vec<SpectrumBin>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    assert!(n_bins >= 2, "radial spectrum needs at least two annuli");
    let index: Vec<usize> = grid.radial().iter().map(|&r| annulus_index(r, n_bins)).collect();
    let mut counts = vec![0usize; n_bins];
    for &k in &index {
        counts[k] += 1;
    }
    let mut sums = vec![0.0; n_bins];
    let mut n_images = 0usize;
    for image in images {
        check_len(grid.len(), image.len())?;
        for (p, &k) in grid.power(image)?.iter().zip(&index) {
            sums[k] += p;
        }
        n_images += 1;
    }
    let width = 1.0 / n_bins as f64;
    Ok((0..n_bins)
        .map(|k| {
            let empty = counts[k] == 0 || n_images == 0;
            SpectrumBin {
                center: (k as f64 + 0.5) * width,
                power: if empty {
                    0.0
                } else {
                    sums[k] / (counts[k] * n_images) as f64
                },
                count: counts[k],
                empty,
            }
        })
        .collect())
}

/// Mean per-bin power of `images` over the frequency bins selected by `mask`.
pub fn band_power<'a, I>(images: I, grid: &FrequencyGrid, mask: &[f64]) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    check_len(grid.len(), mask.len())?;
    let selected = mask.iter().filter(|&&m| m != 0.0).count();
    if selected == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for image in images {
        total += grid
            .power(image)?
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m != 0.0)
            .map(|(p, _)| p)
            .sum::<f64>();
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / (selected * n) as f64 })
}
