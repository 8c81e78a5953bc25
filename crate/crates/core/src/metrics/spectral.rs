use rayon::prelude::*;

use super::frechet::fid;
use crate::error::{check_len, Error, Result};
use crate::spectral::{annulus_index, FrequencyGrid};

/// Power floor added before taking logs: the per-bin power of uniform 8-bit
/// quantization noise on `[-1, 1]`, `(2/255)^2 / 12`. Power below it is not
/// observable in an 8-bit image.
pub const LOG_POWER_FLOOR: f64 = (2.0 / 255.0) * (2.0 / 255.0) / 12.0;

/// Per-image radial profile `log(mean annulus power + floor)`; annuli with
/// no frequency bins are dropped.
pub fn radial_log_profile(image: &[f64], grid: &FrequencyGrid, n_bins: usize) -> Result<Vec<f64>> {
    check_len(grid.len(), image.len())?;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (p, &r) in grid.power(image)?.iter().zip(grid.radial()) {
        let k = annulus_index(r, n_bins);
        sums[k] += p;
        counts[k] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (s / c as f64 + LOG_POWER_FLOOR).ln())
        .collect())
}

/// Fréchet distance between Gaussian fits of the radial log-power profiles
/// of two image sets.
pub fn spectral_fid(images_real: &[Vec<f64>], images_gen: &[Vec<f64>], grid: &FrequencyGrid, n_bins: usize) -> Result<f64> {
    if n_bins < 4 {
        return Err(Error::Metric(format!("spectral_fid needs at least 4 bins, got {n_bins}")));
    }
    let profiles = |set: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        set.par_iter().map(|img| radial_log_profile(img, grid, n_bins)).collect()
    };
    fid(&profiles(images_real)?, &profiles(images_gen)?)
}
