//! Synthetic datasets for controlled experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{check_len, Error, Result};
use crate::spectral::{build_grid, item_rng, Band, NoiseShaper, SpectralWeight};

/// i.i.d. `mean + sqrt(var) z` images; image `i` uses stream `(seed, i)`.
pub fn gen_gaussian_dataset(
    n: usize,
    height: usize,
    width: usize,
    mean: &[f64],
    var: f64,
    clip: bool,
    seed: u64,
) -> Result<Dataset> {
    check_len(height * width, mean.len())?;
    if !(var >= 0.0 && var.is_finite()) {
        return Err(Error::Config(format!("variance must be >= 0, got {var}")));
    }
    let sd = var.sqrt();
    let images: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i as u64);
            mean.iter()
                .map(|m| {
                    let v = m + sd * rng.sample::<f64, _>(StandardNormal);
                    if clip {
                        v.clamp(-1.0, 1.0)
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let meta = DatasetMeta::new("gaussian", "generator")
        .with_seed(seed)
        .with_param("var", var)
        .with_param("clip", clip);
    Dataset::from_f64(meta, height, width, &images)
}

/// Random filled ellipses and rectangles on a dark background, values in
/// `[-1, 1]`.
pub fn gen_shapes_dataset(n: usize, height: usize, width: usize, seed: u64) -> Result<Dataset> {
    let (h, w) = (height as f64, width as f64);
    let images: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i as u64);
            let mut img = vec![-1.0; height * width];
            for _ in 0..rng.random_range(1..=3) {
                let cy = rng.random_range(0.2..0.8) * h;
                let cx = rng.random_range(0.2..0.8) * w;
                let ry = rng.random_range(0.1..0.3) * h;
                let rx = rng.random_range(0.1..0.3) * w;
                let level = rng.random_range(0.0..1.0);
                let ellipse = rng.random_bool(0.5);
                for y in 0..height {
                    for x in 0..width {
                        let dy = (y as f64 + 0.5 - cy) / ry;
                        let dx = (x as f64 + 0.5 - cx) / rx;
                        let inside = if ellipse {
                            dy * dy + dx * dx <= 1.0
                        } else {
                            dy.abs() <= 1.0 && dx.abs() <= 1.0
                        };
                        if inside {
                            img[y * width + x] = level;
                        }
                    }
                }
            }
            img
        })
        .collect();
    let meta = DatasetMeta::new("shapes", "generator").with_seed(seed);
    Dataset::from_f64(meta, height, width, &images)
}

/// Raw band noise `gamma * eps[band]` added after band-limiting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandNoise {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

/// Keep only the spectral band `band` of every source image, then optionally
/// add band noise. Noise for image `i` uses stream `(seed, i)`.
pub fn gen_bandlimited_dataset(source: &Dataset, band: Band, noise: Option<BandNoise>, seed: u64) -> Result<Dataset> {
    band.validate()?;
    let grid = build_grid(source.height(), source.width())?;
    let mask = band.mask(&grid);
    if mask.iter().all(|&m| m == 0.0) {
        return Err(Error::EmptyBand { lo: band.lo, hi: band.hi });
    }
    let shaper = match noise {
        Some(bn) => Some((
            bn.gamma,
            NoiseShaper::new(SpectralWeight::BandPass { a: bn.a, b: bn.b }, &grid, false)?,
        )),
        None => None,
    };
    let images: Vec<Vec<f64>> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let mut img = grid.filter(&source.image_f64(i), &mask)?;
            if let Some((gamma, s)) = &shaper {
                let eps = s.draw(&mut item_rng(seed, i as u64));
                img.iter_mut().zip(&eps).for_each(|(v, e)| *v += gamma * e);
            }
            Ok(img)
        })
        .collect::<Result<_>>()?;
    let mut meta = source.meta().clone();
    meta.name = format!("{}-band", meta.name);
    meta.params.insert("band".into(), format!("[{}, {}]", band.lo, band.hi));
    if let Some(bn) = noise {
        meta.params
            .insert("band_noise".into(), format!("{} * [{}, {}]", bn.gamma, bn.a, bn.b));
        meta.seed = Some(seed);
    }
    let mut out = Dataset::from_f64(meta, source.height(), source.width(), &images)?;
    out.labels = source.labels.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_variance_and_determinism() {
        let mean = vec![0.1; 16];
        let d = gen_gaussian_dataset(10_000, 4, 4, &mean, 0.04, false, 3).unwrap();
        let (m, v) = d.moments();
        assert!((v / 0.04 - 1.0).abs() < 0.05);
        assert!(m.iter().all(|x| (x - 0.1).abs() < 0.01));
        assert_eq!(d, gen_gaussian_dataset(10_000, 4, 4, &mean, 0.04, false, 3).unwrap());
        let point = gen_gaussian_dataset(3, 4, 4, &mean, 0.0, false, 3).unwrap();
        assert!(point.raw().iter().all(|&x| x == 0.1f32));
    }

    #[test]
    fn shapes_are_in_range_and_seeded() {
        let a = gen_shapes_dataset(20, 16, 16, 1).unwrap();
        assert!(a.in_unit_range());
        assert_eq!(a, gen_shapes_dataset(20, 16, 16, 1).unwrap());
        assert_ne!(a, gen_shapes_dataset(20, 16, 16, 2).unwrap());
    }

    #[test]
    fn band_limiting_removes_out_of_band_power() {
        let src = gen_shapes_dataset(10, 28, 28, 4).unwrap();
        let out = gen_bandlimited_dataset(&src, Band::closed(0.0, 0.3), None, 0).unwrap();
        let grid = build_grid(28, 28).unwrap();
        for i in 0..out.len() {
            // Exact in f64; the f32 container adds rounding at ~1e-7 relative
            // amplitude, i.e. ~1e-14 relative power.
            let p = grid.power(&out.image_f64(i)).unwrap();
            let outside: f64 = p.iter().zip(grid.radial()).filter(|(_, &r)| r > 0.3).map(|(p, _)| p).sum();
            assert!(outside / p.iter().sum::<f64>() < 1e-10);
        }
    }

    #[test]
    fn full_band_is_identity() {
        let src = gen_shapes_dataset(5, 16, 16, 4).unwrap();
        let out = gen_bandlimited_dataset(&src, Band::closed(0.0, 1.0), None, 0).unwrap();
        for (a, b) in out.raw().iter().zip(src.raw()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_band_rejected() {
        let src = gen_shapes_dataset(2, 16, 16, 4).unwrap();
        assert!(matches!(
            gen_bandlimited_dataset(&src, Band::closed(0.33, 0.34), None, 0),
            Err(Error::EmptyBand { .. })
        ));
    }

    #[test]
    fn complement_noise_dominates_high_band() {
        let src = gen_shapes_dataset(10, 28, 28, 4).unwrap();
        let noise = BandNoise {
            gamma: 1.0,
            a: 0.3,
            b: 1.0,
        };
        let clean = gen_bandlimited_dataset(&src, Band::closed(0.0, 0.3), None, 0).unwrap();
        let noisy = gen_bandlimited_dataset(&src, Band::closed(0.0, 0.3), Some(noise), 0).unwrap();
        let grid = build_grid(28, 28).unwrap();
        let high = Band {
            lo: 0.3,
            hi: 1.0,
            lo_open: true,
            hi_open: false,
        }
        .mask(&grid);
        let pc = crate::spectral::band_power(clean.to_f64().iter().map(Vec::as_slice), &grid, &high).unwrap();
        let pn = crate::spectral::band_power(noisy.to_f64().iter().map(Vec::as_slice), &grid, &high).unwrap();
        assert!(pn > 1e6 * pc.max(1e-30));
    }
}
