use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::grid::FrequencyGrid;
use super::weight::{eval_weight, SpectralWeight};
use crate::error::{Error, Result};

/// A real-valued frequency-shaped noise sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub weight: SpectralWeight,
    /// Seed of the stream that produced the field, when it is known.
    pub seed: Option<u64>,
    pub normalized: bool,
}

impl NoiseField {
    pub fn zeros(height: usize, width: usize, weight: SpectralWeight) -> Self {
        Self {
            values: vec![0.0; height * width],
            height,
            width,
            weight,
            seed: None,
            normalized: false,
        }
    }
}

/// Deterministic per-item stream derived from `(seed, index)`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Complex field whose real and imaginary parts are i.i.d. standard normal.
pub fn sample_complex_field<R: Rng + ?Sized>(grid: &FrequencyGrid, rng: &mut R) -> Vec<Complex64> {
    (0..grid.len())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Amplitude {
    Single(Vec<f64>),
    Pair { low: Vec<f64>, high: Vec<f64> },
}

/// Precomputed sampler for `eps^(w) = Re(F^-1(N_freq * w))`.
///
/// With the orthonormal inverse transform every pixel of the raw field has
/// variance `sum(E|F(eps)|^2) / (H W)`, so normalization multiplies by
/// `sqrt(H W / sum(density))`.
#[derive(Debug, Clone)]
pub struct NoiseShaper {
    grid: FrequencyGrid,
    weight: SpectralWeight,
    amplitude: Amplitude,
    density: Vec<f64>,
    scale: f64,
    normalized: bool,
}

impl NoiseShaper {
    pub fn new(weight: SpectralWeight, grid: &FrequencyGrid, normalize: bool) -> Result<Self> {
        weight.validate()?;
        let amplitude = match &weight {
            SpectralWeight::TwoBand(tb) => Amplitude::Pair {
                low: scaled(tb.low_band().mask(grid), tb.gamma_l),
                high: scaled(tb.high_band().mask(grid), tb.gamma_h),
            },
            w => Amplitude::Single(eval_weight(w, grid)?),
        };
        let density = weight.spectral_density(grid)?;
        let total: f64 = density.iter().sum();
        let (scale, normalized) = if !normalize || total == 0.0 {
            (1.0, false)
        } else {
            ((grid.len() as f64 / total).sqrt(), true)
        };
        Ok(Self {
            grid: grid.clone(),
            weight,
            amplitude,
            density,
            scale,
            normalized,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn weight(&self) -> &SpectralWeight {
        &self.weight
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Normalization factor applied to the raw field (1 when disabled).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Whether every bin carries zero weight.
    pub fn is_zero(&self) -> bool {
        self.density.iter().all(|&d| d == 0.0)
    }

    /// Per-bin variance `E|F(eps)|^2` of the emitted field, including the
    /// normalization factor.
    pub fn density(&self) -> Vec<f64> {
        let s2 = self.scale * self.scale;
        self.density.iter().map(|d| d * s2).collect()
    }

    /// Expected per-pixel variance of the emitted field.
    pub fn pixel_variance(&self) -> f64 {
        self.density().iter().sum::<f64>() / self.grid.len() as f64
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut spec = match &self.amplitude {
            Amplitude::Single(w) => {
                let mut n = sample_complex_field(&self.grid, rng);
                for (c, &a) in n.iter_mut().zip(w) {
                    *c *= a * self.scale;
                }
                n
            }
            Amplitude::Pair { low, high } => {
                let n_low = sample_complex_field(&self.grid, rng);
                let n_high = sample_complex_field(&self.grid, rng);
                n_low
                    .iter()
                    .zip(&n_high)
                    .zip(low.iter().zip(high))
                    .map(|((&l, &h), (&al, &ah))| (l * al + h * ah) * self.scale)
                    .collect()
            }
        };
        if self.is_zero() {
            return vec![0.0; self.grid.len()];
        }
        self.grid.fft().inverse(&mut spec);
        spec.into_iter().map(|c| c.re).collect()
    }

    pub fn draw_field<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseField {
        NoiseField {
            values: self.draw(rng),
            height: self.grid.height(),
            width: self.grid.width(),
            weight: self.weight,
            seed: None,
            normalized: self.normalized,
        }
    }

    pub fn draw_seeded(&self, seed: u64) -> NoiseField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NoiseField {
            seed: Some(seed),
            ..self.draw_field(&mut rng)
        }
    }

    /// `count` fields, item `i` drawn from stream `(seed, i)`.
    pub fn draw_batch(&self, seed: u64, count: usize) -> Vec<NoiseField> {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|i| NoiseField {
                seed: Some(seed),
                ..self.draw_field(&mut item_rng(seed, i as u64))
            })
            .collect()
    }
}

fn scaled(mut mask: Vec<f64>, gain: f64) -> Vec<f64> {
    mask.iter_mut().for_each(|m| *m *= gain);
    mask
}

/// Shape white complex noise with a single weighting function.
pub fn shape_noise<R: Rng + ?Sized>(
    weight: &SpectralWeight,
    grid: &FrequencyGrid,
    rng: &mut R,
    normalize: bool,
) -> Result<NoiseField> {
    if matches!(weight, SpectralWeight::TwoBand(_)) {
        return Err(Error::UnsupportedVariant("two_band"));
    }
    Ok(NoiseShaper::new(*weight, grid, normalize)?.draw_field(rng))
}

/// `gamma_l * eps[low] + gamma_h * eps[high]`, drawn as one field with
/// amplitude `sqrt(gamma_l^2 M_low + gamma_h^2 M_high)`. This has the law of
/// the sum over independent base fields, overlaps included.
pub fn two_band_noise<R: Rng + ?Sized>(
    weight: &SpectralWeight,
    grid: &FrequencyGrid,
    rng: &mut R,
    normalize: bool,
) -> Result<NoiseField> {
    let SpectralWeight::TwoBand(tb) = weight else {
        return Err(Error::UnsupportedVariant(weight.name()));
    };
    if normalize && tb.gamma_l == 0.0 && tb.gamma_h == 0.0 {
        return Err(Error::DegenerateWeight);
    }
    Ok(NoiseShaper::new(*weight, grid, normalize)?.draw_field(rng))
}
