//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use freqdiff::spectral::{FrequencyGrid, NoiseShaper, SpectralWeight};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Amplitude `w(r)` written out from the closed forms.
pub fn oracle_amplitude(weight: &SpectralWeight, r: f64) -> f64 {
    match *weight {
        SpectralWeight::Flat => 1.0,
        SpectralWeight::PowerLaw { alpha } => {
            if r == 0.0 {
                0.0
            } else {
                r.powf(alpha)
            }
        }
        SpectralWeight::ExpDecay { beta } => (-beta * r * r).exp(),
        SpectralWeight::BandPass { a, b } => f64::from(u8::from(a <= r && r <= b)),
        SpectralWeight::TwoBand(_) => panic!("two-band has no single amplitude"),
    }
}

/// Expected per-bin power `E|F(eps)|^2` of normalized noise: the raw density
/// rescaled so that its mean over bins is 1 (unit pixel variance).
pub fn normalized_density(raw: &[f64]) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|d| d / mean).collect()
}

pub fn oracle_density(weight: &SpectralWeight, grid: &FrequencyGrid) -> Vec<f64> {
    let raw: Vec<f64> = match weight {
        SpectralWeight::TwoBand(tb) => grid
            .radial()
            .iter()
            .map(|&r| {
                let low = tb.a_l <= r && (r < tb.b_l || (!tb.low_upper_open && r == tb.b_l));
                let high = (tb.a_h < r || (!tb.high_lower_open && r == tb.a_h)) && r <= tb.b_h;
                f64::from(u8::from(low)) * tb.gamma_l.powi(2) + f64::from(u8::from(high)) * tb.gamma_h.powi(2)
            })
            .collect(),
        w => grid.radial().iter().map(|&r| oracle_amplitude(w, r).powi(2)).collect(),
    };
    normalized_density(&raw)
}

/// Monte-Carlo mean of `|F(eps)|^2` per bin over `draws` normalized fields.
pub fn mc_bin_power(weight: SpectralWeight, grid: &FrequencyGrid, draws: usize, seed: u64) -> Vec<f64> {
    let shaper = NoiseShaper::new(weight, grid, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; grid.len()];
    for _ in 0..draws {
        let field = shaper.draw(&mut rng);
        for (a, p) in acc.iter_mut().zip(grid.power(&field).unwrap()) {
            *a += p;
        }
    }
    acc.iter().map(|a| a / draws as f64).collect()
}

/// Largest relative error over bins whose expected power exceeds
/// `threshold * max`.
pub fn max_rel_error(measured: &[f64], expected: &[f64], threshold: f64) -> f64 {
    let max = expected.iter().cloned().fold(0.0, f64::max);
    measured
        .iter()
        .zip(expected)
        .filter(|(_, e)| **e > threshold * max)
        .map(|(m, e)| (m / e - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Sample mean, variance, skewness and excess kurtosis.
pub fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}
