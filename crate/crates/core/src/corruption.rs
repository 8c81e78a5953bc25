//! Band-limited data corruption and the matching recovery weight.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectral::{item_rng, FrequencyGrid, NoiseShaper, SpectralWeight, TwoBand};

/// `A_c(x) = x + gamma_c * eps[a_c, b_c]` with raw (unnormalized) band noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    #[serde(default = "default_gamma")]
    pub gamma_c: f64,
    pub a_c: f64,
    pub b_c: f64,
}

fn default_gamma() -> f64 {
    1.0
}

impl CorruptionSpec {
    pub fn new(gamma_c: f64, a_c: f64, b_c: f64) -> Result<Self> {
        let spec = Self { gamma_c, a_c, b_c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a_c) || !(0.0..=1.0).contains(&self.b_c) || self.a_c > self.b_c {
            return Err(Error::InvalidBand {
                lo: self.a_c,
                hi: self.b_c,
            });
        }
        if !(self.gamma_c >= 0.0 && self.gamma_c.is_finite()) {
            return Err(Error::InvalidWeight(format!("gamma_c must be >= 0, got {}", self.gamma_c)));
        }
        Ok(())
    }

    pub fn noise_weight(&self) -> SpectralWeight {
        SpectralWeight::BandPass { a: self.a_c, b: self.b_c }
    }
}

/// Draws corruption noise for one grid.
#[derive(Debug, Clone)]
pub struct Corruptor {
    spec: CorruptionSpec,
    shaper: NoiseShaper,
}

impl Corruptor {
    pub fn new(spec: CorruptionSpec, grid: &FrequencyGrid) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            shaper: NoiseShaper::new(spec.noise_weight(), grid, false)?,
        })
    }

    pub fn spec(&self) -> &CorruptionSpec {
        &self.spec
    }

    pub fn corrupt<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        check_len(self.shaper.grid().len(), x.len())?;
        if self.spec.gamma_c == 0.0 {
            return Ok(x.to_vec());
        }
        let noise = self.shaper.draw(rng);
        Ok(x.iter().zip(&noise).map(|(v, n)| v + self.spec.gamma_c * n).collect())
    }

    /// Corrupt every image; image `i` uses stream `(seed, i)`.
    pub fn corrupt_all(&self, images: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
        images
            .par_iter()
            .enumerate()
            .map(|(i, x)| self.corrupt(x, &mut item_rng(seed, i as u64)))
            .collect()
    }
}

pub fn corrupt<R: Rng + ?Sized>(x: &[f64], spec: &CorruptionSpec, grid: &FrequencyGrid, rng: &mut R) -> Result<Vec<f64>> {
    Corruptor::new(*spec, grid)?.corrupt(x, rng)
}

/// Two-band forward weight that leaves the corrupted band noise-free.
///
/// Both recovery bands exclude the corruption band's edge radii, so the
/// supports are disjoint.
pub fn recovery_weight(spec: &CorruptionSpec, gamma_l: f64, gamma_h: f64) -> Result<SpectralWeight> {
    spec.validate()?;
    if spec.a_c == 0.0 && spec.b_c == 1.0 {
        return Err(Error::EmptyRecoverySpectrum);
    }
    let mut tb = TwoBand::new(gamma_l, gamma_h, 0.0, spec.a_c, spec.b_c, 1.0);
    tb.low_upper_open = true;
    tb.high_lower_open = true;
    Ok(SpectralWeight::TwoBand(tb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_grid, Band};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn image(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 13 % 17) as f64 / 8.0) - 1.0).collect()
    }

    #[test]
    fn zero_gamma_is_identity() {
        let grid = build_grid(16, 16).unwrap();
        let x = image(256);
        let spec = CorruptionSpec::new(0.0, 0.5, 0.6).unwrap();
        assert_eq!(corrupt(&x, &spec, &grid, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), x);
    }

    #[test]
    fn corruption_is_confined_to_band() {
        let grid = build_grid(28, 28).unwrap();
        let x = image(784);
        let spec = CorruptionSpec::new(1.0, 0.5, 0.6).unwrap();
        let y = corrupt(&x, &spec, &grid, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let power = grid.power(&diff).unwrap();
        let band = Band::closed(0.5, 0.6);
        let inside: f64 = power.iter().zip(grid.radial()).filter(|(_, &r)| band.contains(r)).map(|(p, _)| p).sum();
        let total: f64 = power.iter().sum();
        assert!(total > 0.0);
        assert!(inside / total > 0.999);
    }

    #[test]
    fn corruption_noise_is_zero_mean() {
        let grid = build_grid(8, 8).unwrap();
        let spec = CorruptionSpec::new(1.0, 0.2, 0.7).unwrap();
        let c = Corruptor::new(spec, &grid).unwrap();
        let zeros = vec![vec![0.0; 64]; 10_000];
        let out = c.corrupt_all(&zeros, 3).unwrap();
        for p in 0..64 {
            let m = out.iter().map(|v| v[p]).sum::<f64>() / 10_000.0;
            assert!(m.abs() < 0.02, "pixel {p} mean {m}");
        }
    }

    #[test]
    fn recovery_bands_omit_corruption() {
        let spec = CorruptionSpec::new(1.0, 0.5, 0.6).unwrap();
        let SpectralWeight::TwoBand(tb) = recovery_weight(&spec, 0.5, 0.5).unwrap() else {
            panic!("expected two-band weight");
        };
        assert_eq!((tb.a_l, tb.b_l, tb.a_h, tb.b_h), (0.0, 0.5, 0.6, 1.0));
        assert!(!tb.low_band().contains(0.5) && !tb.high_band().contains(0.6));

        let edge = CorruptionSpec::new(1.0, 0.0, 0.0).unwrap();
        let SpectralWeight::TwoBand(tb) = recovery_weight(&edge, 0.5, 0.5).unwrap() else {
            panic!("expected two-band weight");
        };
        assert_eq!((tb.a_l, tb.b_l, tb.a_h, tb.b_h), (0.0, 0.0, 0.0, 1.0));

        let full = CorruptionSpec::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(recovery_weight(&full, 0.5, 0.5), Err(Error::EmptyRecoverySpectrum)));
    }

    #[test]
    fn recovery_noise_has_no_power_in_corrupted_band() {
        let grid = build_grid(28, 28).unwrap();
        let spec = CorruptionSpec::new(1.0, 0.5, 0.6).unwrap();
        let weight = recovery_weight(&spec, 0.5, 0.5).unwrap();
        let shaper = NoiseShaper::new(weight, &grid, true).unwrap();
        let band = Band::closed(0.5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let power = grid.power(&shaper.draw(&mut rng)).unwrap();
            let inside: f64 = power.iter().zip(grid.radial()).filter(|(_, &r)| band.contains(r)).map(|(p, _)| p).sum();
            let total: f64 = power.iter().sum();
            assert!(inside / total < 1e-10);
        }
        let corr = NoiseShaper::new(spec.noise_weight(), &grid, false).unwrap();
        for (a, b) in shaper.density().iter().zip(corr.density()) {
            assert!(*a == 0.0 || b == 0.0);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CorruptionSpec::new(1.0, 0.6, 0.5).is_err());
        assert!(CorruptionSpec::new(-1.0, 0.1, 0.5).is_err());
        assert!(CorruptionSpec::new(1.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn spec_defaults_gamma_in_config() {
        let spec: CorruptionSpec = toml::from_str("a_c = 0.5\nb_c = 0.6").unwrap();
        assert_eq!(spec.gamma_c, 1.0);
    }
}
