use crate::diffusion::{DiffusionSchedule, EpsModel};
use crate::error::{check_len, Result};
use crate::spectral::NoiseShaper;

/// Exact conditional-mean noise predictor for data `x_0 ~ N(mean, var I)`.
///
/// Signal and shaped noise are independent and diagonal in the frequency
/// domain, so `E[eps | x_t]` is a per-bin shrinkage of
/// `F(x_t - sqrt(abar) mean)`.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    shaper: NoiseShaper,
    mean: Vec<f64>,
    var: f64,
}

impl GaussianOracle {
    pub fn new(shaper: NoiseShaper, mean: Vec<f64>, var: f64) -> Result<Self> {
        check_len(shaper.grid().len(), mean.len())?;
        if !(var >= 0.0 && var.is_finite()) {
            return Err(crate::Error::Config(format!("data variance must be >= 0, got {var}")));
        }
        Ok(Self { shaper, mean, var })
    }

    /// Per-bin gain applied to `F(x_t - sqrt(abar) mean)`.
    pub fn gains(&self, alpha_bar: f64) -> Vec<f64> {
        let noise_var = 1.0 - alpha_bar;
        self.shaper
            .density()
            .iter()
            .map(|&s| {
                let den = alpha_bar * self.var + noise_var * s;
                if den > 0.0 {
                    noise_var.sqrt() * s / den
                } else {
                    0.0
                }
            })
            .collect()
    }
}

impl EpsModel for GaussianOracle {
    fn predict_eps(&self, x_t: &[f64], t: usize, schedule: &DiffusionSchedule) -> Result<Vec<f64>> {
        schedule.check_step(t)?;
        check_len(self.mean.len(), x_t.len())?;
        let ab = schedule.alpha_bar(t);
        let root = ab.sqrt();
        let centered: Vec<f64> = x_t.iter().zip(&self.mean).map(|(x, m)| x - root * m).collect();
        self.shaper.grid().filter(&centered, &self.gains(ab))
    }
}

/// Convenience wrapper around [`GaussianOracle`].
pub fn oracle_eps_gaussian(
    x_t: &[f64],
    t: usize,
    schedule: &DiffusionSchedule,
    shaper: &NoiseShaper,
    data_mean: &[f64],
    data_var: f64,
) -> Result<Vec<f64>> {
    GaussianOracle::new(shaper.clone(), data_mean.to_vec(), data_var)?.predict_eps(x_t, t, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ScheduleParams;
    use crate::spectral::{build_grid, SpectralWeight};

    fn setup(weight: SpectralWeight) -> (DiffusionSchedule, NoiseShaper) {
        let grid = build_grid(8, 8).unwrap();
        let schedule = ScheduleParams::scaled_linear(50).build().unwrap();
        (schedule, NoiseShaper::new(weight, &grid, true).unwrap())
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3).collect()
    }

    #[test]
    fn flat_weight_matches_scalar_conditional_mean() {
        let (schedule, shaper) = setup(SpectralWeight::Flat);
        let x = ramp(64);
        let zero = vec![0.0; 64];
        for t in [0, 10, 49] {
            let ab = schedule.alpha_bar(t);
            let got = oracle_eps_gaussian(&x, t, &schedule, &shaper, &zero, 1.0).unwrap();
            for (g, xv) in got.iter().zip(&x) {
                let expect = (1.0 - ab).sqrt() * xv / (ab + (1.0 - ab));
                assert!((g - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_attributes_deviation_to_noise() {
        let (schedule, shaper) = setup(SpectralWeight::BandPass { a: 0.0, b: 0.5 });
        let mean: Vec<f64> = ramp(64).iter().map(|v| v * 0.5).collect();
        let x = ramp(64);
        let t = 20;
        let ab = schedule.alpha_bar(t);
        let got = oracle_eps_gaussian(&x, t, &schedule, &shaper, &mean, 0.0).unwrap();
        let dev: Vec<f64> = x
            .iter()
            .zip(&mean)
            .map(|(x, m)| (x - ab.sqrt() * m) / (1.0 - ab).sqrt())
            .collect();
        let support: Vec<f64> = shaper.density().iter().map(|&d| f64::from(d > 0.0)).collect();
        let expect = shaper.grid().filter(&dev, &support).unwrap();
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-10);
        }
    }
}
