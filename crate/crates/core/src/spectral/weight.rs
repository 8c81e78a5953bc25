use serde::{Deserialize, Serialize};

use super::grid::FrequencyGrid;
use crate::error::{Error, Result};

/// A radial interval of the normalized frequency coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Band {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lo_open { r > self.lo } else { r >= self.lo };
        let below = if self.hi_open { r < self.hi } else { r <= self.hi };
        above && below
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(self.lo) && in_unit(self.hi) && self.lo <= self.hi) {
            return Err(Error::InvalidBand {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Binary mask of this band over a grid.
    pub fn mask(&self, grid: &FrequencyGrid) -> Vec<f64> {
        grid.radial()
            .iter()
            .map(|&r| if self.contains(r) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Mixture `gamma_l * eps[low] + gamma_h * eps[high]` of two band-limited
/// noise components drawn from independent base fields.
///
/// Edges are closed unless flagged. The high band's lower edge is open by
/// default so that the split `[a, m] + (m, b]` partitions the bins at `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBand {
    pub gamma_l: f64,
    pub gamma_h: f64,
    pub a_l: f64,
    pub b_l: f64,
    pub a_h: f64,
    pub b_h: f64,
    #[serde(default)]
    pub low_upper_open: bool,
    #[serde(default = "default_true")]
    pub high_lower_open: bool,
}

fn default_true() -> bool {
    true
}

impl TwoBand {
    pub fn new(gamma_l: f64, gamma_h: f64, a_l: f64, b_l: f64, a_h: f64, b_h: f64) -> Self {
        Self {
            gamma_l,
            gamma_h,
            a_l,
            b_l,
            a_h,
            b_h,
            low_upper_open: false,
            high_lower_open: true,
        }
    }

    /// The low/high split at radius 0.5 used for gamma sweeps.
    pub fn standard_split(gamma_l: f64) -> Self {
        Self::new(gamma_l, 1.0 - gamma_l, 0.0, 0.5, 0.5, 1.0)
    }

    pub fn low_band(&self) -> Band {
        Band {
            lo: self.a_l,
            hi: self.b_l,
            lo_open: false,
            hi_open: self.low_upper_open,
        }
    }

    pub fn high_band(&self) -> Band {
        Band {
            lo: self.a_h,
            hi: self.b_h,
            lo_open: self.high_lower_open,
            hi_open: false,
        }
    }
}

/// Frequency weighting `w(f)` applied to the spectrum of white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralWeight {
    Flat,
    PowerLaw { alpha: f64 },
    ExpDecay { beta: f64 },
    BandPass { a: f64, b: f64 },
    TwoBand(TwoBand),
}

impl Default for SpectralWeight {
    fn default() -> Self {
        SpectralWeight::Flat
    }
}

impl SpectralWeight {
    pub fn two_band(gamma_l: f64, gamma_h: f64, a_l: f64, b_l: f64, a_h: f64, b_h: f64) -> Self {
        SpectralWeight::TwoBand(TwoBand::new(gamma_l, gamma_h, a_l, b_l, a_h, b_h))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectralWeight::Flat => "flat",
            SpectralWeight::PowerLaw { .. } => "power_law",
            SpectralWeight::ExpDecay { .. } => "exp_decay",
            SpectralWeight::BandPass { .. } => "band_pass",
            SpectralWeight::TwoBand(_) => "two_band",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralWeight::Flat => Ok(()),
            SpectralWeight::PowerLaw { alpha } if alpha.is_finite() => Ok(()),
            SpectralWeight::PowerLaw { alpha } => {
                Err(Error::InvalidWeight(format!("power-law exponent {alpha} is not finite")))
            }
            SpectralWeight::ExpDecay { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            SpectralWeight::ExpDecay { beta } => {
                Err(Error::InvalidWeight(format!("exp-decay rate {beta} must be positive")))
            }
            SpectralWeight::BandPass { a, b } => Band::closed(a, b).validate(),
            SpectralWeight::TwoBand(tb) => {
                for g in [tb.gamma_l, tb.gamma_h] {
                    if !(g >= 0.0 && g.is_finite()) {
                        return Err(Error::InvalidWeight(format!(
                            "two-band gain {g} must be non-negative"
                        )));
                    }
                }
                tb.low_band().validate()?;
                tb.high_band().validate()
            }
        }
    }

    /// Per-bin variance of the noise spectrum `E|F(eps)|^2` before any
    /// normalization. For single weights this is `w^2`; for the two-band
    /// mixture the independent components add: `gl^2 M_l + gh^2 M_h`.
    pub fn spectral_density(&self, grid: &FrequencyGrid) -> Result<Vec<f64>> {
        match self {
            SpectralWeight::TwoBand(tb) => {
                self.validate()?;
                let (low, high) = (tb.low_band(), tb.high_band());
                let (gl2, gh2) = (tb.gamma_l * tb.gamma_l, tb.gamma_h * tb.gamma_h);
                Ok(grid
                    .radial()
                    .iter()
                    .map(|&r| {
                        let mut d = 0.0;
                        if low.contains(r) {
                            d += gl2;
                        }
                        if high.contains(r) {
                            d += gh2;
                        }
                        d
                    })
                    .collect())
            }
            _ => Ok(eval_weight(self, grid)?.into_iter().map(|w| w * w).collect()),
        }
    }

    /// Structured key-value text, e.g. `kind = "band_pass"\na = 0.2\nb = 0.4`.
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("weight serializes to toml")
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let w: SpectralWeight = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }
}

/// Evaluate a single (non-mixture) weighting function on every bin.
///
/// The power law sets the DC bin to zero for any non-zero exponent; the
/// two-band mixture is composed from two band-pass draws and is rejected here.
pub fn eval_weight(weight: &SpectralWeight, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    weight.validate()?;
    let r = grid.radial();
    let out = match *weight {
        SpectralWeight::Flat => vec![1.0; r.len()],
        SpectralWeight::PowerLaw { alpha } => r
            .iter()
            .map(|&d| {
                if alpha == 0.0 {
                    1.0
                } else if d == 0.0 {
                    0.0
                } else {
                    d.powf(alpha)
                }
            })
            .collect(),
        SpectralWeight::ExpDecay { beta } => r.iter().map(|&d| (-beta * d * d).exp()).collect(),
        SpectralWeight::BandPass { a, b } => Band::closed(a, b).mask(grid),
        SpectralWeight::TwoBand(_) => return Err(Error::UnsupportedVariant("two_band")),
    };
    Ok(out)
}
