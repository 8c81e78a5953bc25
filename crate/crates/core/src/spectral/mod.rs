//! Frequency-shaped Gaussian noise.
//!
//! White complex noise is drawn per DFT bin, scaled by a radial weighting
//! `w(f)` and transformed back to the spatial domain, keeping the real part.

mod fft;
mod grid;
mod noise;
mod spectrum;
mod weight;

pub use fft::Fft2;
pub use grid::{build_grid, signed_index, FrequencyGrid};
pub use noise::{item_rng, sample_complex_field, shape_noise, two_band_noise, NoiseField, NoiseShaper};
pub use spectrum::{annulus_index, band_power, radial_power_spectrum, SpectrumBin};
pub use weight::{eval_weight, Band, SpectralWeight, TwoBand};
