pub mod config;
pub mod corruption;
pub mod data;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod spectral;

pub use error::{Error, Result};
