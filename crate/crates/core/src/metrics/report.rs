use serde::{Deserialize, Serialize};

use super::features::Extractor;
use super::frechet::fid;
use super::kid::kid;
use super::spectral::spectral_fid;
use crate::error::{Error, Result};
use crate::spectral::FrequencyGrid;

/// Knobs for a full evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub kid_subset_size: usize,
    pub kid_subsets: usize,
    pub spectral_bins: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            kid_subset_size: 100,
            kid_subsets: 50,
            spectral_bins: 14,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: f64,
    pub kid: f64,
    pub kid_stderr: f64,
    pub spectral_fid: f64,
    pub n_real: usize,
    pub n_gen: usize,
    pub extractor: String,
}

impl MetricReport {
    /// One `[[evaluation]]` TOML record, suitable for appending to a results file.
    pub fn to_record(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Wrap<'a> {
            evaluation: [&'a MetricReport; 1],
        }
        toml::to_string(&Wrap { evaluation: [self] }).map_err(|e| Error::Format(e.to_string()))
    }
}

/// FID and KID in `extractor` feature space plus spectral FID on raw images.
pub fn evaluate(
    real: &[Vec<f64>],
    gen: &[Vec<f64>],
    extractor: &Extractor,
    grid: &FrequencyGrid,
    options: &EvalOptions,
) -> Result<MetricReport> {
    if real.len() < 2 || gen.len() < 2 {
        return Err(Error::Metric("evaluation needs at least 2 real and 2 generated images".into()));
    }
    let fr = extractor.extract_all(real)?;
    let fg = extractor.extract_all(gen)?;
    let subset = options.kid_subset_size.min(real.len()).min(gen.len());
    let k = kid(&fr, &fg, subset, options.kid_subsets, options.seed)?;
    Ok(MetricReport {
        fid: fid(&fr, &fg)?,
        kid: k.mean,
        kid_stderr: k.stderr,
        spectral_fid: spectral_fid(real, gen, grid, options.spectral_bins)?,
        n_real: real.len(),
        n_gen: gen.len(),
        extractor: extractor.identifier(),
    })
}
