//! Run configuration: everything a command needs, serialized as TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionSpec;
use crate::data::{gen_bandlimited_dataset, gen_gaussian_dataset, gen_shapes_dataset, load_fdds, load_mnist_idx, BandNoise, Dataset};
use crate::denoiser::{Arch, TrainConfig};
use crate::diffusion::{DiffusionSchedule, ReverseNoise, ScheduleParams};
use crate::error::{Error, Result};
use crate::metrics::{EvalOptions, FeatureExtractor};
use crate::spectral::{Band, SpectralWeight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Idx {
        images: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    Fdds {
        path: PathBuf,
    },
    /// `mean + ramp * (x / (W - 1) - 1/2) + sqrt(var) z`
    Gaussian {
        height: usize,
        width: usize,
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        ramp: f64,
        var: f64,
        #[serde(default)]
        clip: bool,
    },
    Shapes {
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub source: DatasetSource,
    /// Training images, taken from the front of the source.
    pub n_train: usize,
    /// Held-out reference images that follow the training images.
    #[serde(default)]
    pub n_reference: usize,
    /// Keep only this radial band of every image.
    #[serde(default)]
    pub band: Option<[f64; 2]>,
    #[serde(default)]
    pub band_noise: Option<BandNoise>,
    #[serde(default)]
    pub seed: u64,
}

/// Training and held-out reference images.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub reference: Dataset,
}

impl DatasetSpec {
    fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Load or generate the dataset; relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<DataSplit> {
        let total = self.n_train + self.n_reference;
        if self.n_train == 0 {
            return Err(Error::Config("dataset.n_train must be positive".into()));
        }
        let full = match &self.source {
            DatasetSource::Idx { images, labels } => {
                let labels = labels.as_ref().map(|l| self.resolve(base, l));
                load_mnist_idx(self.resolve(base, images), labels.as_deref())?
            }
            DatasetSource::Fdds { path } => load_fdds(self.resolve(base, path))?,
            DatasetSource::Gaussian {
                height,
                width,
                mean,
                ramp,
                var,
                clip,
            } => {
                let m: Vec<f64> = (0..height * width)
                    .map(|i| {
                        let x = (i % width) as f64 / (*width as f64 - 1.0).max(1.0);
                        mean + ramp * (x - 0.5)
                    })
                    .collect();
                gen_gaussian_dataset(total, *height, *width, &m, *var, *clip, self.seed)?
            }
            DatasetSource::Shapes { height, width } => gen_shapes_dataset(total, *height, *width, self.seed)?,
        };
        if full.len() < total {
            return Err(Error::Config(format!(
                "dataset has {} images, {} requested",
                full.len(),
                total
            )));
        }
        let full = full.take(total)?;
        let full = match self.band {
            Some([a, b]) => gen_bandlimited_dataset(&full, Band::closed(a, b), self.band_noise, self.seed)?,
            None => full,
        };
        let train_idx: Vec<usize> = (0..self.n_train).collect();
        let ref_idx: Vec<usize> = (self.n_train..total).collect();
        Ok(DataSplit {
            train: full.select(&train_idx)?,
            reference: full.select(&ref_idx)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub steps: usize,
    /// Defaults to the 1000-step endpoints rescaled by `1000 / steps`.
    #[serde(default)]
    pub beta_start: Option<f64>,
    #[serde(default)]
    pub beta_end: Option<f64>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            steps: 200,
            beta_start: None,
            beta_end: None,
        }
    }
}

impl ScheduleSpec {
    pub fn params(&self) -> ScheduleParams {
        let scaled = ScheduleParams::scaled_linear(self.steps);
        ScheduleParams {
            steps: self.steps,
            beta_start: self.beta_start.unwrap_or(scaled.beta_start),
            beta_end: self.beta_end.unwrap_or(scaled.beta_end),
        }
    }

    pub fn build(&self) -> Result<DiffusionSchedule> {
        self.params().build()
    }
}

/// Network shape; the resolution comes from the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub widths: Vec<usize>,
    pub time_dim: usize,
    pub groups: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        let a = Arch::desk(28, 28);
        Self {
            widths: a.widths,
            time_dim: a.time_dim,
            groups: a.groups,
        }
    }
}

impl ArchSpec {
    pub fn at(&self, height: usize, width: usize) -> Arch {
        Arch {
            height,
            width,
            widths: self.widths.clone(),
            time_dim: self.time_dim,
            groups: self.groups,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub count: usize,
    pub stride: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { count: 200, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSpec {
    pub extractor: FeatureExtractor,
    #[serde(flatten)]
    pub options: EvalOptions,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            extractor: FeatureExtractor::TrainedClassifier {
                checkpoint: PathBuf::from("classifier.fdck"),
            },
            options: EvalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub gammas: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            gammas: (1..10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverSpec {
    pub grid: Vec<CorruptionSpec>,
    pub gamma_l: f64,
    pub gamma_h: f64,
}

impl Default for RecoverSpec {
    fn default() -> Self {
        Self {
            grid: (1..9)
                .map(|k| CorruptionSpec {
                    gamma_c: 1.0,
                    a_c: k as f64 / 10.0,
                    b_c: (k + 1) as f64 / 10.0,
                })
                .collect(),
            gamma_l: 0.5,
            gamma_h: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumSpec {
    pub timesteps: Vec<usize>,
    pub n_bins: usize,
    pub count: usize,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            timesteps: vec![0, 50, 100, 150, 199],
            n_bins: 14,
            count: 256,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub weight: SpectralWeight,
    #[serde(default)]
    pub reverse_noise: ReverseNoise,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub arch: ArchSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub corruption: Option<CorruptionSpec>,
    #[serde(default)]
    pub sample: SampleSpec,
    #[serde(default)]
    pub eval: EvalSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub recover: RecoverSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    /// Directory that relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.sample.stride == 0 {
            return Err(Error::Config("sample.stride must be at least 1".into()));
        }
        self.train.validate()?;
        self.schedule.build()?;
        if let Some(c) = &self.corruption {
            c.validate()?;
        }
        for c in &self.recover.grid {
            c.validate()?;
        }
        if self.sweep.gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(Error::Config("sweep gammas must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
