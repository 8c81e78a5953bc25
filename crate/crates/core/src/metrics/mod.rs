//! FID, KID and spectral distances over pluggable feature extractors.

mod classifier;
mod features;
mod frechet;
mod kid;
mod report;
mod spectral;

pub use classifier::{Classifier, ClassifierArch};
pub use features::{Extractor, FeatureExtractor};
pub use frechet::{fid, fit_gaussian, frechet_distance, sqrt_psd, GaussianFit, COV_RIDGE};
pub use kid::{kid, mmd2_unbiased, KidEstimate};
pub use report::{evaluate, EvalOptions, MetricReport};
pub use spectral::{radial_log_profile, spectral_fid, LOG_POWER_FLOOR};
