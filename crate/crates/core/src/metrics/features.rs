use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::Classifier;
use crate::error::{check_len, Error, Result};

/// Serializable description of a feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureExtractor {
    RawPixels,
    RandomProjection { dim: usize, seed: u64 },
    TrainedClassifier { checkpoint: PathBuf },
}

impl FeatureExtractor {
    pub fn identifier(&self) -> String {
        match self {
            Self::RawPixels => "raw_pixels".into(),
            Self::RandomProjection { dim, seed } => format!("random_projection(dim={dim},seed={seed})"),
            Self::TrainedClassifier { checkpoint } => format!("trained_classifier({})", checkpoint.display()),
        }
    }

    /// Resolve into a ready-to-run extractor for `pixels`-sized images.
    pub fn build(&self, pixels: usize) -> Result<Extractor> {
        let kind = match self {
            Self::RawPixels => Kind::Raw,
            Self::RandomProjection { dim, seed } => {
                if *dim == 0 {
                    return Err(Error::Config("random projection needs dim > 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let scale = 1.0 / (pixels as f64).sqrt();
                let m = (0..dim * pixels)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect();
                Kind::Projection { dim: *dim, m }
            }
            Self::TrainedClassifier { checkpoint } => {
                let c = Classifier::load(checkpoint)?;
                check_len(pixels, c.arch().height * c.arch().width)?;
                Kind::Classifier(c)
            }
        };
        Ok(Extractor {
            spec: self.clone(),
            pixels,
            kind,
        })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Raw,
    Projection { dim: usize, m: Vec<f64> },
    Classifier(Classifier),
}

/// A deterministic image to feature-vector map.
#[derive(Debug, Clone)]
pub struct Extractor {
    spec: FeatureExtractor,
    pixels: usize,
    kind: Kind,
}

impl Extractor {
    pub fn from_classifier(classifier: Classifier, checkpoint: PathBuf) -> Self {
        let a = classifier.arch();
        Self {
            pixels: a.height * a.width,
            spec: FeatureExtractor::TrainedClassifier { checkpoint },
            kind: Kind::Classifier(classifier),
        }
    }

    pub fn spec(&self) -> &FeatureExtractor {
        &self.spec
    }

    pub fn identifier(&self) -> String {
        self.spec.identifier()
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            Kind::Raw => self.pixels,
            Kind::Projection { dim, .. } => *dim,
            Kind::Classifier(c) => c.feature_dim(),
        }
    }

    pub fn extract(&self, image: &[f64]) -> Result<Vec<f64>> {
        check_len(self.pixels, image.len())?;
        match &self.kind {
            Kind::Raw => Ok(image.to_vec()),
            Kind::Projection { m, .. } => Ok(m
                .chunks(self.pixels)
                .map(|row| row.iter().zip(image).map(|(a, b)| a * b).sum())
                .collect()),
            Kind::Classifier(c) => c.features(image),
        }
    }

    pub fn extract_all(&self, images: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        images.par_iter().map(|img| self.extract(img)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_deterministic_and_linear() {
        let e = FeatureExtractor::RandomProjection { dim: 5, seed: 9 }.build(16).unwrap();
        let a: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let fa = e.extract(&a).unwrap();
        let fb = e.extract(&b).unwrap();
        assert_eq!(fa.len(), 5);
        assert_eq!(e.output_dim(), 5);
        for (x, y) in fa.iter().zip(&fb) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
        let again = FeatureExtractor::RandomProjection { dim: 5, seed: 9 }.build(16).unwrap();
        assert_eq!(again.extract(&a).unwrap(), fa);
    }

    #[test]
    fn raw_pixels_checks_length() {
        let e = FeatureExtractor::RawPixels.build(4).unwrap();
        assert_eq!(e.extract(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(e.extract(&[1.0]).is_err());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let s = toml::to_string(&FeatureExtractor::RandomProjection { dim: 3, seed: 1 }).unwrap();
        assert!(s.contains("kind = \"random_projection\""));
        let back: FeatureExtractor = toml::from_str(&s).unwrap();
        assert_eq!(back, FeatureExtractor::RandomProjection { dim: 3, seed: 1 });
    }
}
