//! Datasets, file formats and synthetic generators.

mod export;
mod fdds;
mod idx;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use export::{contact_sheet, read_fdnf, to_gray8, write_fdnf, write_pgm, FDNF_MAGIC};
pub use fdds::{load_fdds, read_fdds, save_fdds, write_fdds, FDDS_MAGIC};
pub use idx::{load_mnist_idx, parse_idx_images, parse_idx_labels, read_maybe_gz, write_idx_images, write_idx_labels};
pub use synth::{gen_bandlimited_dataset, gen_gaussian_dataset, gen_shapes_dataset, BandNoise};

/// Where a dataset came from and how it was made.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl DatasetMeta {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            source: source.into(),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// `N` single-channel `H x W` images stored as row-major `f32`.
///
/// Loaded images lie in `[-1, 1]`; generated or corrupted sets may leave
/// that range (see [`Dataset::in_unit_range`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    meta: DatasetMeta,
    height: usize,
    width: usize,
    images: Vec<f32>,
    labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, height: usize, width: usize, images: Vec<f32>, labels: Option<Vec<u8>>) -> Result<Self> {
        let pixels = height * width;
        if pixels == 0 {
            return Err(Error::InvalidDimension { height, width });
        }
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if images.len() % pixels != 0 {
            return Err(Error::ShapeMismatch {
                expected: pixels * (images.len() / pixels + 1),
                got: images.len(),
            });
        }
        if let Some(l) = &labels {
            check_len(images.len() / pixels, l.len())?;
        }
        Ok(Self {
            meta,
            height,
            width,
            images,
            labels,
        })
    }

    pub fn from_f64(meta: DatasetMeta, height: usize, width: usize, images: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(images.len() * height * width);
        for img in images {
            check_len(height * width, img.len())?;
            flat.extend(img.iter().map(|&v| v as f32));
        }
        Self::new(meta, height, width, flat, None)
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut DatasetMeta {
        &mut self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.images.len() / self.pixels()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn raw(&self) -> &[f32] {
        &self.images
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let p = self.pixels();
        &self.images[i * p..(i + 1) * p]
    }

    pub fn image_f64(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.image_f64(i)).collect()
    }

    pub fn in_unit_range(&self) -> bool {
        self.images.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    /// The images at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut images = Vec::with_capacity(indices.len() * self.pixels());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Config(format!("image index {i} out of range {}", self.len())));
            }
            images.extend_from_slice(self.image(i));
        }
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(self.meta.clone(), self.height, self.width, images, labels)
    }

    /// The first `n` images (all of them if `n` exceeds the length).
    pub fn take(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Mean image and mean per-pixel variance.
    pub fn moments(&self) -> (Vec<f64>, f64) {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.pixels()];
        for i in 0..self.len() {
            mean.iter_mut().zip(self.image(i)).for_each(|(m, &v)| *m += f64::from(v) / n);
        }
        let mut var = 0.0;
        for i in 0..self.len() {
            var += self
                .image(i)
                .iter()
                .zip(&mean)
                .map(|(&v, m)| (f64::from(v) - m).powi(2))
                .sum::<f64>();
        }
        (mean, var / (n * self.pixels() as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        let meta = DatasetMeta::new("t", "test");
        assert!(matches!(Dataset::new(meta.clone(), 2, 2, vec![], None), Err(Error::EmptyDataset)));
        assert!(Dataset::new(meta.clone(), 2, 2, vec![0.0; 6], None).is_err());
        assert!(Dataset::new(meta.clone(), 2, 2, vec![0.0; 8], Some(vec![1])).is_err());
        let d = Dataset::new(meta, 2, 2, (0..8).map(|v| v as f32 / 8.0).collect(), Some(vec![3, 4])).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.image(1), &[0.5, 0.625, 0.75, 0.875]);
        let s = d.select(&[1, 1, 0]).unwrap();
        assert_eq!(s.labels(), Some(&[4u8, 4, 3][..]));
        assert!(d.in_unit_range());
    }
}
