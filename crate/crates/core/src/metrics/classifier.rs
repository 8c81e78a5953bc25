//! Small convolutional digit classifier whose hidden layer serves as the
//! feature embedding for FID/KID.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::denoiser::layers::{avg_pool2, avg_pool2_backward, silu, silu_backward, Conv, ConvCache, LayoutBuilder, Linear};
use crate::denoiser::{clip_grad_norm, read_checkpoint, write_checkpoint, Adam, Scalar, TrainConfig};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierArch {
    pub kind: String,
    pub height: usize,
    pub width: usize,
    pub c1: usize,
    pub c2: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl ClassifierArch {
    pub fn small(height: usize, width: usize, classes: usize) -> Self {
        Self {
            kind: "classifier".into(),
            height,
            width,
            c1: 8,
            c2: 16,
            hidden: 64,
            classes,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind != "classifier" {
            return Err(Error::InvalidArch(format!("not a classifier descriptor: {}", self.kind)));
        }
        if [self.c1, self.c2, self.hidden, self.classes].contains(&0) {
            return Err(Error::InvalidArch(format!("zero-width layer in {self:?}")));
        }
        if self.height % 4 != 0 || self.width % 4 != 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArch(format!(
                "{}x{} input is not divisible by 4",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Layers {
    conv1: Conv,
    conv2: Conv,
    fc1: Linear,
    fc2: Linear,
    layout: LayoutBuilder,
}

struct Cache<T> {
    c1: ConvCache<T>,
    a1: Vec<T>,
    c2: ConvCache<T>,
    a2: Vec<T>,
    flat: Vec<T>,
    z: Vec<T>,
    feat: Vec<T>,
}

impl Layers {
    fn new(arch: &ClassifierArch) -> Result<Self> {
        arch.validate()?;
        let mut lb = LayoutBuilder::default();
        let conv1 = Conv::new(&mut lb, "conv1", 1, arch.c1, 3);
        let conv2 = Conv::new(&mut lb, "conv2", arch.c1, arch.c2, 3);
        let flat = arch.c2 * (arch.height / 4) * (arch.width / 4);
        let fc1 = Linear::new(&mut lb, "fc1", flat, arch.hidden);
        let fc2 = Linear::new(&mut lb, "fc2", arch.hidden, arch.classes);
        Ok(Self {
            conv1,
            conv2,
            fc1,
            fc2,
            layout: lb,
        })
    }

    fn forward<T: Scalar>(&self, arch: &ClassifierArch, p: &[T], x: &[T]) -> (Vec<T>, Cache<T>) {
        let (h, w) = (arch.height, arch.width);
        let (z1, c1) = self.conv1.forward(p, x, h, w);
        let a1 = z1;
        let p1 = avg_pool2(&silu(&a1), arch.c1, h, w);
        let (z2, c2) = self.conv2.forward(p, &p1, h / 2, w / 2);
        let a2 = z2;
        let flat = avg_pool2(&silu(&a2), arch.c2, h / 2, w / 2);
        let z = self.fc1.forward(p, &flat);
        let feat = silu(&z);
        let logits = self.fc2.forward(p, &feat);
        (
            logits,
            Cache {
                c1,
                a1,
                c2,
                a2,
                flat,
                z,
                feat,
            },
        )
    }

    fn backward<T: Scalar>(&self, arch: &ClassifierArch, p: &[T], g: &mut [T], cache: &Cache<T>, dlogits: &[T]) {
        let (h, w) = (arch.height, arch.width);
        let dfeat = self.fc2.backward(p, g, &cache.feat, dlogits);
        let dz = silu_backward(&cache.z, &dfeat);
        let dflat = self.fc1.backward(p, g, &cache.flat, &dz);
        let ds2 = avg_pool2_backward(&dflat, arch.c2, h / 2, w / 2);
        let da2 = silu_backward(&cache.a2, &ds2);
        let dp1 = self.conv2.backward(p, g, &cache.c2, &da2);
        let ds1 = avg_pool2_backward(&dp1, arch.c1, h, w);
        let da1 = silu_backward(&cache.a1, &ds1);
        self.conv1.backward(p, g, &cache.c1, &da1);
    }
}

/// Softmax cross-entropy and its gradient with respect to the logits.
fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> (f64, Vec<T>) {
    let max = logits.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label].f64() - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| T::of(e / sum - if k == label { 1.0 } else { 0.0 }))
        .collect();
    (loss, grad)
}

/// Trained classifier; `features` returns the hidden-layer activations.
#[derive(Debug, Clone)]
pub struct Classifier<T: Scalar = f32> {
    arch: ClassifierArch,
    layers: Layers,
    params: Vec<T>,
}

impl<T: Scalar> Classifier<T> {
    pub fn init(arch: &ClassifierArch, seed: u64) -> Result<Self> {
        let layers = Layers::new(arch)?;
        let params = layers.layout.init_params(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self {
            arch: arch.clone(),
            layers,
            params,
        })
    }

    pub fn from_params(arch: &ClassifierArch, params: Vec<T>) -> Result<Self> {
        let layers = Layers::new(arch)?;
        check_len(layers.layout.total, params.len())?;
        Ok(Self {
            arch: arch.clone(),
            layers,
            params,
        })
    }

    pub fn arch(&self) -> &ClassifierArch {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn feature_dim(&self) -> usize {
        self.arch.hidden
    }

    fn input(&self, image: &[f64]) -> Result<Vec<T>> {
        check_len(self.arch.height * self.arch.width, image.len())?;
        Ok(image.iter().map(|&v| T::of(v)).collect())
    }

    pub fn features(&self, image: &[f64]) -> Result<Vec<f64>> {
        let (_, cache) = self.layers.forward(&self.arch, &self.params, &self.input(image)?);
        Ok(cache.feat.iter().map(|v| v.f64()).collect())
    }

    pub fn predict(&self, image: &[f64]) -> Result<usize> {
        let (logits, _) = self.layers.forward(&self.arch, &self.params, &self.input(image)?);
        Ok(logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
            .map(|(k, _)| k)
            .unwrap_or(0))
    }

    /// Mean cross-entropy over `(image, label)` pairs and its gradient.
    pub fn loss_and_grad(&self, images: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<T>)> {
        check_len(images.len(), labels.len())?;
        let mut grad = vec![T::zero(); self.params.len()];
        let mut loss = 0.0;
        let scale = T::of(1.0 / images.len() as f64);
        for (img, &label) in images.iter().zip(labels) {
            if label >= self.arch.classes {
                return Err(Error::Config(format!("label {label} out of range")));
            }
            let (logits, cache) = self.layers.forward(&self.arch, &self.params, &self.input(img)?);
            let (l, mut d) = cross_entropy(&logits, label);
            loss += l / images.len() as f64;
            d.iter_mut().for_each(|v| *v *= scale);
            self.layers.backward(&self.arch, &self.params, &mut grad, &cache, &d);
        }
        Ok((loss, grad))
    }
}

impl Classifier<f32> {
    /// Minibatch Adam on a labelled dataset. Returns per-epoch mean loss.
    pub fn train(arch: &ClassifierArch, data: &Dataset, config: &TrainConfig) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let labels = data
            .labels()
            .ok_or_else(|| Error::Config("classifier training needs labels".into()))?;
        let images = data.to_f64();
        let mut model = Self::init(arch, config.seed)?;
        let mut opt = Adam::new(model.params.len(), config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..images.len()).collect();
        let mut curve = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                let xs: Vec<&[f64]> = batch.iter().map(|&i| images[i].as_slice()).collect();
                let ys: Vec<usize> = batch.iter().map(|&i| labels[i] as usize).collect();
                let (loss, mut grad) = model.loss_and_grad(&xs, &ys)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        step: 0,
                        param_norm: model.params.iter().map(|p| f64::from(*p).powi(2)).sum::<f64>().sqrt(),
                    });
                }
                clip_grad_norm(&mut grad, config.clip_norm);
                opt.update(&mut model.params, &grad);
                total += loss * batch.len() as f64;
            }
            curve.push(total / images.len() as f64);
        }
        Ok((model, curve))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = data
            .labels()
            .ok_or_else(|| Error::Config("accuracy needs labels".into()))?;
        let mut hits = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            if self.predict(&data.image_f64(i))? == label as usize {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let text = toml::to_string(&self.arch).map_err(|e| Error::Format(e.to_string()))?;
        let segs: Vec<(&str, &[f32])> = self
            .layers
            .layout
            .segments
            .iter()
            .map(|s| (s.name.as_str(), &self.params[s.range()]))
            .collect();
        write_checkpoint(w, &text, &segs)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let raw = read_checkpoint(r)?;
        let arch: ClassifierArch =
            toml::from_str(&raw.arch_text).map_err(|e| Error::Format(format!("bad classifier descriptor: {e}")))?;
        let layers = Layers::new(&arch)?;
        let layout: Vec<(String, usize)> = layers.layout.segments.iter().map(|s| (s.name.clone(), s.len)).collect();
        Self::from_params(&arch, raw.flatten(&layout)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetMeta;
    use rand::Rng;

    fn stripes(n: usize) -> Dataset {
        // Class 0: horizontal stripes, class 1: vertical stripes.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let phase = rng.random_range(0..4);
            for y in 0..8 {
                for x in 0..8 {
                    let k = if label == 0 { y } else { x };
                    images.push(if (k + phase) % 4 < 2 { 1.0 } else { -1.0 });
                }
            }
            labels.push(label);
        }
        Dataset::new(DatasetMeta::new("stripes", "unit"), 8, 8, images, Some(labels)).unwrap()
    }

    fn arch() -> ClassifierArch {
        ClassifierArch {
            c1: 4,
            c2: 4,
            hidden: 8,
            ..ClassifierArch::small(8, 8, 2)
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model: Classifier<f64> = Classifier::init(&arch(), 3).unwrap();
        let data = stripes(3);
        let imgs = data.to_f64();
        let xs: Vec<&[f64]> = imgs.iter().map(Vec::as_slice).collect();
        let ys = [0, 1, 0];
        let (_, grad) = model.loss_and_grad(&xs, &ys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let d: Vec<f64> = (0..grad.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at = |s: f64| {
                let p = model.params().iter().zip(&d).map(|(p, d)| p + s * d).collect();
                Classifier::from_params(&arch(), p).unwrap().loss_and_grad(&xs, &ys).unwrap().0
            };
            let h = 1e-5;
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an: f64 = grad.iter().zip(&d).map(|(g, d)| g * d).sum();
            assert!((fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()).max(1e-8), "{fd} vs {an}");
        }
    }

    #[test]
    fn learns_stripes_and_round_trips() {
        let data = stripes(64);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 8,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let (model, curve) = Classifier::train(&arch(), &data, &cfg).unwrap();
        assert!(curve.last().unwrap() < &curve[0]);
        assert!(model.accuracy(&data).unwrap() > 0.95);
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = Classifier::read_from(&mut buf.as_slice()).unwrap();
        let img = data.image_f64(5);
        assert_eq!(back.features(&img).unwrap(), model.features(&img).unwrap());
        assert!(crate::denoiser::Denoiser::read_from(&mut buf.as_slice()).is_err());
    }
}
