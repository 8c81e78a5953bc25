use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Denoiser, EpsExample};
use super::scalar::Scalar;
use crate::diffusion::FrequencyDiffusion;
use crate::error::{Error, Result};

/// Minibatch gradients are split into this many fixed chunks and reduced in
/// chunk order, so results do not depend on the worker count.
const GRAD_CHUNKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    /// Decay of the exponential moving average of the weights; the averaged
    /// weights are returned when positive. 0 disables averaging.
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 1.0,
            ema_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_eps > 0.0
            && self.clip_norm > 0.0
            && (0.0..1.0).contains(&self.ema_decay);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, config: &TrainConfig) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
        }
    }

    pub fn update(&mut self, params: &mut [T], grad: &[T]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let step_size = T::of(self.lr / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let eps = T::of(self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
        }
    }
}

/// Rescale `grad` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_grad_norm<T: Scalar>(grad: &mut [T], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g.f64() * g.f64()).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = T::of(max_norm / norm);
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn content_key(image: &[f64], salt: u64) -> u64 {
    image
        .iter()
        .fold(mix(salt), |h, v| mix(h ^ v.to_bits()))
}

/// Epoch order keyed on image content, so the visiting sequence (and with it
/// the loss curve) does not depend on how the dataset happens to be ordered.
pub fn epoch_order(data: &[Vec<f64>], seed: u64, epoch: usize) -> Vec<usize> {
    let salt = mix(seed ^ mix(epoch as u64 + 1));
    let mut keyed: Vec<(u64, usize)> = data
        .iter()
        .enumerate()
        .map(|(i, img)| (content_key(img, salt), i))
        .collect();
    keyed.sort_by_key(|&(k, _)| k);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Train with shuffled minibatches, Adam and gradient clipping. Returns the
/// mean training loss of every epoch (of the live, not the averaged, weights).
pub fn train(
    mut model: Denoiser<f32>,
    data: &[Vec<f64>],
    diffusion: &FrequencyDiffusion,
    config: &TrainConfig,
) -> Result<(Denoiser<f32>, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let steps = diffusion.schedule().steps();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(model.param_count(), config);
    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    let mut ema = (config.ema_decay > 0.0).then(|| model.params().to_vec());
    for epoch in 0..config.epochs {
        let order = epoch_order(data, config.seed, epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let draws = diffusion.draw_training(batch.len(), &mut rng);
            let inputs: Vec<Vec<f64>> = batch
                .iter()
                .zip(&draws)
                .map(|(&i, d)| diffusion.training_input(&data[i], d))
                .collect();
            let examples: Vec<EpsExample<'_>> = inputs
                .iter()
                .zip(&draws)
                .map(|(x, d)| EpsExample {
                    x_t: x,
                    t: d.t,
                    eps: &d.eps,
                })
                .collect();
            let (loss, mut grad) = batch_grad(&model, &examples, steps)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    param_norm: model.param_norm(),
                });
            }
            clip_grad_norm(&mut grad, config.clip_norm);
            opt.update(model.params_mut(), &grad);
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    step,
                    param_norm: model.param_norm(),
                });
            }
            if let Some(avg) = ema.as_mut() {
                // Short warm-up so early weights do not dominate the average.
                let d = config.ema_decay.min((1.0 + step as f64) / (10.0 + step as f64)) as f32;
                for (a, &p) in avg.iter_mut().zip(model.params()) {
                    *a = d * *a + (1.0 - d) * p;
                }
            }
            epoch_loss += loss * batch.len() as f64;
            step += 1;
        }
        curve.push(epoch_loss / data.len() as f64);
    }
    if let Some(avg) = ema {
        model.params_mut().copy_from_slice(&avg);
    }
    Ok((model, curve))
}

/// Mean loss and gradient over a minibatch, reduced in fixed chunk order.
pub fn batch_grad<T: Scalar>(
    model: &Denoiser<T>,
    examples: &[EpsExample<'_>],
    steps: usize,
) -> Result<(f64, Vec<T>)> {
    let chunk = examples.len().div_ceil(GRAD_CHUNKS).max(1);
    let denom = examples.len();
    let parts: Vec<Result<(f64, Vec<T>)>> = examples
        .par_chunks(chunk)
        .map(|part| {
            let mut g = vec![T::zero(); model.param_count()];
            let l = model.accumulate_grad(part, steps, denom, &mut g)?;
            Ok((l, g))
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![T::zero(); model.param_count()];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += *b);
    }
    Ok((loss, grad))
}
