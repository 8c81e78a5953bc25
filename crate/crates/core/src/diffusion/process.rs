use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{strided_steps, DiffusionSchedule};
use crate::error::{check_len, Error, Result};
use crate::spectral::{item_rng, FrequencyGrid, NoiseField, NoiseShaper, SpectralWeight};

/// An epsilon-prediction network (or an analytic stand-in).
pub trait EpsModel: Sync {
    fn predict_eps(&self, x_t: &[f64], t: usize, schedule: &DiffusionSchedule) -> Result<Vec<f64>>;
}

impl<F> EpsModel for F
where
    F: Fn(&[f64], usize, &DiffusionSchedule) -> Vec<f64> + Sync,
{
    fn predict_eps(&self, x_t: &[f64], t: usize, schedule: &DiffusionSchedule) -> Result<Vec<f64>> {
        Ok(self(x_t, t, schedule))
    }
}

/// Noise injected by the reverse process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverseNoise {
    /// Same spectral weight as the forward process.
    #[default]
    Shaped,
    /// Unit white noise regardless of the forward weight.
    White,
    /// No injected noise (`sigma_t = 0`).
    Deterministic,
}

/// One noised sample: the state, its step and the noise that produced it.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub x_t: Vec<f64>,
    pub t: usize,
    pub eps_used: NoiseField,
}

/// A drawn `(t, eps)` pair for one training item.
#[derive(Debug, Clone)]
pub struct TrainingDraw {
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Forward and reverse processes driven by frequency-shaped noise.
#[derive(Debug, Clone)]
pub struct FrequencyDiffusion {
    schedule: DiffusionSchedule,
    shaper: NoiseShaper,
    white: NoiseShaper,
    reverse_noise: ReverseNoise,
}

impl FrequencyDiffusion {
    /// Forward noise is always variance-normalized.
    pub fn new(schedule: DiffusionSchedule, weight: SpectralWeight, grid: &FrequencyGrid) -> Result<Self> {
        let shaper = NoiseShaper::new(weight, grid, true)?;
        if shaper.is_zero() {
            return Err(Error::DegenerateWeight);
        }
        Ok(Self {
            schedule,
            shaper,
            white: NoiseShaper::new(SpectralWeight::Flat, grid, true)?,
            reverse_noise: ReverseNoise::Shaped,
        })
    }

    pub fn with_reverse_noise(mut self, mode: ReverseNoise) -> Self {
        self.reverse_noise = mode;
        self
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    pub fn shaper(&self) -> &NoiseShaper {
        &self.shaper
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.shaper.grid()
    }

    pub fn weight(&self) -> &SpectralWeight {
        self.shaper.weight()
    }

    pub fn reverse_noise(&self) -> ReverseNoise {
        self.reverse_noise
    }

    fn pixels(&self) -> usize {
        self.grid().len()
    }

    /// `x_t = sqrt(alpha_t) x_{t-1} + sqrt(1 - alpha_t) eps`.
    pub fn forward_step(&self, x_prev: &[f64], t: usize, noise: &NoiseField) -> Result<Vec<f64>> {
        forward_step(x_prev, t, &self.schedule, noise)
    }

    /// Closed-form jump `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps^(w)`.
    pub fn forward_jump<R: Rng + ?Sized>(&self, x0: &[f64], t: usize, rng: &mut R) -> Result<TrajectoryPoint> {
        check_len(self.pixels(), x0.len())?;
        self.schedule.check_step(t)?;
        let eps = self.shaper.draw_field(rng);
        let x_t = self.noised(x0, t, &eps.values);
        Ok(TrajectoryPoint { x_t, t, eps_used: eps })
    }

    fn noised(&self, x0: &[f64], t: usize, eps: &[f64]) -> Vec<f64> {
        let ab = self.schedule.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
    }

    /// Uniform step and shaped noise for each of `n` training items.
    pub fn draw_training<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<TrainingDraw> {
        (0..n)
            .map(|_| {
                let t = rng.random_range(0..self.schedule.steps());
                TrainingDraw {
                    t,
                    eps: self.shaper.draw(rng),
                }
            })
            .collect()
    }

    /// `x_t` for a training item given its draw.
    pub fn training_input(&self, x0: &[f64], draw: &TrainingDraw) -> Vec<f64> {
        self.noised(x0, draw.t, &draw.eps)
    }

    /// Mean squared error between the shaped noise and the model's prediction,
    /// averaged over items and pixels.
    pub fn training_loss<M: EpsModel + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &M,
        batch: &[&[f64]],
        rng: &mut R,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let draws = self.draw_training(batch.len(), rng);
        self.loss_for_draws(model, batch, &draws)
    }

    pub fn loss_for_draws<M: EpsModel + ?Sized>(
        &self,
        model: &M,
        batch: &[&[f64]],
        draws: &[TrainingDraw],
    ) -> Result<f64> {
        check_len(batch.len(), draws.len())?;
        let mut total = 0.0;
        for (x0, draw) in batch.iter().zip(draws) {
            check_len(self.pixels(), x0.len())?;
            let x_t = self.training_input(x0, draw);
            let pred = model.predict_eps(&x_t, draw.t, &self.schedule)?;
            total += pred
                .iter()
                .zip(&draw.eps)
                .map(|(p, e)| (p - e) * (p - e))
                .sum::<f64>();
        }
        Ok(total / (batch.len() * self.pixels()) as f64)
    }

    /// One ancestral step `x_t -> x_{t-1}`; no noise is added when landing on 0.
    pub fn reverse_step<M: EpsModel + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &M,
        x_t: &[f64],
        t: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if t == 0 {
            return Err(Error::InvalidStep {
                t,
                steps: self.schedule.steps(),
            });
        }
        self.schedule.check_step(t)?;
        self.transition(model, x_t, t, t - 1, rng)
    }

    /// Reverse transition between two (possibly non-adjacent) steps, using the
    /// effective `alpha = abar_cur / abar_prev` of the skipped segment.
    pub fn transition<M: EpsModel + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &M,
        x: &[f64],
        cur: usize,
        prev: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        check_len(self.pixels(), x.len())?;
        debug_assert!(prev < cur);
        let ab_cur = self.schedule.alpha_bar(cur);
        let ab_prev = self.schedule.alpha_bar(prev);
        let alpha = ab_cur / ab_prev;
        let beta = 1.0 - alpha;
        let eps = model.predict_eps(x, cur, &self.schedule)?;
        check_len(self.pixels(), eps.len())?;
        let k = beta / (1.0 - ab_cur).sqrt();
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        let mut out: Vec<f64> = x
            .iter()
            .zip(&eps)
            .map(|(xv, e)| (xv - k * e) * inv_sqrt_alpha)
            .collect();
        if prev == 0 {
            return Ok(out);
        }
        let sigma = (beta * (1.0 - ab_prev) / (1.0 - ab_cur)).sqrt();
        let z = match self.reverse_noise {
            ReverseNoise::Deterministic => return Ok(out),
            ReverseNoise::Shaped => self.shaper.draw(rng),
            ReverseNoise::White => self.white.draw(rng),
        };
        for (o, zv) in out.iter_mut().zip(&z) {
            *o += sigma * zv;
        }
        Ok(out)
    }

    /// Run the reverse chain from `x` at step `T-1` over the strided steps.
    pub fn denoise_from<M: EpsModel + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &M,
        mut x: Vec<f64>,
        stride: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let steps = strided_steps(self.schedule.steps(), stride);
        for pair in steps.windows(2) {
            x = self.transition(model, &x, pair[0], pair[1], rng)?;
        }
        Ok(x)
    }

    /// Generate `count` images. Image `i` uses stream `(seed, i)`, so the
    /// result does not depend on the number of worker threads.
    pub fn sample<M: EpsModel + ?Sized>(
        &self,
        model: &M,
        count: usize,
        seed: u64,
        stride: usize,
    ) -> Result<Vec<Vec<f64>>> {
        if stride == 0 {
            return Err(Error::Config("sampling stride must be at least 1".into()));
        }
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = item_rng(seed, i as u64);
                let start = self.shaper.draw(&mut rng);
                self.denoise_from(model, start, stride, &mut rng)
            })
            .collect()
    }

    /// `abar` values along the strided subsequence.
    pub fn strided_alpha_bars(&self, stride: usize) -> Vec<f64> {
        strided_steps(self.schedule.steps(), stride)
            .into_iter()
            .map(|t| self.schedule.alpha_bar(t))
            .collect()
    }
}

pub fn forward_step(x_prev: &[f64], t: usize, schedule: &DiffusionSchedule, noise: &NoiseField) -> Result<Vec<f64>> {
    check_len(x_prev.len(), noise.values.len())?;
    schedule.check_step(t)?;
    let a = schedule.alpha(t);
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    Ok(x_prev
        .iter()
        .zip(&noise.values)
        .map(|(x, e)| sa * x + sb * e)
        .collect())
}
