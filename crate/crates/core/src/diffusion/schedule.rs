use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-beta schedule parameters as stored in run configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleParams {
    /// The 1000-step DDPM endpoints, rescaled so that the integrated noise
    /// `sum(beta)` stays the same for any step count.
    pub fn scaled_linear(steps: usize) -> Self {
        let k = 1000.0 / steps as f64;
        Self {
            steps,
            beta_start: 1e-4 * k,
            beta_end: 0.02 * k,
        }
    }

    pub fn build(&self) -> Result<DiffusionSchedule> {
        make_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

/// Variance schedule over `T` steps indexed `0..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if steps < 2 {
        return Err(Error::InvalidSchedule(format!("need at least 2 steps, got {steps}")));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "require 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|t| beta_start + (beta_end - beta_start) * t as f64 / (steps - 1) as f64)
        .collect();
    DiffusionSchedule::from_betas(betas)
}

impl DiffusionSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidSchedule("betas must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, &a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t < self.steps() {
            Ok(())
        } else {
            Err(Error::InvalidStep {
                t,
                steps: self.steps(),
            })
        }
    }

    /// Posterior variance of `q(x_{t-1} | x_t, x_0)` for `t >= 1`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.betas[t] * (1.0 - self.alpha_bars[t - 1]) / (1.0 - self.alpha_bars[t])
    }
}

/// Descending step indices `T-1, T-1-s, ...` always ending at 0.
pub fn strided_steps(steps: usize, stride: usize) -> Vec<usize> {
    assert!(stride >= 1, "stride must be positive");
    let mut seq: Vec<usize> = (1..steps).rev().step_by(stride).collect();
    seq.push(0);
    seq
}
