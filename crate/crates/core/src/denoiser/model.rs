use rand::Rng;

use super::scalar::Scalar;
use super::unet::{Arch, UNet};
use crate::diffusion::{DiffusionSchedule, EpsModel};
use crate::error::{check_len, Result};

/// Epsilon-prediction network: layer layout plus a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Denoiser<T: Scalar = f32> {
    net: UNet,
    params: Vec<T>,
}

/// The 32-bit model used for training and sampling.
pub type DenoiserModel = Denoiser<f32>;

/// Fan-in scaled uniform initialization; deterministic under `rng`.
pub fn init_model<T: Scalar, R: Rng + ?Sized>(arch: &Arch, rng: &mut R) -> Result<Denoiser<T>> {
    let net = UNet::new(arch)?;
    let params = net.layout().init_params(rng);
    Ok(Denoiser { net, params })
}

/// One supervised example: predict `eps` from `x_t` at step `t`.
#[derive(Debug, Clone)]
pub struct EpsExample<'a> {
    pub x_t: &'a [f64],
    pub t: usize,
    pub eps: &'a [f64],
}

impl<T: Scalar> Denoiser<T> {
    pub fn from_params(arch: &Arch, params: Vec<T>) -> Result<Self> {
        let net = UNet::new(arch)?;
        check_len(net.param_count(), params.len())?;
        Ok(Self { net, params })
    }

    pub fn arch(&self) -> &Arch {
        self.net.arch()
    }

    pub fn net(&self) -> &UNet {
        &self.net
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_norm(&self) -> f64 {
        self.params.iter().map(|p| p.f64() * p.f64()).sum::<f64>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> Denoiser<U> {
        Denoiser {
            net: self.net.clone(),
            params: self.params.iter().map(|p| U::of(p.f64())).collect(),
        }
    }

    fn pixels(&self) -> usize {
        self.arch().height * self.arch().width
    }

    pub fn predict(&self, x_t: &[f64], t: usize, steps: usize) -> Result<Vec<f64>> {
        check_len(self.pixels(), x_t.len())?;
        let x: Vec<T> = x_t.iter().map(|&v| T::of(v)).collect();
        let (y, _) = self
            .net
            .forward(&self.params, &x, UNet::time_position(t, steps));
        Ok(y.into_iter().map(Scalar::f64).collect())
    }

    /// Mean squared error over `examples` (averaged over items and pixels)
    /// and its gradient, accumulated in example order.
    pub fn loss_and_grad(&self, examples: &[EpsExample<'_>], steps: usize) -> Result<(f64, Vec<T>)> {
        let mut grad = vec![T::zero(); self.params.len()];
        let loss = self.accumulate_grad(examples, steps, examples.len(), &mut grad)?;
        Ok((loss, grad))
    }

    /// Adds the gradient of `sum_i mse_i / denom` into `grad` and returns the
    /// corresponding loss contribution.
    pub(crate) fn accumulate_grad(
        &self,
        examples: &[EpsExample<'_>],
        steps: usize,
        denom: usize,
        grad: &mut [T],
    ) -> Result<f64> {
        let n = self.pixels();
        let scale = 1.0 / (denom * n) as f64;
        let mut loss = 0.0;
        for ex in examples {
            check_len(n, ex.x_t.len())?;
            check_len(n, ex.eps.len())?;
            let x: Vec<T> = ex.x_t.iter().map(|&v| T::of(v)).collect();
            let (y, cache) = self.net.forward(&self.params, &x, UNet::time_position(ex.t, steps));
            let mut dy = Vec::with_capacity(n);
            for (&p, &e) in y.iter().zip(ex.eps) {
                let diff = p.f64() - e;
                loss += diff * diff * scale;
                dy.push(T::of(2.0 * diff * scale));
            }
            self.net.backward(&self.params, grad, &cache, &dy);
        }
        Ok(loss)
    }

    pub fn loss(&self, examples: &[EpsExample<'_>], steps: usize) -> Result<f64> {
        let n = self.pixels();
        let mut total = 0.0;
        for ex in examples {
            let y = self.predict(ex.x_t, ex.t, steps)?;
            total += y.iter().zip(ex.eps).map(|(p, e)| (p - e) * (p - e)).sum::<f64>();
        }
        Ok(total / (examples.len() * n) as f64)
    }
}

impl<T: Scalar> EpsModel for Denoiser<T> {
    fn predict_eps(&self, x_t: &[f64], t: usize, schedule: &DiffusionSchedule) -> Result<Vec<f64>> {
        schedule.check_step(t)?;
        self.predict(x_t, t, schedule.steps())
    }
}
