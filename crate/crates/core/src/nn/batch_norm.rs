use alloc::vec;
use alloc::vec::Vec;

use super::{Mode, Tensor};
use crate::{Error, Result};

/// Per-channel batch normalization with learned scale/shift and
/// exponential running statistics for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    /// Weight kept by the running statistics at each update.
    pub momentum: f64,
    pub epsilon: f64,
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub mode: Mode,
    pub x_hat: Tensor,
    pub inv_std: Vec<f64>,
    /// Batch statistics (train mode only).
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum,
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<(Tensor, BnCache)> {
        let c = self.channels();
        x.expect_matrix("batch norm input", c)?;
        let m = x.rows();
        let (mean, var) = match mode {
            Mode::Train => {
                if m < 2 {
                    return Err(Error::BatchTooSmall(m));
                }
                let mut mean = vec![0.0; c];
                for i in 0..m {
                    super::axpy(1.0, x.row(i), &mut mean);
                }
                mean.iter_mut().for_each(|v| *v /= m as f64);
                let mut var = vec![0.0; c];
                for i in 0..m {
                    for ((v, &xv), &mu) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                        *v += (xv - mu) * (xv - mu);
                    }
                }
                var.iter_mut().for_each(|v| *v /= m as f64);
                (mean, var)
            }
            Mode::Infer => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var
            .iter()
            .map(|&v| 1.0 / libm::sqrt(v + self.epsilon))
            .collect();
        let mut x_hat = Tensor::zeros(&[m, c]);
        let mut y = Tensor::zeros(&[m, c]);
        let (gamma, beta) = (self.gamma.data(), self.beta.data());
        for i in 0..m {
            let xr = x.row(i);
            let hr = x_hat.row_mut(i);
            for k in 0..c {
                hr[k] = (xr[k] - mean[k]) * inv_std[k];
            }
            let yr = y.row_mut(i);
            let hr = x_hat.row(i);
            for k in 0..c {
                yr[k] = gamma[k] * hr[k] + beta[k];
            }
        }
        let (mean, var) = match mode {
            Mode::Train => (mean, var),
            Mode::Infer => (Vec::new(), Vec::new()),
        };
        Ok((
            y,
            BnCache {
                mode,
                x_hat,
                inv_std,
                mean,
                var,
            },
        ))
    }

    /// Folds the batch statistics of a train-mode pass into the running ones.
    pub fn update_running(&mut self, cache: &BnCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let keep = self.momentum;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = keep * *r + (1.0 - keep) * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = keep * *r + (1.0 - keep) * b;
        }
    }

    pub fn backward(&self, cache: &BnCache, upstream: &Tensor, grad: &mut BatchNorm) -> Result<Tensor> {
        let c = self.channels();
        upstream.expect_matrix("batch norm upstream gradient", c)?;
        let m = upstream.rows();
        let gamma = self.gamma.data();
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for i in 0..m {
            let (u, h) = (upstream.row(i), cache.x_hat.row(i));
            for k in 0..c {
                sum_dy[k] += u[k];
                sum_dy_xhat[k] += u[k] * h[k];
            }
        }
        for k in 0..c {
            grad.gamma.data_mut()[k] += sum_dy_xhat[k];
            grad.beta.data_mut()[k] += sum_dy[k];
        }
        let mut gx = Tensor::zeros(&[m, c]);
        let inv_m = 1.0 / m as f64;
        for i in 0..m {
            let (u, h) = (upstream.row(i), cache.x_hat.row(i));
            let g = gx.row_mut(i);
            for k in 0..c {
                let scale = gamma[k] * cache.inv_std[k];
                g[k] = match cache.mode {
                    Mode::Train => {
                        scale * (u[k] - inv_m * sum_dy[k] - h[k] * inv_m * sum_dy_xhat[k])
                    }
                    Mode::Infer => scale * u[k],
                };
            }
        }
        Ok(gx)
    }
}

/// Normalizes `x: [m, c]`; in train mode the running statistics of `params`
/// are updated as a side effect.
pub fn batch_norm(x: &Tensor, params: &mut BatchNorm, mode: Mode) -> Result<Tensor> {
    let (y, cache) = params.forward(x, mode)?;
    params.update_running(&cache);
    Ok(y)
}
