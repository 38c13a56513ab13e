use rand::Rng;

use super::{axpy, Tensor};
use crate::Result;

/// Affine map `[n, in] -> [n, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(input, output);
        let limit = libm::sqrt(6.0 / (input + output) as f64);
        for w in l.weight.data_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        l
    }

    pub fn input(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.expect_matrix("linear input", self.input())?;
        let out = self.output();
        let mut y = Tensor::zeros(&[x.rows(), out]);
        for i in 0..x.rows() {
            let row = y.row_mut(i);
            row.copy_from_slice(self.bias.data());
            for (c, &xv) in x.row(i).iter().enumerate() {
                axpy(xv, &self.weight.data()[c * out..(c + 1) * out], row);
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, upstream: &Tensor, grad: &mut Linear) -> Result<Tensor> {
        let out = self.output();
        upstream.expect_matrix("linear upstream gradient", out)?;
        let mut gx = Tensor::zeros(&[x.rows(), self.input()]);
        for i in 0..x.rows() {
            let up = upstream.row(i);
            axpy(1.0, up, grad.bias.data_mut());
            let xr = x.row(i);
            let gxr = gx.row_mut(i);
            for c in 0..xr.len() {
                let w = &self.weight.data()[c * out..(c + 1) * out];
                gxr[c] = w.iter().zip(up).map(|(a, b)| a * b).sum();
                axpy(xr[c], up, &mut grad.weight.data_mut()[c * out..(c + 1) * out]);
            }
        }
        Ok(gx)
    }
}
