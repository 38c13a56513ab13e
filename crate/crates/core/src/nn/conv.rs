use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::gemm::gather_gemm;
use super::{axpy, Segments, Tensor};
use crate::{Error, Result};

/// Tap offsets of a window of `window` taps spaced `dilation` apart.
///
/// Odd windows `2l + 1` are centred: `-l*d ..= l*d`. Even windows `2l` drop
/// the leftmost tap: `(-l + 1)*d ..= l*d`, so a window of 2 reads `{0, +d}`.
pub fn tap_offsets(window: usize, dilation: usize) -> Vec<isize> {
    let l = (window / 2) as isize;
    let first = if window % 2 == 1 { -l } else { -l + 1 };
    (first..=l).map(|j| j * dilation as isize).collect()
}

/// 1-D (dilated) convolution filter bank with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilter {
    pub window: usize,
    pub dilation: usize,
    /// `[window, c_in, c_out]`, tap-major in offset order.
    pub weight: Tensor,
    /// `[c_out]`
    pub bias: Tensor,
}

impl ConvFilter {
    pub fn zeros(window: usize, dilation: usize, c_in: usize, c_out: usize) -> Self {
        assert!(window >= 1 && dilation >= 1, "window and dilation must be positive");
        Self {
            window,
            dilation,
            weight: Tensor::zeros(&[window, c_in, c_out]),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(window: usize, dilation: usize, c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let mut f = Self::zeros(window, dilation, c_in, c_out);
        let limit = libm::sqrt(6.0 / ((window * c_in) + c_out) as f64);
        for w in f.weight.data_mut() {
            *w = rng.gen_range(-limit..=limit);
        }
        f
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn offsets(&self) -> Vec<isize> {
        tap_offsets(self.window, self.dilation)
    }

    fn tap(&self, t: usize) -> &[f64] {
        let len = self.c_in() * self.c_out();
        &self.weight.data()[t * len..(t + 1) * len]
    }

    pub fn forward(&self, x: &Tensor, seg: &Segments) -> Result<Tensor> {
        x.expect_matrix("conv input", self.c_in())?;
        if x.rows() != seg.total() {
            return Err(Error::Shape(format!(
                "conv input has {} rows but segments cover {}",
                x.rows(),
                seg.total()
            )));
        }
        let (c_in, c_out) = (self.c_in(), self.c_out());
        let mut out = Tensor::zeros(&[x.rows(), c_out]);
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(self.bias.data());
        }
        for (t, &off) in self.offsets().iter().enumerate() {
            let (dst, src) = tap_rows(seg, off);
            gather_gemm(&dst, &src, x.data(), c_in, self.tap(t), c_out, out.data_mut());
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient.
    pub fn backward(&self, x: &Tensor, seg: &Segments, upstream: &Tensor, grad: &mut ConvFilter) -> Result<Tensor> {
        let (c_in, c_out) = (self.c_in(), self.c_out());
        upstream.expect_matrix("conv upstream gradient", c_out)?;
        if upstream.rows() != x.rows() {
            return Err(Error::Shape(format!(
                "conv upstream gradient has {} rows, input has {}",
                upstream.rows(),
                x.rows()
            )));
        }
        for i in 0..upstream.rows() {
            axpy(1.0, upstream.row(i), grad.bias.data_mut());
        }
        let mut grad_x = Tensor::zeros(&[x.rows(), c_in]);
        let mut transposed = alloc::vec![0.0; c_in * c_out];
        let channels: Vec<usize> = (0..c_in).collect();
        for (t, &off) in self.offsets().iter().enumerate() {
            let (dst, src) = tap_rows(seg, off);
            let m = dst.len();
            // Weight gradient as a product of contiguous panels: xᵀ [c_in, m]
            // times the upstream rows [m, c_out].
            let mut xt = alloc::vec![0.0; c_in * m];
            for (r, &s) in src.iter().enumerate() {
                for (c, &v) in x.row(s).iter().enumerate() {
                    xt[c * m + r] = v;
                }
            }
            let mut up = Vec::with_capacity(m * c_out);
            for &d in &dst {
                up.extend_from_slice(upstream.row(d));
            }
            let gw = &mut grad.weight.data_mut()[t * c_in * c_out..(t + 1) * c_in * c_out];
            gather_gemm(&channels, &channels, &xt, m, &up, c_out, gw);
            for (c, w_row) in self.tap(t).chunks(c_out).enumerate() {
                for (k, &w) in w_row.iter().enumerate() {
                    transposed[k * c_in + c] = w;
                }
            }
            gather_gemm(&src, &dst, upstream.data(), c_out, &transposed, c_in, grad_x.data_mut());
        }
        Ok(grad_x)
    }
}

/// Output rows that tap offset `off` reaches inside their own segment, and
/// the input rows they read.
fn tap_rows(seg: &Segments, off: isize) -> (Vec<usize>, Vec<usize>) {
    let mut dst = Vec::with_capacity(seg.total());
    let mut src = Vec::with_capacity(seg.total());
    for range in seg.ranges() {
        for i in range.clone() {
            let s = i as isize + off;
            if s >= range.start as isize && s < range.end as isize {
                dst.push(i);
                src.push(s as usize);
            }
        }
    }
    (dst, src)
}

/// Convolves a single sequence `x: [n, c_in]`.
pub fn conv1d(x: &Tensor, f: &ConvFilter) -> Result<Tensor> {
    f.forward(x, &Segments::single(x.rows()))
}

/// Returns `(grad_x, grad_weight, grad_bias)` for a single sequence.
pub fn conv1d_backward(x: &Tensor, f: &ConvFilter, upstream: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let mut grad = ConvFilter::zeros(f.window, f.dilation, f.c_in(), f.c_out());
    let gx = f.backward(x, &Segments::single(x.rows()), upstream, &mut grad)?;
    Ok((gx, grad.weight, grad.bias))
}
