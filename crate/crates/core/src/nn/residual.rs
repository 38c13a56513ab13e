use rand::Rng;

use super::{leaky_relu, leaky_relu_backward, BatchNorm, BnCache, ConvFilter, Mode, Segments, Tensor};
use crate::{Error, Result};

/// Convolution followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn {
    pub conv: ConvFilter,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone)]
pub struct ConvBnCache {
    input: Tensor,
    bn: BnCache,
}

impl ConvBnCache {
    pub fn bn(&self) -> &BnCache {
        &self.bn
    }
}

impl ConvBn {
    pub fn new(conv: ConvFilter, momentum: f64, epsilon: f64) -> Self {
        let bn = BatchNorm::new(conv.c_out(), momentum, epsilon);
        Self { conv, bn }
    }

    pub fn init<R: Rng>(window: usize, dilation: usize, c_in: usize, c_out: usize, momentum: f64, epsilon: f64, rng: &mut R) -> Self {
        Self::new(ConvFilter::init(window, dilation, c_in, c_out, rng), momentum, epsilon)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            conv: ConvFilter::zeros(self.conv.window, self.conv.dilation, self.conv.c_in(), self.conv.c_out()),
            bn: BatchNorm {
                gamma: self.bn.gamma.zeros_like(),
                beta: self.bn.beta.zeros_like(),
                running_mean: self.bn.running_mean.zeros_like(),
                running_var: self.bn.running_var.zeros_like(),
                ..self.bn
            },
        }
    }

    pub fn forward(&self, x: &Tensor, seg: &Segments, mode: Mode) -> Result<(Tensor, ConvBnCache)> {
        let h = self.conv.forward(x, seg)?;
        let (y, bn) = self.bn.forward(&h, mode)?;
        Ok((
            y,
            ConvBnCache {
                input: x.clone(),
                bn,
            },
        ))
    }

    pub fn backward(&self, cache: &ConvBnCache, seg: &Segments, upstream: &Tensor, grad: &mut ConvBn) -> Result<Tensor> {
        let gh = self.bn.backward(&cache.bn, upstream, &mut grad.bn)?;
        self.conv.backward(&cache.input, seg, &gh, &mut grad.conv)
    }

    pub fn update_running(&mut self, cache: &ConvBnCache) {
        self.bn.update_running(&cache.bn);
    }
}

/// `o = x + F(x)` with `F = conv -> BN -> LeakyReLU -> conv -> BN -> LeakyReLU`,
/// both convolutions sharing one dilation. With `residual = false` the skip
/// is dropped and `o = F(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub first: ConvBn,
    pub second: ConvBn,
    pub residual: bool,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    first: ConvBnCache,
    pre1: Tensor,
    second: ConvBnCache,
    pre2: Tensor,
}

impl ResidualCache {
    pub fn bn_caches(&self) -> [&BnCache; 2] {
        [self.first.bn(), self.second.bn()]
    }
}

impl ResidualBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng>(
        window: usize,
        dilation: usize,
        c_in: usize,
        channels: usize,
        residual: bool,
        slope: f64,
        momentum: f64,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if residual && c_in != channels {
            return Err(Error::Config(alloc::format!(
                "residual skip needs matching widths, got input {c_in} and {channels} filters"
            )));
        }
        Ok(Self {
            first: ConvBn::init(window, dilation, c_in, channels, momentum, epsilon, rng),
            second: ConvBn::init(window, dilation, channels, channels, momentum, epsilon, rng),
            residual,
            slope,
        })
    }

    pub fn c_in(&self) -> usize {
        self.first.conv.c_in()
    }

    pub fn c_out(&self) -> usize {
        self.second.conv.c_out()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            first: self.first.zeros_like(),
            second: self.second.zeros_like(),
            ..*self
        }
    }

    /// `F(x)` alone.
    pub fn transform(&self, x: &Tensor, seg: &Segments, mode: Mode) -> Result<(Tensor, ResidualCache)> {
        let (pre1, first) = self.first.forward(x, seg, mode)?;
        let a1 = leaky_relu(&pre1, self.slope);
        let (pre2, second) = self.second.forward(&a1, seg, mode)?;
        let a2 = leaky_relu(&pre2, self.slope);
        Ok((
            a2,
            ResidualCache {
                first,
                pre1,
                second,
                pre2,
            },
        ))
    }

    pub fn forward(&self, x: &Tensor, seg: &Segments, mode: Mode) -> Result<(Tensor, ResidualCache)> {
        if x.shape().len() != 2 || x.cols() != self.c_in() {
            return Err(Error::Shape(alloc::format!(
                "residual block expects {} channels, got shape {:?}",
                self.c_in(),
                x.shape()
            )));
        }
        let (mut out, cache) = self.transform(x, seg, mode)?;
        if self.residual {
            out.add_assign(x);
        }
        Ok((out, cache))
    }

    pub fn backward(&self, cache: &ResidualCache, seg: &Segments, upstream: &Tensor, grad: &mut ResidualBlock) -> Result<Tensor> {
        let g2 = leaky_relu_backward(&cache.pre2, upstream, self.slope);
        let ga1 = self.second.backward(&cache.second, seg, &g2, &mut grad.second)?;
        let g1 = leaky_relu_backward(&cache.pre1, &ga1, self.slope);
        let mut gx = self.first.backward(&cache.first, seg, &g1, &mut grad.first)?;
        if self.residual {
            gx.add_assign(upstream);
        }
        Ok(gx)
    }

    pub fn update_running(&mut self, cache: &ResidualCache) {
        self.first.update_running(&cache.first);
        self.second.update_running(&cache.second);
    }

    pub fn batch_norms_mut(&mut self) -> [&mut BatchNorm; 2] {
        [&mut self.first.bn, &mut self.second.bn]
    }
}

/// Applies a block to a single sequence `x: [n, c]`.
pub fn residual_block(x: &Tensor, params: &ResidualBlock, mode: Mode) -> Result<Tensor> {
    params.forward(x, &Segments::single(x.rows()), mode).map(|(o, _)| o)
}
