//! Embedding lookup and the two-branch convolutional encoder.
//!
//! The left branch is a stack of residual blocks whose dilation grows
//! geometrically (`base^0, base^1, ...`); the right branch is one standard
//! convolution with batch normalization. Their outputs are summed and
//! projected to one score per tag.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictFeature;
use crate::nn::{BatchNorm, BnCache, ConvBn, ConvBnCache, Linear, Mode, ResidualBlock, ResidualCache, Segments, Tensor};
use crate::{Error, Result};

/// Reserved row of both embedding tables; always zero.
pub const PAD_ID: u32 = 0;
/// Character id for characters outside the training vocabulary.
pub const UNK_ID: u32 = 1;
/// PAD plus the 22 dictionary feature values.
pub const FEATURE_VOCAB: usize = DictFeature::COUNT + 1;

pub fn feature_id(f: DictFeature) -> u32 {
    1 + f.index() as u32
}

/// Which convolutional branches feed the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branches {
    Left,
    Right,
    Both,
}

impl Branches {
    pub fn has_left(self) -> bool {
        matches!(self, Branches::Left | Branches::Both)
    }

    pub fn has_right(self) -> bool {
        matches!(self, Branches::Right | Branches::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Branches::Left => "left",
            Branches::Right => "right",
            Branches::Both => "both",
        }
    }
}

impl core::str::FromStr for Branches {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Branches::Left),
            "right" => Ok(Branches::Right),
            "both" => Ok(Branches::Both),
            _ => Err(Error::Config(format!("branches must be left, right or both, got {s:?}"))),
        }
    }
}

/// Architecture hyperparameters, including the ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub char_dim: usize,
    pub feature_dim: usize,
    /// Residual blocks in the left branch.
    pub blocks: usize,
    /// Filters per residual block.
    pub filters: usize,
    /// Window of the dilated convolutions.
    pub window: usize,
    /// Block `i` (0-based) uses dilation `dilation_base^i`.
    pub dilation_base: usize,
    pub std_filters: usize,
    pub std_window: usize,
    pub branches: Branches,
    pub residual: bool,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            char_dim: 128,
            feature_dim: 128,
            blocks: 2,
            filters: 256,
            window: 2,
            dilation_base: 3,
            std_filters: 256,
            std_window: 3,
            branches: Branches::Both,
            residual: true,
            leaky_slope: crate::nn::DEFAULT_LEAKY_SLOPE,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
        }
    }
}

impl EncoderConfig {
    pub fn embed_dim(&self) -> usize {
        self.char_dim + self.feature_dim
    }

    /// Width of the summed hidden state.
    pub fn hidden_dim(&self) -> usize {
        if self.branches.has_left() {
            self.filters
        } else {
            self.std_filters
        }
    }

    pub fn dilation(&self, block: usize) -> usize {
        self.dilation_base.pow(block as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("char_dim", self.char_dim),
            ("feature_dim", self.feature_dim),
            ("blocks", self.blocks),
            ("filters", self.filters),
            ("window", self.window),
            ("dilation_base", self.dilation_base),
            ("std_filters", self.std_filters),
            ("std_window", self.std_window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!("leaky_slope must lie in (0, 1), got {}", self.leaky_slope)));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return Err(Error::Config(format!("bn_momentum must lie in (0, 1), got {}", self.bn_momentum)));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Config(format!("bn_epsilon must be positive, got {}", self.bn_epsilon)));
        }
        if self.branches.has_left() && self.residual && self.embed_dim() != self.filters {
            return Err(Error::Config(format!(
                "residual skip needs char_dim + feature_dim ({}) == filters ({})",
                self.embed_dim(),
                self.filters
            )));
        }
        if self.branches == Branches::Both && self.filters != self.std_filters {
            return Err(Error::Config(format!(
                "branch sum needs filters ({}) == std_filters ({})",
                self.filters, self.std_filters
            )));
        }
        Ok(())
    }

    /// Dilated-convolution layers of the left branch as `(window, dilation)`.
    pub fn left_layers(&self) -> Vec<(usize, usize)> {
        (0..self.blocks)
            .flat_map(|b| {
                let d = self.dilation(b);
                [(self.window, d), (self.window, d)]
            })
            .collect()
    }
}

/// Character table `[V_x, d_x]` and dictionary feature table `[V_d, d_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub chars: Tensor,
    pub features: Tensor,
}

impl Embeddings {
    /// Uniform in `±sqrt(3 / dim)`; PAD rows stay zero.
    pub fn init<R: Rng>(char_vocab: usize, char_dim: usize, feature_dim: usize, rng: &mut R) -> Self {
        let mut table = |rows: usize, dim: usize| {
            let mut t = Tensor::zeros(&[rows, dim]);
            let limit = libm::sqrt(3.0 / dim as f64);
            for v in &mut t.data_mut()[dim..] {
                *v = rng.gen_range(-limit..=limit);
            }
            t
        };
        let chars = table(char_vocab, char_dim);
        let features = table(FEATURE_VOCAB, feature_dim);
        Self { chars, features }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            chars: self.chars.zeros_like(),
            features: self.features.zeros_like(),
        }
    }

    pub fn char_dim(&self) -> usize {
        self.chars.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Row `i` is `chars[char_ids[i]] ++ features[feature_ids[i]]`.
    pub fn embed(&self, char_ids: &[u32], feature_ids: &[u32]) -> Result<Tensor> {
        if char_ids.len() != feature_ids.len() {
            return Err(Error::Shape(format!(
                "{} char ids but {} feature ids",
                char_ids.len(),
                feature_ids.len()
            )));
        }
        let (dx, dd) = (self.char_dim(), self.feature_dim());
        let mut out = Tensor::zeros(&[char_ids.len(), dx + dd]);
        for (i, (&c, &f)) in char_ids.iter().zip(feature_ids).enumerate() {
            let (c, f) = (c as usize, f as usize);
            if c >= self.chars.rows() {
                return Err(Error::IdOutOfRange { id: c, size: self.chars.rows() });
            }
            if f >= self.features.rows() {
                return Err(Error::IdOutOfRange { id: f, size: self.features.rows() });
            }
            let row = out.row_mut(i);
            row[..dx].copy_from_slice(self.chars.row(c));
            row[dx..].copy_from_slice(self.features.row(f));
        }
        Ok(out)
    }

    /// Scatters row gradients back into the tables. PAD rows never receive
    /// gradient.
    pub fn backward(&self, char_ids: &[u32], feature_ids: &[u32], upstream: &Tensor, grad: &mut Embeddings) {
        let dx = self.char_dim();
        for (i, (&c, &f)) in char_ids.iter().zip(feature_ids).enumerate() {
            let g = upstream.row(i);
            if c != PAD_ID {
                crate::nn::axpy(1.0, &g[..dx], grad.chars.row_mut(c as usize));
            }
            if f != PAD_ID {
                crate::nn::axpy(1.0, &g[dx..], grad.features.row_mut(f as usize));
            }
        }
    }
}

/// Convolutional branches plus the tag projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub left: Vec<ResidualBlock>,
    pub right: Option<ConvBn>,
    pub projection: Linear,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    left: Vec<ResidualCache>,
    right: Option<ConvBnCache>,
    hidden: Tensor,
}

impl EncoderCache {
    pub fn bn_caches(&self) -> Vec<&BnCache> {
        let mut out: Vec<&BnCache> = Vec::new();
        for c in &self.left {
            out.extend(c.bn_caches());
        }
        if let Some(c) = &self.right {
            out.push(c.bn());
        }
        out
    }
}

impl Encoder {
    /// Builds the architecture named by `config`, with seeded random weights.
    pub fn configure<R: Rng>(config: &EncoderConfig, num_tags: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut left = Vec::new();
        if config.branches.has_left() {
            let mut c_in = config.embed_dim();
            for b in 0..config.blocks {
                left.push(ResidualBlock::init(
                    config.window,
                    config.dilation(b),
                    c_in,
                    config.filters,
                    config.residual,
                    config.leaky_slope,
                    config.bn_momentum,
                    config.bn_epsilon,
                    rng,
                )?);
                c_in = config.filters;
            }
        }
        let right = config.branches.has_right().then(|| {
            ConvBn::init(
                config.std_window,
                1,
                config.embed_dim(),
                config.std_filters,
                config.bn_momentum,
                config.bn_epsilon,
                rng,
            )
        });
        let projection = Linear::init(config.hidden_dim(), num_tags, rng);
        Ok(Self { left, right, projection })
    }

    pub fn num_tags(&self) -> usize {
        self.projection.output()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            left: self.left.iter().map(ResidualBlock::zeros_like).collect(),
            right: self.right.as_ref().map(ConvBn::zeros_like),
            projection: Linear::zeros(self.projection.input(), self.projection.output()),
        }
    }

    /// Outputs of the two branches before they are summed.
    pub fn branch_outputs(&self, e: &Tensor, seg: &Segments, mode: Mode) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let (left, right, _) = self.run_branches(e, seg, mode)?;
        Ok((left, right))
    }

    #[allow(clippy::type_complexity)]
    fn run_branches(
        &self,
        e: &Tensor,
        seg: &Segments,
        mode: Mode,
    ) -> Result<(Option<Tensor>, Option<Tensor>, (Vec<ResidualCache>, Option<ConvBnCache>))> {
        let mut left_caches = Vec::with_capacity(self.left.len());
        let left = if self.left.is_empty() {
            None
        } else {
            let mut x = e.clone();
            for block in &self.left {
                let (y, cache) = block.forward(&x, seg, mode)?;
                left_caches.push(cache);
                x = y;
            }
            Some(x)
        };
        let (right, right_cache) = match &self.right {
            Some(conv) => {
                let (y, cache) = conv.forward(e, seg, mode)?;
                (Some(y), Some(cache))
            }
            None => (None, None),
        };
        Ok((left, right, (left_caches, right_cache)))
    }

    /// Per-position tag scores `[n, K]` for embeddings `e: [n, d_x + d_d]`.
    pub fn forward(&self, e: &Tensor, seg: &Segments, mode: Mode) -> Result<(Tensor, EncoderCache)> {
        let (left, right, (left_caches, right_cache)) = self.run_branches(e, seg, mode)?;
        let hidden = match (left, right) {
            (Some(mut l), Some(r)) => {
                l.add_assign(&r);
                l
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => return Err(Error::Config("encoder has no branch".into())),
        };
        let scores = self.projection.forward(&hidden)?;
        Ok((
            scores,
            EncoderCache {
                left: left_caches,
                right: right_cache,
                hidden,
            },
        ))
    }

    /// Accumulates parameter gradients into `grad`; returns the gradient
    /// with respect to the embeddings.
    pub fn backward(&self, cache: &EncoderCache, seg: &Segments, grad_scores: &Tensor, grad: &mut Encoder) -> Result<Tensor> {
        let gh = self.projection.backward(&cache.hidden, grad_scores, &mut grad.projection)?;
        let mut ge: Option<Tensor> = None;
        if let (Some(conv), Some(c)) = (&self.right, &cache.right) {
            let g = conv.backward(c, seg, &gh, grad.right.as_mut().expect("gradient mirrors model"))?;
            ge = Some(g);
        }
        if !self.left.is_empty() {
            let mut g = gh;
            for ((block, c), gb) in self.left.iter().zip(&cache.left).zip(grad.left.iter_mut()).rev() {
                g = block.backward(c, seg, &g, gb)?;
            }
            match &mut ge {
                Some(acc) => acc.add_assign(&g),
                None => ge = Some(g),
            }
        }
        ge.ok_or_else(|| Error::Config("encoder has no branch".into()))
    }

    pub fn update_running(&mut self, cache: &EncoderCache) {
        for (block, c) in self.left.iter_mut().zip(&cache.left) {
            block.update_running(c);
        }
        if let (Some(conv), Some(c)) = (&mut self.right, &cache.right) {
            conv.update_running(c);
        }
    }

    /// Every batch-norm layer, in the order of [`EncoderCache::bn_caches`].
    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm> {
        let mut out: Vec<&mut BatchNorm> = Vec::new();
        for block in &mut self.left {
            out.extend(block.batch_norms_mut());
        }
        if let Some(conv) = &mut self.right {
            out.push(&mut conv.bn);
        }
        out
    }
}
