//! Learnable parameters, the character vocabulary and the full
//! embed -> encode -> CRF computation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::crf;
use crate::dictionary::{dict_features, Lexicon};
use crate::encoder::{feature_id, Embeddings, Encoder, EncoderCache, UNK_ID};
use crate::nn::{Mode, Segments, Tensor};
use crate::tags::Tag;
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// Character -> id map. Ids 0 and 1 are PAD and UNK; the rest follow first
/// appearance in the training text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharVocab {
    chars: Vec<char>,
    ids: BTreeMap<char, u32>,
}

impl CharVocab {
    /// Reserved ids before the first real character.
    pub const RESERVED: usize = 2;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = Self::new();
        for c in chars {
            v.add(c);
        }
        v
    }

    pub fn add(&mut self, c: char) -> u32 {
        if let Some(&id) = self.ids.get(&c) {
            return id;
        }
        let id = (self.chars.len() + Self::RESERVED) as u32;
        self.chars.push(c);
        self.ids.insert(c, id);
        id
    }

    pub fn id(&self, c: char) -> u32 {
        self.ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    /// Table rows including PAD and UNK.
    pub fn size(&self) -> usize {
        self.chars.len() + Self::RESERVED
    }

    /// Real characters in id order (id = position + 2).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Whether a tensor is updated by the optimizer or only carried along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embeddings: Embeddings,
    pub encoder: Encoder,
    /// `[K + 1, K]`, last row is the start transition.
    pub transitions: Tensor,
}

macro_rules! walk_params {
    ($p:expr, $out:ident, $($m:tt)*) => {{
        use ParamKind::{Buffer, Trainable};
        $out.push((String::from("embed.chars"), Trainable, & $($m)* $p.embeddings.chars));
        $out.push((String::from("embed.features"), Trainable, & $($m)* $p.embeddings.features));
        for (b, block) in (& $($m)* $p.encoder.left).into_iter().enumerate() {
            for (l, cb) in [& $($m)* block.first, & $($m)* block.second].into_iter().enumerate() {
                let l = l + 1;
                $out.push((format!("left.{b}.conv{l}.weight"), Trainable, & $($m)* cb.conv.weight));
                $out.push((format!("left.{b}.conv{l}.bias"), Trainable, & $($m)* cb.conv.bias));
                $out.push((format!("left.{b}.bn{l}.gamma"), Trainable, & $($m)* cb.bn.gamma));
                $out.push((format!("left.{b}.bn{l}.beta"), Trainable, & $($m)* cb.bn.beta));
                $out.push((format!("left.{b}.bn{l}.running_mean"), Buffer, & $($m)* cb.bn.running_mean));
                $out.push((format!("left.{b}.bn{l}.running_var"), Buffer, & $($m)* cb.bn.running_var));
            }
        }
        if let Some(cb) = & $($m)* $p.encoder.right {
            $out.push((String::from("right.conv.weight"), Trainable, & $($m)* cb.conv.weight));
            $out.push((String::from("right.conv.bias"), Trainable, & $($m)* cb.conv.bias));
            $out.push((String::from("right.bn.gamma"), Trainable, & $($m)* cb.bn.gamma));
            $out.push((String::from("right.bn.beta"), Trainable, & $($m)* cb.bn.beta));
            $out.push((String::from("right.bn.running_mean"), Buffer, & $($m)* cb.bn.running_mean));
            $out.push((String::from("right.bn.running_var"), Buffer, & $($m)* cb.bn.running_var));
        }
        $out.push((String::from("proj.weight"), Trainable, & $($m)* $p.encoder.projection.weight));
        $out.push((String::from("proj.bias"), Trainable, & $($m)* $p.encoder.projection.bias));
        $out.push((String::from("crf.transitions"), Trainable, & $($m)* $p.transitions));
    }};
}

/// Everything one forward pass produced that backward needs.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub embedded: Tensor,
    pub encoder: EncoderCache,
    pub scores: Tensor,
}

/// A batch flattened to the clauses' real positions only.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedBatch {
    pub char_ids: Vec<u32>,
    pub feature_ids: Vec<u32>,
    pub tags: Vec<usize>,
    pub segments: Segments,
}

impl ModelParams {
    pub fn init<R: Rng>(config: &TrainConfig, char_vocab: usize, rng: &mut R) -> Result<Self> {
        let enc = &config.encoder;
        enc.validate()?;
        let embeddings = Embeddings::init(char_vocab, enc.char_dim, enc.feature_dim, rng);
        let encoder = Encoder::configure(enc, Tag::COUNT, rng)?;
        let transitions = Tensor::zeros(&[Tag::COUNT + 1, Tag::COUNT]);
        Ok(Self {
            embeddings,
            encoder,
            transitions,
        })
    }

    pub fn num_tags(&self) -> usize {
        self.encoder.num_tags()
    }

    /// Same structure, every tensor zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            embeddings: self.embeddings.zeros_like(),
            encoder: self.encoder.zeros_like(),
            transitions: self.transitions.zeros_like(),
        }
    }

    /// All tensors in a fixed order: trainables and buffers interleaved as
    /// they appear in the network.
    pub fn named(&self) -> Vec<(String, ParamKind, &Tensor)> {
        let mut out = Vec::new();
        walk_params!(self, out,);
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, ParamKind, &mut Tensor)> {
        let mut out = Vec::new();
        walk_params!(self, out, mut);
        out
    }

    pub fn trainable(&self) -> Vec<&Tensor> {
        self.named()
            .into_iter()
            .filter(|(_, k, _)| *k == ParamKind::Trainable)
            .map(|(_, _, t)| t)
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor> {
        self.named_mut()
            .into_iter()
            .filter(|(_, k, _)| *k == ParamKind::Trainable)
            .map(|(_, _, t)| t)
            .collect()
    }

    /// Emission scores for packed clauses.
    pub fn forward(&self, char_ids: &[u32], feature_ids: &[u32], seg: &Segments, mode: Mode) -> Result<ForwardCache> {
        let embedded = self.embeddings.embed(char_ids, feature_ids)?;
        let (scores, encoder) = self.encoder.forward(&embedded, seg, mode)?;
        Ok(ForwardCache {
            embedded,
            encoder,
            scores,
        })
    }

    /// Mean per-clause CRF negative log-likelihood and its gradient with
    /// respect to every trainable tensor.
    pub fn loss_and_grad(&self, batch: &PackedBatch, mode: Mode) -> Result<(f64, ModelParams, ForwardCache)> {
        let seg = &batch.segments;
        let cache = self.forward(&batch.char_ids, &batch.feature_ids, seg, mode)?;
        let k = self.num_tags();
        let clauses = seg.count().max(1) as f64;
        let mut grads = self.zeros_like();
        let mut grad_scores = Tensor::zeros(&[seg.total(), k]);
        let mut loss = 0.0;
        for range in seg.ranges() {
            let n = range.len();
            let em = Tensor::from_vec(&[n, k], cache.scores.data()[range.start * k..range.end * k].to_vec())?;
            let (l, ge, ga) = crf::nll_and_grad(&em, &batch.tags[range.clone()], &self.transitions)?;
            loss += l;
            for (dst, src) in grad_scores.data_mut()[range.start * k..range.end * k]
                .iter_mut()
                .zip(ge.data())
            {
                *dst = src / clauses;
            }
            for (dst, src) in grads.transitions.data_mut().iter_mut().zip(ga.data()) {
                *dst += src / clauses;
            }
        }
        let ge = self
            .encoder
            .backward(&cache.encoder, seg, &grad_scores, &mut grads.encoder)?;
        self.embeddings
            .backward(&batch.char_ids, &batch.feature_ids, &ge, &mut grads.embeddings);
        Ok((loss / clauses, grads, cache))
    }
}

/// A trained (or freshly initialised) tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    pub vocab: CharVocab,
    pub params: ModelParams,
}

impl Model {
    pub fn new<R: Rng>(config: TrainConfig, vocab: CharVocab, rng: &mut R) -> Result<Self> {
        let params = ModelParams::init(&config, vocab.size(), rng)?;
        Ok(Self { config, vocab, params })
    }

    /// Char ids and dictionary-feature ids for one clause.
    pub fn encode_clause(&self, chars: &[char], lexicon: &Lexicon) -> (Vec<u32>, Vec<u32>) {
        let char_ids = chars.iter().map(|&c| self.vocab.id(c)).collect();
        let feature_ids = dict_features(chars, lexicon).into_iter().map(feature_id).collect();
        (char_ids, feature_ids)
    }

    /// Inference-mode emission scores for one clause.
    pub fn emissions(&self, chars: &[char], lexicon: &Lexicon) -> Result<Tensor> {
        let (c, f) = self.encode_clause(chars, lexicon);
        let cache = self
            .params
            .forward(&c, &f, &Segments::single(chars.len()), Mode::Infer)?;
        Ok(cache.scores)
    }

    /// Viterbi tags for one clause.
    pub fn tag_clause(&self, chars: &[char], lexicon: &Lexicon) -> Result<Vec<Tag>> {
        if chars.is_empty() {
            return Ok(Vec::new());
        }
        let em = self.emissions(chars, lexicon)?;
        let (path, _) = crf::viterbi(&em, &self.params.transitions, self.config.constrained_decoding)?;
        path.into_iter()
            .map(|i| Tag::from_index(i).ok_or(Error::IdOutOfRange { id: i, size: Tag::COUNT }))
            .collect()
    }
}
