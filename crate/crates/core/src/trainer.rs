//! Batching, Adam, the training loop and end-to-end prediction.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_clauses, Document};
use crate::dictionary::Lexicon;
use crate::encoder::{EncoderConfig, PAD_ID, UNK_ID};
use crate::model::{CharVocab, Model, PackedBatch};
use crate::nn::{BnCache, Mode, Segments, Tensor};
use crate::tags::{decode_bieos, EntitySpan};
use crate::{Error, Result};

/// Every hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Probability of replacing a training character by UNK.
    pub char_dropout: f64,
    pub max_clause_len: usize,
    pub constrained_decoding: bool,
    /// Recompute batch-norm running statistics over the whole training set
    /// once training ends.
    pub refresh_bn_stats: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            batch_size: 128,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 30,
            seed: 0,
            char_dropout: 0.01,
            max_clause_len: 512,
            constrained_decoding: false,
            refresh_bn_stats: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.max_clause_len == 0 {
            return bad("max_clause_len must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(alloc::format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(alloc::format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(alloc::format!("adam_epsilon must be positive, got {}", self.adam_epsilon));
        }
        if !(0.0..1.0).contains(&self.char_dropout) {
            return bad(alloc::format!("char_dropout must lie in [0, 1), got {}", self.char_dropout));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        TrainConfig::default().adam()
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| p.zeros_like()).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update. Non-finite gradients abort the step before anything
    /// (including the step counter) changes.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: Vec<&Tensor>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(alloc::format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::Shape(alloc::format!(
                    "tensor {i}: parameter {:?}, gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(alloc::format!("gradient of tensor {i}")));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// A training clause turned into ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedClause {
    pub char_ids: Vec<u32>,
    pub feature_ids: Vec<u32>,
    pub tags: Vec<usize>,
}

impl EncodedClause {
    pub fn len(&self) -> usize {
        self.char_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.char_ids.is_empty()
    }
}

/// Character vocabulary in first-appearance order over the corpus text.
pub fn build_vocab(corpus: &[Document]) -> CharVocab {
    CharVocab::from_chars(corpus.iter().flat_map(|d| d.text.chars()))
}

/// Splits every document into labelled clauses and maps them to ids.
/// Clause indices in errors count over the whole corpus.
pub fn encode_corpus(corpus: &[Document], lexicon: &Lexicon, model: &Model) -> Result<Vec<EncodedClause>> {
    let cap = model.config.max_clause_len;
    let mut out = Vec::new();
    for doc in corpus {
        for clause in doc.labeled_clauses()? {
            if clause.chars.len() > cap {
                return Err(Error::ClauseTooLong {
                    index: out.len(),
                    len: clause.chars.len(),
                    cap,
                });
            }
            let (char_ids, feature_ids) = model.encode_clause(&clause.chars, lexicon);
            out.push(EncodedClause {
                char_ids,
                feature_ids,
                tags: clause.tags.iter().map(|t| t.index()).collect(),
            });
        }
    }
    Ok(out)
}

/// Clauses padded to a common width. `mask[i * width + t]` is 1 iff
/// `t < lengths[i]`; padded cells hold PAD ids and tag 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub width: usize,
    pub char_ids: Vec<u32>,
    pub feature_ids: Vec<u32>,
    pub tags: Vec<usize>,
    pub mask: Vec<u8>,
    pub lengths: Vec<usize>,
}

impl Batch {
    pub fn from_clauses(clauses: &[&EncodedClause]) -> Self {
        let width = clauses.iter().map(|c| c.len()).max().unwrap_or(0);
        let cells = clauses.len() * width;
        let mut b = Batch {
            width,
            char_ids: vec![PAD_ID; cells],
            feature_ids: vec![PAD_ID; cells],
            tags: vec![0; cells],
            mask: vec![0; cells],
            lengths: clauses.iter().map(|c| c.len()).collect(),
        };
        for (i, c) in clauses.iter().enumerate() {
            let row = i * width;
            b.char_ids[row..row + c.len()].copy_from_slice(&c.char_ids);
            b.feature_ids[row..row + c.len()].copy_from_slice(&c.feature_ids);
            b.tags[row..row + c.len()].copy_from_slice(&c.tags);
            b.mask[row..row + c.len()].iter_mut().for_each(|m| *m = 1);
        }
        b
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    /// Appends `extra` all-PAD columns.
    pub fn widen(&self, extra: usize) -> Self {
        let width = self.width + extra;
        let mut out = Batch {
            width,
            char_ids: vec![PAD_ID; self.size() * width],
            feature_ids: vec![PAD_ID; self.size() * width],
            tags: vec![0; self.size() * width],
            mask: vec![0; self.size() * width],
            lengths: self.lengths.clone(),
        };
        for i in 0..self.size() {
            let (src, dst) = (i * self.width, i * width);
            out.char_ids[dst..dst + self.width].copy_from_slice(&self.char_ids[src..src + self.width]);
            out.feature_ids[dst..dst + self.width].copy_from_slice(&self.feature_ids[src..src + self.width]);
            out.tags[dst..dst + self.width].copy_from_slice(&self.tags[src..src + self.width]);
            out.mask[dst..dst + self.width].copy_from_slice(&self.mask[src..src + self.width]);
        }
        out
    }

    /// Keeps only masked-in cells, so padding can never reach the model.
    pub fn pack(&self) -> PackedBatch {
        let mut p = PackedBatch {
            char_ids: Vec::new(),
            feature_ids: Vec::new(),
            tags: Vec::new(),
            segments: Segments::new(&[]),
        };
        let mut lengths = Vec::with_capacity(self.size());
        for i in 0..self.size() {
            let mut len = 0;
            for t in 0..self.width {
                let cell = i * self.width + t;
                if self.mask[cell] == 1 {
                    p.char_ids.push(self.char_ids[cell]);
                    p.feature_ids.push(self.feature_ids[cell]);
                    p.tags.push(self.tags[cell]);
                    len += 1;
                }
            }
            lengths.push(len);
        }
        p.segments = Segments::new(&lengths);
        p
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Seeded shuffle of `clauses` cut into batches of at most `batch_size`.
pub fn batch_clauses(clauses: &[EncodedClause], batch_size: usize, seed: u64, epoch: usize) -> Vec<Batch> {
    let mut order: Vec<usize> = (0..clauses.len()).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    order
        .chunks(batch_size.max(1))
        .map(|chunk| {
            let members: Vec<&EncodedClause> = chunk.iter().map(|&i| &clauses[i]).collect();
            Batch::from_clauses(&members)
        })
        .collect()
}

/// Encodes `corpus` against `model`'s vocabulary and returns the batches of
/// epoch 0 for `seed`.
pub fn make_batches(corpus: &[Document], lexicon: &Lexicon, model: &Model, seed: u64) -> Result<Vec<Batch>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let clauses = encode_corpus(corpus, lexicon, model)?;
    Ok(batch_clauses(&clauses, model.config.batch_size, seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Per-clause negative log-likelihood averaged over the epoch.
    pub mean_loss: f64,
    pub batches: usize,
}

/// Owns the model and optimizer state for a run.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: Model,
    clauses: Vec<EncodedClause>,
    adam: Adam,
    dropout_rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    /// Builds the vocabulary from `corpus`, initialises the model from
    /// `config.seed` and encodes the training clauses.
    pub fn new(corpus: &[Document], lexicon: &Lexicon, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
        dropout_rng.set_stream(u64::MAX);
        let model = Model::new(config, build_vocab(corpus), &mut init_rng)?;
        let clauses = encode_corpus(corpus, lexicon, &model)?;
        if clauses.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let adam = Adam::new(model.config.adam(), &model.params.trainable());
        Ok(Self {
            model,
            clauses,
            adam,
            dropout_rng,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn clauses(&self) -> &[EncodedClause] {
        &self.clauses
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn drop_chars(&mut self, packed: &mut PackedBatch) {
        let p = self.model.config.char_dropout;
        if p <= 0.0 {
            return;
        }
        for id in &mut packed.char_ids {
            if *id != PAD_ID && self.dropout_rng.gen::<f64>() < p {
                *id = UNK_ID;
            }
        }
    }

    /// One pass over the shuffled training clauses.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let epoch = self.epoch;
        let batches = batch_clauses(&self.clauses, self.model.config.batch_size, self.model.config.seed, epoch);
        let mut total_loss = 0.0;
        let mut total_clauses = 0usize;
        let mut steps = 0;
        for (b, batch) in batches.iter().enumerate() {
            let mut packed = batch.pack();
            // Batch norm needs two rows; a lone one-character clause is skipped.
            if packed.segments.total() < 2 {
                continue;
            }
            self.drop_chars(&mut packed);
            let diverged = |_| Error::Diverged { epoch: epoch + 1, batch: b };
            let (loss, grads, cache) = self
                .model
                .params
                .loss_and_grad(&packed, Mode::Train)
                .map_err(diverged)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, batch: b });
            }
            self.adam
                .step(self.model.params.trainable_mut(), grads.trainable())
                .map_err(diverged)?;
            self.model.params.encoder.update_running(&cache.encoder);
            total_loss += loss * batch.size() as f64;
            total_clauses += batch.size();
            steps += 1;
        }
        self.epoch += 1;
        Ok(EpochStats {
            epoch: self.epoch,
            mean_loss: if total_clauses == 0 { 0.0 } else { total_loss / total_clauses as f64 },
            batches: steps,
        })
    }

    /// Mean per-clause loss over the training set with the current weights
    /// (train-mode batch statistics, no dropout, no update).
    pub fn evaluate_loss(&self) -> Result<f64> {
        let batches = batch_clauses(&self.clauses, self.model.config.batch_size, self.model.config.seed, 0);
        let mut total = 0.0;
        let mut count = 0;
        for batch in &batches {
            let packed = batch.pack();
            if packed.segments.total() < 2 {
                continue;
            }
            let (loss, _, _) = self.model.params.loss_and_grad(&packed, Mode::Train)?;
            total += loss * batch.size() as f64;
            count += batch.size();
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    /// The model as `finish` would return it now, leaving training state
    /// untouched.
    pub fn snapshot(&self) -> Result<Model> {
        let mut model = self.model.clone();
        if model.config.refresh_bn_stats {
            refresh_bn_stats(&mut model, &self.clauses)?;
        }
        Ok(model)
    }

    /// Ends the run, refreshing batch-norm statistics if configured.
    pub fn finish(mut self) -> Result<Model> {
        if self.model.config.refresh_bn_stats {
            refresh_bn_stats(&mut self.model, &self.clauses)?;
        }
        Ok(self.model)
    }
}

/// Sets every running mean/variance to the statistics of the full
/// training set, streamed batch by batch with the final weights.
pub fn refresh_bn_stats(model: &mut Model, clauses: &[EncodedClause]) -> Result<()> {
    let batches = batch_clauses(clauses, model.config.batch_size, model.config.seed, 0);
    let mut weight = 0.0;
    let mut sums: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for batch in &batches {
        let packed = batch.pack();
        let rows = packed.segments.total();
        if rows < 2 {
            continue;
        }
        let cache = model
            .params
            .forward(&packed.char_ids, &packed.feature_ids, &packed.segments, Mode::Train)?;
        let stats: Vec<&BnCache> = cache.encoder.bn_caches();
        if sums.is_empty() {
            sums = stats
                .iter()
                .map(|c| (vec![0.0; c.mean.len()], vec![0.0; c.mean.len()]))
                .collect();
        }
        let w = rows as f64;
        for ((sum_mean, sum_sq), c) in sums.iter_mut().zip(&stats) {
            for k in 0..c.mean.len() {
                sum_mean[k] += w * c.mean[k];
                sum_sq[k] += w * (c.var[k] + c.mean[k] * c.mean[k]);
            }
        }
        weight += w;
    }
    if weight == 0.0 {
        return Ok(());
    }
    for (bn, (sum_mean, sum_sq)) in model.params.encoder.batch_norms_mut().into_iter().zip(&sums) {
        for k in 0..sum_mean.len() {
            let mean = sum_mean[k] / weight;
            let var = (sum_sq[k] / weight - mean * mean).max(0.0);
            bn.running_mean.data_mut()[k] = mean;
            bn.running_var.data_mut()[k] = var;
        }
    }
    Ok(())
}

/// Trains for `config.epochs` epochs without timing; see the `rdcc` crate
/// for the timed variant that also writes history files.
pub fn train(corpus: &[Document], lexicon: &Lexicon, config: TrainConfig) -> Result<(Model, Vec<EpochStats>)> {
    let epochs = config.epochs;
    let mut trainer = Trainer::new(corpus, lexicon, config)?;
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        history.push(trainer.run_epoch()?);
    }
    Ok((trainer.finish()?, history))
}

/// Tags `text` clause by clause and returns entities in char offsets of
/// `text`.
pub fn predict(model: &Model, lexicon: &Lexicon, text: &str) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    for clause in split_clauses(text) {
        let tags = model.tag_clause(&clause.chars, lexicon)?;
        spans.extend(decode_bieos(&tags).into_iter().map(|s| {
            EntitySpan::new(clause.source_index(s.start), clause.source_index(s.end), s.kind)
        }));
    }
    Ok(spans)
}
