//! Brute-force oracles and fixtures shared by the core tests and the
//! acceptance harness.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdcc_core::crf::score_path;
use rdcc_core::dictionary::Segment;
use rdcc_core::encoder::{Embeddings, Encoder, EncoderConfig};
use rdcc_core::model::{ModelParams, PackedBatch, ParamKind};
use rdcc_core::nn::{ConvFilter, Mode, Segments, Tensor};
use rdcc_core::EntityType;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

pub fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

pub fn kind(i: usize) -> EntityType {
    EntityType::ALL[i % 5]
}

/// Every path of length `n` over `k` tags, in lexicographic order.
pub fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

pub struct Enumerated {
    pub log_z: f64,
    pub best: Vec<usize>,
    pub best_score: f64,
    pub marginals: Vec<f64>,
}

pub fn enumerate(em: &Tensor, tr: &Tensor) -> Enumerated {
    let (n, k) = (em.rows(), em.cols());
    let paths = all_paths(n, k);
    let scores: Vec<f64> = paths.iter().map(|p| score_path(em, p, tr).unwrap()).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    // Lexicographic order plus strict comparison picks the path that is
    // smallest at the last position first, matching backpointer ties.
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        let better = *s > scores[best]
            || (*s == scores[best] && paths[i].iter().rev().lt(paths[best].iter().rev()));
        if better {
            best = i;
        }
    }
    let mut marginals = vec![0.0; n * k];
    for (p, s) in paths.iter().zip(&scores) {
        let w = (s - log_z).exp();
        for (t, &tag) in p.iter().enumerate() {
            marginals[t * k + tag] += w;
        }
    }
    Enumerated {
        log_z,
        best: paths[best].clone(),
        best_score: scores[best],
        marginals,
    }
}

/// `y[i, o] = b[o] + Σ_j Σ_c x[i + j·d, c] · W[j, c, o]` with zero padding,
/// taps `j` running over `first..=last` in order.
pub fn direct_sum(x: &Tensor, f: &ConvFilter, first: isize, last: isize) -> Tensor {
    let (n, c_in, c_out) = (x.rows(), f.c_in(), f.c_out());
    let d = f.dilation as isize;
    let w = f.weight.data();
    let mut y = Tensor::zeros(&[n, c_out]);
    for i in 0..n as isize {
        for o in 0..c_out {
            let mut acc = f.bias.data()[o];
            for (t, j) in (first..=last).enumerate() {
                let src = i + j * d;
                if src < 0 || src >= n as isize {
                    continue;
                }
                for c in 0..c_in {
                    acc += x.get2(src as usize, c) * w[(t * c_in + c) * c_out + o];
                }
            }
            y.set2(i as usize, o, acc);
        }
    }
    y
}

pub fn randomise_running_stats(encoder: &mut Encoder, rng: &mut ChaCha8Rng) {
    for bn in encoder.batch_norms_mut() {
        for v in bn.running_mean.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        for v in bn.running_var.data_mut() {
            *v = rng.gen_range(0.5..2.0);
        }
    }
}

/// Plain list lookup, independent of the lexicon's own storage.
pub fn lookup(entries: &[(Vec<char>, EntityType)], s: &[char]) -> Option<EntityType> {
    entries.iter().find(|(k, _)| k == s).map(|e| e.1)
}

pub fn oracle_fmm(chars: &[char], entries: &[(Vec<char>, EntityType)]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let hit = (2..=chars.len() - i).rev().find_map(|len| lookup(entries, &chars[i..i + len]).map(|k| (len, Some(k))));
        let (len, kind) = hit.unwrap_or((1, lookup(entries, &chars[i..=i])));
        out.push(Segment {
            start: i,
            end: i + len - 1,
            kind,
        });
        i += len;
    }
    out
}

pub fn oracle_bmm(chars: &[char], entries: &[(Vec<char>, EntityType)]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut j = chars.len();
    while j > 0 {
        let hit = (2..=j).rev().find_map(|len| lookup(entries, &chars[j - len..j]).map(|k| (len, Some(k))));
        let (len, kind) = hit.unwrap_or((1, lookup(entries, &chars[j - 1..j])));
        out.insert(
            0,
            Segment {
                start: j - len,
                end: j - 1,
                kind,
            },
        );
        j -= len;
    }
    out
}

pub fn oracle_bdmm(chars: &[char], entries: &[(Vec<char>, EntityType)]) -> Vec<Segment> {
    let f = oracle_fmm(chars, entries);
    let b = oracle_bmm(chars, entries);
    let singles = |s: &[Segment]| s.iter().filter(|g| g.len() == 1).count();
    if f.len() != b.len() {
        return if f.len() < b.len() { f } else { b };
    }
    if singles(&f) < singles(&b) {
        f
    } else {
        b
    }
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (Vec<char>, Vec<(Vec<char>, EntityType)>) {
    let alphabet: Vec<char> = "abcdefghij".chars().collect();
    let size = rng.gen_range(2..=alphabet.len());
    let pick = |rng: &mut ChaCha8Rng, len: usize| -> Vec<char> { (0..len).map(|_| alphabet[rng.gen_range(0..size)]).collect() };
    let mut entries: Vec<(Vec<char>, EntityType)> = Vec::new();
    for _ in 0..rng.gen_range(0..=20) {
        let len = rng.gen_range(1..=4);
        let s = pick(rng, len);
        if lookup(&entries, &s).is_none() {
            entries.push((s, kind(rng.gen_range(0..5))));
        }
    }
    let n = rng.gen_range(0..=12);
    (pick(rng, n), entries)
}

pub fn tiles(segments: &[Segment], n: usize) -> bool {
    let mut next = 0;
    for s in segments {
        if s.start != next || s.end < s.start {
            return false;
        }
        next = s.end + 1;
    }
    next == n
}

/// Tiny model: d_x = d_d = 4, f_d = f_s = 8, two blocks, w_d = 2, d_b = 3,
/// w_s = 3, four tags.
pub fn tiny_model(rng: &mut ChaCha8Rng) -> ModelParams {
    let config = EncoderConfig {
        char_dim: 4,
        feature_dim: 4,
        filters: 8,
        std_filters: 8,
        ..EncoderConfig::default()
    };
    let mut params = ModelParams {
        embeddings: Embeddings::init(9, 4, 4, rng),
        encoder: Encoder::configure(&config, 4, rng).unwrap(),
        transitions: random(rng, &[5, 4], 1.0),
    };
    for (_, kind, t) in params.named_mut() {
        if kind == ParamKind::Trainable && t.shape().len() == 1 {
            for v in t.data_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
    }
    for bn in params.encoder.batch_norms_mut() {
        bn.running_mean = random(rng, bn.running_mean.shape(), 1.0);
        bn.running_var.fill(1.5);
    }
    params
}

/// Finite-difference resolution: with a loss near 10 and `h = 1e-5`,
/// rounding alone moves the central difference by about 2e-10.
pub const RESOLUTION: f64 = 1e-9;

pub struct Report {
    pub name: String,
    pub max_rel: f64,
    pub max_abs: f64,
    pub max_analytic: f64,
    pub passed: bool,
}

/// Every trainable tensor of the tiny model, element by element. An element
/// passes on relative error, or on absolute error when both sides are below
/// what the difference quotient can resolve.
pub fn full_model_check(mode: Mode) -> Vec<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = tiny_model(&mut rng);
    let batch = PackedBatch {
        char_ids: vec![2, 3, 4, 2, 1, 5, 8],
        feature_ids: vec![1, 1, 6, 7, 8, 1, 23 - 1],
        tags: vec![0, 1, 2, 3, 0, 0, 1],
        segments: Segments::single(7),
    };
    let (_, grads, _) = params.loss_and_grad(&batch, mode).unwrap();
    let names: Vec<(String, ParamKind)> = params.named().into_iter().map(|(n, k, _)| (n, k)).collect();
    let mut out = Vec::new();
    for (i, (name, kind)) in names.iter().enumerate() {
        if *kind != ParamKind::Trainable {
            continue;
        }
        let analytic = grads.named()[i].2.data().to_vec();
        let mut report = Report {
            name: name.clone(),
            max_rel: 0.0,
            max_abs: 0.0,
            max_analytic: 0.0,
            passed: true,
        };
        for (j, &a) in analytic.iter().enumerate() {
            let loss = |d: f64| {
                let mut p = params.clone();
                p.named_mut()[i].2.data_mut()[j] += d;
                p.loss_and_grad(&batch, mode).unwrap().0
            };
            let numeric = (loss(H) - loss(-H)) / (2.0 * H);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(1e-8);
            report.max_rel = report.max_rel.max(rel);
            report.max_abs = report.max_abs.max(abs);
            report.max_analytic = report.max_analytic.max(a.abs());
            report.passed &= rel <= TOL || abs <= RESOLUTION;
        }
        out.push(report);
    }
    out
}
