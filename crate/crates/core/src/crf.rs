//! Linear-chain CRF over per-position emission scores.
//!
//! Transitions are a `[K + 1, K]` matrix: row `i < K` scores moving from
//! tag `i` to each tag, row `K` scores entering the first tag from the
//! sequence start. There is no end transition. All arithmetic is done in
//! log space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::Tensor;
use crate::tags::Tag;
use crate::{Error, Result};

fn check_shapes(emissions: &Tensor, transitions: &Tensor) -> Result<(usize, usize)> {
    if emissions.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "emissions must be [n, K], got {:?}",
            emissions.shape()
        )));
    }
    let (n, k) = (emissions.rows(), emissions.cols());
    if transitions.shape() != [k + 1, k] {
        return Err(Error::Shape(format!(
            "transitions must be [{}, {k}] for {k} tags, got {:?}",
            k + 1,
            transitions.shape()
        )));
    }
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    Ok((n, k))
}

/// Numerically stable `ln(sum(exp(v)))`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Transition score plus emission score along `tags`.
pub fn score_path(emissions: &Tensor, tags: &[usize], transitions: &Tensor) -> Result<f64> {
    let (n, k) = check_shapes(emissions, transitions)?;
    if tags.len() != n {
        return Err(Error::Shape(format!(
            "path has {} tags for {n} positions",
            tags.len()
        )));
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= k) {
        return Err(Error::IdOutOfRange { id: bad, size: k });
    }
    let mut score = transitions.get2(k, tags[0]);
    for t in 1..n {
        score += transitions.get2(tags[t - 1], tags[t]);
    }
    for (t, &tag) in tags.iter().enumerate() {
        score += emissions.get2(t, tag);
    }
    Ok(score)
}

/// Forward/backward log-messages for one sequence.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// `alpha[t, k]`: log-sum of scores of prefixes ending in `k` at `t`.
    pub alpha: Tensor,
    /// `beta[t, k]`: log-sum of scores of suffixes after `k` at `t`.
    pub beta: Tensor,
    pub log_z: f64,
}

pub fn forward_backward(emissions: &Tensor, transitions: &Tensor) -> Result<Lattice> {
    let (n, k) = check_shapes(emissions, transitions)?;
    let a = |i: usize, j: usize| transitions.get2(i, j);
    let mut alpha = Tensor::zeros(&[n, k]);
    for j in 0..k {
        alpha.set2(0, j, a(k, j) + emissions.get2(0, j));
    }
    for t in 1..n {
        for j in 0..k {
            let prev = alpha.row(t - 1);
            let lse = log_sum_exp((0..k).map(|i| prev[i] + a(i, j)));
            alpha.set2(t, j, lse + emissions.get2(t, j));
        }
    }
    let mut beta = Tensor::zeros(&[n, k]);
    for t in (0..n - 1).rev() {
        for i in 0..k {
            let next = beta.row(t + 1);
            let lse = log_sum_exp((0..k).map(|j| a(i, j) + emissions.get2(t + 1, j) + next[j]));
            beta.set2(t, i, lse);
        }
    }
    let log_z = log_sum_exp(alpha.row(n - 1).iter().copied());
    if !log_z.is_finite() {
        return Err(Error::NonFinite("CRF log-partition".into()));
    }
    Ok(Lattice { alpha, beta, log_z })
}

/// Log of the summed exponentiated scores of all `K^n` paths.
pub fn log_partition(emissions: &Tensor, transitions: &Tensor) -> Result<f64> {
    let (n, k) = check_shapes(emissions, transitions)?;
    let mut alpha: Vec<f64> = (0..k)
        .map(|j| transitions.get2(k, j) + emissions.get2(0, j))
        .collect();
    let mut next = vec![0.0; k];
    for t in 1..n {
        for (j, slot) in next.iter_mut().enumerate() {
            *slot = log_sum_exp((0..k).map(|i| alpha[i] + transitions.get2(i, j))) + emissions.get2(t, j);
        }
        core::mem::swap(&mut alpha, &mut next);
    }
    Ok(log_sum_exp(alpha))
}

/// Per-position posterior tag probabilities `[n, K]`.
pub fn marginals(emissions: &Tensor, transitions: &Tensor) -> Result<Tensor> {
    let lat = forward_backward(emissions, transitions)?;
    let mut m = lat.alpha.clone();
    for (v, &b) in m.data_mut().iter_mut().zip(lat.beta.data()) {
        *v = libm::exp(*v + b - lat.log_z);
    }
    Ok(m)
}

/// Negative log-likelihood of `gold` and its gradients with respect to the
/// emissions `[n, K]` and the transitions `[K + 1, K]`.
pub fn nll_and_grad(emissions: &Tensor, gold: &[usize], transitions: &Tensor) -> Result<(f64, Tensor, Tensor)> {
    let (n, k) = check_shapes(emissions, transitions)?;
    let gold_score = score_path(emissions, gold, transitions)?;
    let lat = forward_backward(emissions, transitions)?;
    let loss = lat.log_z - gold_score;

    let mut grad_e = Tensor::zeros(&[n, k]);
    for t in 0..n {
        for j in 0..k {
            let p = libm::exp(lat.alpha.get2(t, j) + lat.beta.get2(t, j) - lat.log_z);
            grad_e.set2(t, j, p);
        }
        let g = grad_e.get2(t, gold[t]);
        grad_e.set2(t, gold[t], g - 1.0);
    }

    let mut grad_a = Tensor::zeros(&[k + 1, k]);
    for j in 0..k {
        grad_a.set2(k, j, grad_e.get2(0, j));
    }
    for t in 1..n {
        for i in 0..k {
            let base = lat.alpha.get2(t - 1, i) - lat.log_z;
            for j in 0..k {
                let xi = libm::exp(
                    base + transitions.get2(i, j) + emissions.get2(t, j) + lat.beta.get2(t, j),
                );
                grad_a.data_mut()[i * k + j] += xi;
            }
        }
        grad_a.data_mut()[gold[t - 1] * k + gold[t]] -= 1.0;
    }
    if !loss.is_finite() || !grad_e.all_finite() || !grad_a.all_finite() {
        return Err(Error::NonFinite("CRF loss or gradient".into()));
    }
    Ok((loss, grad_e, grad_a))
}

/// Max-sum decoding restricted to transitions accepted by `allowed`
/// (`None` as the previous tag means the sequence start). Ties go to the
/// lower tag index. The returned score is `score_path` of the returned path.
pub fn viterbi_masked<F>(emissions: &Tensor, transitions: &Tensor, allowed: F) -> Result<(Vec<usize>, f64)>
where
    F: Fn(Option<usize>, usize) -> bool,
{
    let (n, k) = check_shapes(emissions, transitions)?;
    let trans = |i: Option<usize>, j: usize| {
        if allowed(i, j) {
            transitions.get2(i.unwrap_or(k), j)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut delta: Vec<f64> = (0..k).map(|j| trans(None, j) + emissions.get2(0, j)).collect();
    let mut next = vec![0.0; k];
    let mut back = vec![0usize; n * k];
    for t in 1..n {
        for j in 0..k {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, &d) in delta.iter().enumerate() {
                let s = d + trans(Some(i), j);
                if s > best.0 {
                    best = (s, i);
                }
            }
            next[j] = best.0 + emissions.get2(t, j);
            back[t * k + j] = best.1;
        }
        core::mem::swap(&mut delta, &mut next);
    }
    let mut last = (f64::NEG_INFINITY, 0);
    for (j, &d) in delta.iter().enumerate() {
        if d > last.0 {
            last = (d, j);
        }
    }
    if last.0 == f64::NEG_INFINITY {
        return Err(Error::Unsatisfiable);
    }
    let mut path = vec![0usize; n];
    path[n - 1] = last.1;
    for t in (1..n).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    let score = score_path(emissions, &path, transitions)?;
    Ok((path, score))
}

/// Best path. With `constrained`, transitions that are not well-formed
/// BIEOS (e.g. `O -> I-x`, `B-x -> O`, start `-> E-x`) are excluded; this
/// needs the full 21-tag vocabulary.
pub fn viterbi(emissions: &Tensor, transitions: &Tensor, constrained: bool) -> Result<(Vec<usize>, f64)> {
    if !constrained {
        return viterbi_masked(emissions, transitions, |_, _| true);
    }
    if emissions.cols() != Tag::COUNT {
        return Err(Error::Config(format!(
            "constrained decoding needs {} tags, got {}",
            Tag::COUNT,
            emissions.cols()
        )));
    }
    viterbi_masked(emissions, transitions, |prev, next| {
        let prev = prev.and_then(Tag::from_index);
        let next = Tag::from_index(next).expect("index below tag count");
        Tag::can_follow(prev, next)
    })
}
