//! The numerical core.
//!
//! A sentence is represented by the mean of its word vectors. For a training
//! example the center sentence is compared by cosine with every candidate
//! (positives first, then negatives); a softmax over those cosines gives the
//! predicted distribution and categorical cross-entropy against the target
//! distribution is the loss. The embedding matrix is the only parameter.
//!
//! Gradients are derived by hand. With `g_j = p_j - t_j`, `c` the center
//! embedding and `s_j` candidate `j`:
//!
//! ```text
//! dL/dc   = sum_j g_j * (s_j / (|c||s_j|) - cos_j * c / |c|^2)
//! dL/ds_j = g_j * (c / (|c||s_j|) - cos_j * s_j / |s_j|^2)
//! ```
//!
//! and each token occurrence in a sentence of length `n` receives `1/n` of
//! its sentence's gradient. Rows that occur in several sentences (or several
//! times in one) accumulate every contribution.

mod train;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::TrainingExample;
use crate::{Error, Result};

pub use train::{lr_schedule, train, Progress, TrainConfig, TrainState, Trainer, TrainingMetrics};

/// Standard deviation of the initial weights.
pub const INIT_STDDEV: f64 = 0.01;

/// Row-major `V x d` table of word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl EmbeddingMatrix {
    /// Draws every entry i.i.d. from `Normal(0, 0.01)`.
    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        check_shape(vocab_size, dim)?;
        let normal = Normal::new(0.0, INIT_STDDEV).expect("valid normal parameters");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..vocab_size * dim).map(|_| normal.sample(&mut rng)).collect();
        Ok(EmbeddingMatrix {
            values,
            rows: vocab_size,
            dim,
        })
    }

    pub fn zeros(vocab_size: usize, dim: usize) -> Result<Self> {
        check_shape(vocab_size, dim)?;
        Ok(EmbeddingMatrix {
            values: vec![0.0; vocab_size * dim],
            rows: vocab_size,
            dim,
        })
    }

    pub fn from_values(vocab_size: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(vocab_size, dim)?;
        if values.len() != vocab_size * dim {
            return Err(Error::InvalidConfig(format!(
                "{} values given for a {vocab_size}x{dim} matrix",
                values.len()
            )));
        }
        Ok(EmbeddingMatrix {
            values,
            rows: vocab_size,
            dim,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidConfig("ragged rows".into()));
        }
        Self::from_values(rows.len(), dim, rows.concat())
    }

    pub fn vocab_size(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn check_shape(vocab_size: usize, dim: usize) -> Result<()> {
    if vocab_size == 0 || dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "embedding matrix needs positive shape, got {vocab_size}x{dim}"
        )));
    }
    Ok(())
}

/// Hook for counting the vector arithmetic done while averaging.
pub trait OpTally {
    fn vector_addition(&mut self) {}
    fn scalar_multiplication(&mut self) {}
}

/// Tally that records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTally;

impl OpTally for NoTally {}

/// Writes the mean of the rows named by `token_ids` into `out`: one row copy,
/// `|T| - 1` vector additions and one scalar multiplication.
pub fn average_into<T: OpTally + ?Sized>(
    matrix: &EmbeddingMatrix,
    token_ids: &[u32],
    out: &mut [f64],
    tally: &mut T,
) -> Result<()> {
    let (&first, rest) = token_ids.split_first().ok_or(Error::EmptySentence)?;
    debug_assert_eq!(out.len(), matrix.dim());
    out.copy_from_slice(matrix.row(first as usize));
    for &id in rest {
        for (o, v) in out.iter_mut().zip(matrix.row(id as usize)) {
            *o += v;
        }
        tally.vector_addition();
    }
    let scale = 1.0 / token_ids.len() as f64;
    out.iter_mut().for_each(|o| *o *= scale);
    tally.scalar_multiplication();
    Ok(())
}

/// Sentence embedding: the mean of its word vectors.
pub fn average_embedding(matrix: &EmbeddingMatrix, token_ids: &[u32]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; matrix.dim()];
    average_into(matrix, token_ids, &mut out, &mut NoTally)?;
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Uniform mass on the positives, zero on the negatives.
pub fn target_distribution(n_pos: usize, n_neg: usize) -> Result<Vec<f64>> {
    if n_pos == 0 {
        return Err(Error::InvalidExample("target needs at least one positive".into()));
    }
    let mut target = vec![0.0; n_pos + n_neg];
    target[..n_pos].fill(1.0 / n_pos as f64);
    Ok(target)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub center_embedding: Vec<f64>,
    /// Positives first, then negatives.
    pub candidate_embeddings: Vec<Vec<f64>>,
    pub cosines: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub center_norm: f64,
    pub candidate_norms: Vec<f64>,
}

pub fn forward(matrix: &EmbeddingMatrix, example: &TrainingExample<'_>) -> Result<ForwardTrace> {
    if example.num_candidates() == 0 {
        return Err(Error::InvalidExample("no candidate sentences".into()));
    }
    let center_embedding = average_embedding(matrix, example.center)?;
    let center_norm = norm(&center_embedding);
    if center_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let k = example.num_candidates();
    let mut candidate_embeddings = Vec::with_capacity(k);
    let mut candidate_norms = Vec::with_capacity(k);
    let mut cosines = Vec::with_capacity(k);
    for ids in example.candidates() {
        let emb = average_embedding(matrix, ids)?;
        let n = norm(&emb);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        cosines.push(cosine_with_norms(&center_embedding, &emb, center_norm, n));
        candidate_norms.push(n);
        candidate_embeddings.push(emb);
    }
    let probabilities = softmax(&cosines);
    Ok(ForwardTrace {
        center_embedding,
        candidate_embeddings,
        cosines,
        probabilities,
        center_norm,
        candidate_norms,
    })
}

/// Categorical cross-entropy of the predicted distribution against `target`.
pub fn loss(trace: &ForwardTrace, target: &[f64]) -> Result<f64> {
    if trace.probabilities.len() != target.len() {
        return Err(Error::InvalidExample(format!(
            "target has {} entries for {} candidates",
            target.len(),
            trace.probabilities.len()
        )));
    }
    Ok(-trace
        .probabilities
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.ln())
        .sum::<f64>())
}

/// Per-row accumulated gradients. Rows are kept in first-touch order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    dim: usize,
    slots: HashMap<u32, usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SparseGradient {
    pub fn new(dim: usize) -> Self {
        SparseGradient {
            dim,
            slots: HashMap::new(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.rows.clear();
        self.values.clear();
    }

    /// `grad[row] += scale * v`
    pub fn add_scaled(&mut self, row: u32, v: &[f64], scale: f64) {
        debug_assert_eq!(v.len(), self.dim);
        let slot = *self.slots.entry(row).or_insert_with(|| {
            self.rows.push(row);
            self.values.resize(self.values.len() + self.dim, 0.0);
            self.rows.len() - 1
        });
        let dst = &mut self.values[slot * self.dim..(slot + 1) * self.dim];
        for (d, x) in dst.iter_mut().zip(v) {
            *d += scale * x;
        }
    }

    pub fn get(&self, row: u32) -> Option<&[f64]> {
        self.slots
            .get(&row)
            .map(|&slot| &self.values[slot * self.dim..(slot + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows.iter().copied().zip(self.values.chunks_exact(self.dim.max(1)))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Exact gradient of the loss with respect to every row used by `example`.
pub fn backward(example: &TrainingExample<'_>, trace: &ForwardTrace, target: &[f64]) -> Result<SparseGradient> {
    let mut grad = SparseGradient::new(trace.center_embedding.len());
    accumulate_backward(example, trace, target, 1.0, &mut grad)?;
    Ok(grad)
}

/// Adds `weight` times the example's gradient into `grad`.
pub fn accumulate_backward(
    example: &TrainingExample<'_>,
    trace: &ForwardTrace,
    target: &[f64],
    weight: f64,
    grad: &mut SparseGradient,
) -> Result<()> {
    let k = trace.probabilities.len();
    if target.len() != k || example.num_candidates() != k {
        return Err(Error::InvalidExample("trace, target and example disagree in size".into()));
    }
    let c = &trace.center_embedding;
    let nc = trace.center_norm;
    let d = c.len();
    let mut d_center = vec![0.0; d];
    let mut d_cand = vec![0.0; d];

    for (j, ids) in example.candidates().enumerate() {
        let g = trace.probabilities[j] - target[j];
        let s = &trace.candidate_embeddings[j];
        let ns = trace.candidate_norms[j];
        let cos = trace.cosines[j];
        let inv = 1.0 / (nc * ns);
        let c_coef = cos / (nc * nc);
        let s_coef = cos / (ns * ns);
        for i in 0..d {
            d_center[i] += g * (s[i] * inv - c_coef * c[i]);
            d_cand[i] = g * (c[i] * inv - s_coef * s[i]);
        }
        let share = weight / ids.len() as f64;
        for &id in ids {
            grad.add_scaled(id, &d_cand, share);
        }
    }
    let share = weight / example.center.len() as f64;
    for &id in example.center {
        grad.add_scaled(id, &d_center, share);
    }
    Ok(())
}

/// `row -= lr * grad[row]` for every row in `grad`. Nothing is written if a
/// row index is out of range or an update would produce a non-finite value.
pub fn sgd_step(matrix: &mut EmbeddingMatrix, grad: &SparseGradient, lr: f64) -> Result<()> {
    if grad.dim() != matrix.dim() {
        return Err(Error::Corrupted("gradient dimension differs from matrix".into()));
    }
    for (row, g) in grad.iter() {
        if row as usize >= matrix.vocab_size() {
            return Err(Error::Corrupted(format!("gradient row {row} out of range")));
        }
        let current = matrix.row(row as usize);
        if current.iter().zip(g).any(|(w, g)| !(w - lr * g).is_finite()) {
            return Err(Error::Corrupted(format!("update of row {row} is not finite")));
        }
    }
    for (row, g) in grad.iter() {
        for (w, g) in matrix.row_mut(row as usize).iter_mut().zip(g) {
            *w -= lr * g;
        }
    }
    Ok(())
}
