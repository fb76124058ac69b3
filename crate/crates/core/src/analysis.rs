//! Inspection tools for a trained table: norm rankings, cosine neighbours,
//! inference operation counts and per-pair timing.

use std::cmp::Ordering;
use std::time::Instant;

use crate::corpus::Vocabulary;
use crate::eval::{pair_similarity, SentencePair};
use crate::model::{average_into, cosine, norm, EmbeddingMatrix, OpTally};
use crate::{Error, Result};

/// `(token, L2 norm)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRanking {
    pub entries: Vec<(String, f64)>,
}

/// Vector arithmetic needed to embed one sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    pub vector_additions: usize,
    pub scalar_multiplications: usize,
    pub tokens: usize,
}

impl OpTally for OpCount {
    fn vector_addition(&mut self) {
        self.vector_additions += 1;
    }

    fn scalar_multiplication(&mut self) {
        self.scalar_multiplications += 1;
    }
}

/// The `k` lowest-norm tokens (ascending) and the `k` highest-norm tokens
/// (descending). Ties are broken by token.
pub fn norm_ranking(matrix: &EmbeddingMatrix, vocab: &Vocabulary, k: usize) -> Result<(NormRanking, NormRanking)> {
    check_table(matrix, vocab)?;
    if k > vocab.len() {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds vocabulary size {}", vocab.len())));
    }
    let mut all: Vec<(String, f64)> = vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), norm(matrix.row(i))))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let lowest = all[..k].to_vec();
    let mut highest: Vec<_> = all[all.len() - k..].to_vec();
    highest.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok((NormRanking { entries: lowest }, NormRanking { entries: highest }))
}

/// Every other token whose cosine with `query` is at least `threshold`,
/// most similar first. Zero rows never match.
pub fn nearest_neighbors(
    matrix: &EmbeddingMatrix,
    vocab: &Vocabulary,
    query: &str,
    threshold: f64,
) -> Result<Vec<(String, f64)>> {
    check_table(matrix, vocab)?;
    let q = vocab.id(query).ok_or_else(|| Error::UnknownToken(query.to_string()))? as usize;
    let qv = matrix.row(q);
    let mut hits: Vec<(String, f64)> = vocab
        .tokens()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != q)
        .filter_map(|(i, t)| {
            let c = cosine(qv, matrix.row(i)).ok()?;
            (c >= threshold).then(|| (t.clone(), c))
        })
        .collect();
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    Ok(hits)
}

/// Operation tally of the averaging method for a sentence of `len` tokens.
pub fn count_inference_ops(len: usize) -> Result<OpCount> {
    if len == 0 {
        return Err(Error::EmptySentence);
    }
    Ok(OpCount {
        vector_additions: len - 1,
        scalar_multiplications: 1,
        tokens: len,
    })
}

/// Runs the real averaging routine on `token_ids` and counts what it did.
pub fn instrumented_average(matrix: &EmbeddingMatrix, token_ids: &[u32]) -> Result<(Vec<f64>, OpCount)> {
    let mut out = vec![0.0; matrix.dim()];
    let mut count = OpCount {
        tokens: token_ids.len(),
        ..OpCount::default()
    };
    average_into(matrix, token_ids, &mut out, &mut count)?;
    Ok((out, count))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub pairs: usize,
    pub scored: usize,
    pub total_seconds: f64,
    pub seconds_per_pair: f64,
}

/// Times embedding and scoring the pairs one at a time on the calling thread.
/// Loading the table is not part of the measurement.
pub fn benchmark_pairs(matrix: &EmbeddingMatrix, vocab: &Vocabulary, pairs: &[SentencePair]) -> BenchReport {
    let mut scored = 0;
    let start = Instant::now();
    for pair in pairs {
        if std::hint::black_box(pair_similarity(matrix, vocab, pair)).is_some() {
            scored += 1;
        }
    }
    let total_seconds = start.elapsed().as_secs_f64();
    BenchReport {
        pairs: pairs.len(),
        scored,
        total_seconds,
        seconds_per_pair: if pairs.is_empty() {
            0.0
        } else {
            total_seconds / pairs.len() as f64
        },
    }
}

fn check_table(matrix: &EmbeddingMatrix, vocab: &Vocabulary) -> Result<()> {
    if matrix.vocab_size() != vocab.len() {
        return Err(Error::Corrupted(format!(
            "matrix has {} rows for {} tokens",
            matrix.vocab_size(),
            vocab.len()
        )));
    }
    Ok(())
}
