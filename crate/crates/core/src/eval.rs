//! Sentence-pair similarity evaluation.
//!
//! Each sentence is embedded by averaging its in-vocabulary word vectors and
//! the pair is scored by cosine. Pairs where either side has no usable token
//! are skipped and counted rather than given an invented score.

use std::fs;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::Vocabulary;
use crate::model::{average_embedding, cosine, EmbeddingMatrix};
use crate::{Error, Result};

/// Significance threshold for comparing two runs.
pub const SIGNIFICANCE_LEVEL: f64 = 0.0001;

/// Largest effective sample size for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub left: String,
    pub right: String,
    pub gold: Option<f64>,
}

/// Parses `left TAB right [TAB gold]` lines; blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<SentencePair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let gold = match fields.len() {
            2 => None,
            3 => {
                let g: f64 = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid gold score `{}`", fields[2])))?;
                if !g.is_finite() {
                    return Err(Error::parse(line_no, "gold score must be finite"));
                }
                Some(g)
            }
            n => return Err(Error::parse(line_no, format!("expected 2 or 3 tab-separated fields, found {n}"))),
        };
        pairs.push(SentencePair {
            left: fields[0].to_string(),
            right: fields[1].to_string(),
            gold,
        });
    }
    Ok(pairs)
}

pub fn load_pairs(path: &Path) -> Result<Vec<SentencePair>> {
    parse_pairs(&fs::read_to_string(path)?)
}

/// Cosine of the two averaged sentence embeddings, or `None` when either
/// side has no in-vocabulary token or averages to the zero vector.
pub fn pair_similarity(matrix: &EmbeddingMatrix, vocab: &Vocabulary, pair: &SentencePair) -> Option<f64> {
    let left = average_embedding(matrix, &vocab.encode(&pair.left)).ok()?;
    let right = average_embedding(matrix, &vocab.encode(&pair.right)).ok()?;
    cosine(&left, &right).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pearson: f64,
    pub spearman: f64,
    pub n_scored: usize,
    /// Pairs with an unusable side or without a gold score.
    pub n_skipped: usize,
    /// `(system, gold)` for the scored pairs, in dataset order.
    pub per_pair_scores: Vec<(f64, f64)>,
    /// System score per dataset item, `None` where the pair was skipped.
    pub system_scores: Vec<Option<f64>>,
}

pub fn evaluate(matrix: &EmbeddingMatrix, vocab: &Vocabulary, pairs: &[SentencePair]) -> Result<EvalReport> {
    let system_scores: Vec<Option<f64>> = pairs.iter().map(|p| pair_similarity(matrix, vocab, p)).collect();
    let per_pair_scores: Vec<(f64, f64)> = system_scores
        .iter()
        .zip(pairs)
        .filter_map(|(s, p)| Some(((*s)?, p.gold?)))
        .collect();
    if per_pair_scores.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "{} of {} pairs could be scored against a gold value",
            per_pair_scores.len(),
            pairs.len()
        )));
    }
    let (sys, gold): (Vec<f64>, Vec<f64>) = per_pair_scores.iter().copied().unzip();
    Ok(EvalReport {
        pearson: pearson(&sys, &gold)?,
        spearman: spearman(&sys, &gold)?,
        n_scored: per_pair_scores.len(),
        n_skipped: pairs.len() - per_pair_scores.len(),
        per_pair_scores,
        system_scores,
    })
}

fn check_paired(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateInput(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInput("need at least two observations".into()));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_paired(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_paired(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    /// `min(W+, W-)`
    pub statistic: f64,
    pub n_effective: usize,
    /// Two-sided.
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
}

/// Paired Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes get average ranks. The
/// two-sided p-value is exact (over all sign assignments of the observed
/// ranks) up to [`WILCOXON_EXACT_MAX_N`] nonzero differences, and otherwise
/// uses the normal approximation with tie and continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::DegenerateInput(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::DegenerateInput("all paired differences are zero".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::DegenerateInput("non-finite difference".into()));
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    // average ranks are multiples of 1/2, so doubled ranks are exact integers
    let doubled: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
    let total: u64 = doubled.iter().sum();
    let plus: u64 = doubled.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| *r).sum();
    let w_doubled = plus.min(total - plus);
    let statistic = w_doubled as f64 / 2.0;

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX_N {
        (exact_two_sided_p(&doubled, w_doubled), true)
    } else {
        (normal_two_sided_p(n, &ranks, statistic), false)
    };
    let p_value = p_value.clamp(0.0, 1.0);
    Ok(SignificanceResult {
        statistic,
        n_effective: n,
        p_value,
        exact,
        significant: p_value < SIGNIFICANCE_LEVEL,
    })
}

/// `2 * P(W+ <= w)` under random signs, via the count distribution of the
/// doubled rank sum. The null distribution is symmetric, so this is the
/// two-sided tail probability.
fn exact_two_sided_p(doubled_ranks: &[u64], w_doubled: u64) -> f64 {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let tail: u64 = counts[..=w_doubled as usize].iter().sum();
    let p = 2.0 * tail as f64 / (1u64 << doubled_ranks.len()) as f64;
    p.min(1.0)
}

fn normal_two_sided_p(n: usize, ranks: &[f64], statistic: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if variance <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * normal.sf(z)
}
