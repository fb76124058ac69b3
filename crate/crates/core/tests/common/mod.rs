//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scbow_core::corpus::{Corpus, TrainingExample};
use scbow_core::model::EmbeddingMatrix;

/// Topic-clustered synthetic text: `docs` documents of `sentences_per_doc`
/// sentences; every document draws all its tokens from one cluster's private
/// vocabulary of `cluster_vocab` words, so adjacent sentences always share a
/// cluster and clusters share no tokens.
pub struct ClusteredCorpus {
    pub clusters: usize,
    pub cluster_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for ClusteredCorpus {
    fn default() -> Self {
        ClusteredCorpus {
            clusters: 10,
            cluster_vocab: 200,
            min_len: 5,
            max_len: 10,
        }
    }
}

impl ClusteredCorpus {
    pub fn sentence(&self, cluster: usize, rng: &mut ChaCha8Rng) -> String {
        let len = rng.random_range(self.min_len..=self.max_len);
        (0..len)
            .map(|_| format!("c{cluster}w{}", rng.random_range(0..self.cluster_vocab)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn corpus(&self, docs: usize, sentences_per_doc: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Corpus {
            documents: (0..docs)
                .map(|d| {
                    (0..sentences_per_doc)
                        .map(|_| self.sentence(d % self.clusters, &mut rng))
                        .collect()
                })
                .collect(),
        }
    }

    /// Fresh same-cluster sentence pairs, never seen in training.
    pub fn same_cluster_pairs(&self, n: usize, seed: u64) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = i % self.clusters;
                (self.sentence(c, &mut rng), self.sentence(c, &mut rng))
            })
            .collect()
    }

    pub fn cross_cluster_pairs(&self, n: usize, seed: u64) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<usize> = (0..self.clusters).collect();
        (0..n)
            .map(|_| {
                let a = *ids.choose(&mut rng).unwrap();
                let b = loop {
                    let b = *ids.choose(&mut rng).unwrap();
                    if b != a {
                        break b;
                    }
                };
                (self.sentence(a, &mut rng), self.sentence(b, &mut rng))
            })
            .collect()
    }
}

/// Loss of one example computed straight from the definitions, without any
/// of the library's forward-pass code.
pub fn reference_loss(matrix: &[Vec<f64>], example: &TrainingExample<'_>, target: &[f64]) -> f64 {
    let avg = |ids: &[u32]| -> Vec<f64> {
        let d = matrix[0].len();
        let mut v = vec![0.0; d];
        for &id in ids {
            for k in 0..d {
                v[k] += matrix[id as usize][k];
            }
        }
        v.iter().map(|x| x / ids.len() as f64).collect()
    };
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let c = avg(example.center);
    let cosines: Vec<f64> = example
        .positives
        .iter()
        .chain(&example.negatives)
        .map(|s| cos(&c, &avg(s)))
        .collect();
    let z: f64 = cosines.iter().map(|x| x.exp()).sum();
    -cosines
        .iter()
        .zip(target)
        .map(|(x, t)| t * (x.exp() / z).ln())
        .sum::<f64>()
}

/// Central finite-difference gradient of `reference_loss` with respect to
/// row `row`.
pub fn numeric_row_gradient(
    matrix: &[Vec<f64>],
    example: &TrainingExample<'_>,
    target: &[f64],
    row: usize,
    h: f64,
) -> Vec<f64> {
    let mut m = matrix.to_vec();
    (0..m[row].len())
        .map(|k| {
            let orig = m[row][k];
            m[row][k] = orig + h;
            let up = reference_loss(&m, example, target);
            m[row][k] = orig - h;
            let down = reference_loss(&m, example, target);
            m[row][k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rows_of(matrix: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    (0..matrix.vocab_size()).map(|i| matrix.row(i).to_vec()).collect()
}

pub fn bits_equal(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> bool {
    a.vocab_size() == b.vocab_size()
        && a.dim() == b.dim()
        && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
}
