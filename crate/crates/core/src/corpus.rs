//! Corpus ingestion: tokenization, vocabulary construction, sentence encoding
//! and training-example sampling.
//!
//! A corpus is a list of documents, each an ordered list of sentences. Inside
//! a text file one line holds one sentence and a blank line starts a new
//! document; a directory is read as one file per document (further split on
//! blank lines). Adjacency never crosses a document boundary.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::{Error, Result};

/// Minimum corpus frequency used when none is given.
pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Splits a raw sentence into lowercase tokens.
///
/// Whitespace separates tokens; non-alphanumeric characters are stripped
/// from both ends of each token and tokens that end up empty are dropped.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// Token/index mapping with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    counts: Option<Vec<u64>>,
    min_count: u64,
}

impl Vocabulary {
    /// Counts tokens over `lines` and keeps those seen at least `min_count`
    /// times. Ids are assigned by descending frequency, ties broken
    /// lexicographically.
    pub fn build<I, S>(lines: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be positive".into()));
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        for line in lines {
            for token in tokenize(line.as_ref()) {
                *freq.entry(token).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (tokens, counts): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        Self::from_parts(tokens, Some(counts), min_count)
    }

    /// Vocabulary without frequency information, e.g. for an imported
    /// embedding table. Ids follow the order of `tokens`.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_parts(tokens.into_iter().map(Into::into).collect(), None, 0)
    }

    pub fn from_parts(tokens: Vec<String>, counts: Option<Vec<u64>>, min_count: u64) -> Result<Self> {
        if tokens.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig("vocabulary exceeds u32 index space".into()));
        }
        if let Some(counts) = &counts {
            if counts.len() != tokens.len() {
                return Err(Error::Corrupted("count list does not match token list".into()));
            }
            if counts.iter().any(|&c| c < min_count) {
                return Err(Error::Corrupted("token count below min_count".into()));
            }
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token_to_id.insert(token.clone(), id as u32).is_some() {
                return Err(Error::Corrupted(format!("duplicate token `{token}`")));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token: tokens,
            counts,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Corpus frequency of `id`, if the vocabulary was built from a corpus.
    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.as_ref().and_then(|c| c.get(id as usize).copied())
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Encodes a raw sentence, silently dropping out-of-vocabulary tokens.
    pub fn encode(&self, raw: &str) -> Vec<u32> {
        tokenize(raw).iter().filter_map(|t| self.id(t)).collect()
    }
}

/// Raw sentences grouped into documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Vec<String>>,
}

impl Corpus {
    /// Parses one-sentence-per-line text; blank lines separate documents.
    pub fn from_text(text: &str) -> Self {
        let mut corpus = Corpus::default();
        corpus.push_text(text);
        corpus
    }

    fn push_text(&mut self, text: &str) {
        let mut current = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                if !current.is_empty() {
                    self.documents.push(std::mem::take(&mut current));
                }
            } else {
                current.push(line.to_string());
            }
        }
        if !current.is_empty() {
            self.documents.push(current);
        }
    }

    /// Reads a file, or every regular file of a directory in name order.
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut corpus = Corpus::default();
        if path.is_dir() {
            let mut files: Vec<_> = fs::read_dir(path)?
                .map(|entry| entry.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| p.is_file());
            files.sort();
            for file in files {
                corpus.push_text(&fs::read_to_string(file)?);
            }
        } else {
            corpus.push_text(&fs::read_to_string(path)?);
        }
        Ok(corpus)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().flatten().map(String::as_str)
    }

    pub fn num_sentences(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }
}

/// A sentence reduced to its in-vocabulary token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub token_ids: Vec<u32>,
    pub document: usize,
    pub index_in_document: usize,
}

impl TokenizedSentence {
    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Immutable, document-aware view of an encoded corpus.
///
/// Sentences keep their corpus positions even when they encode to nothing,
/// so an empty sentence still separates its two neighbours.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    sentences: Vec<TokenizedSentence>,
    /// `document_starts[i]..document_starts[i + 1]` are the positions of
    /// document `i`; the last entry is the sentence count.
    document_starts: Vec<usize>,
    non_empty: Vec<usize>,
}

impl CorpusIndex {
    pub fn build(vocab: &Vocabulary, corpus: &Corpus) -> Self {
        Self::from_encoded(
            corpus
                .documents
                .iter()
                .map(|doc| doc.iter().map(|line| vocab.encode(line)).collect())
                .collect(),
        )
    }

    /// Builds an index from already encoded documents.
    pub fn from_encoded(documents: Vec<Vec<Vec<u32>>>) -> Self {
        let mut sentences = Vec::new();
        let mut document_starts = Vec::with_capacity(documents.len() + 1);
        for (doc, encoded) in documents.into_iter().enumerate() {
            document_starts.push(sentences.len());
            for (i, token_ids) in encoded.into_iter().enumerate() {
                sentences.push(TokenizedSentence {
                    token_ids,
                    document: doc,
                    index_in_document: i,
                });
            }
        }
        document_starts.push(sentences.len());
        let non_empty = sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(i, _)| i)
            .collect();
        CorpusIndex {
            sentences,
            document_starts,
            non_empty,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_documents(&self) -> usize {
        self.document_starts.len() - 1
    }

    pub fn document_boundaries(&self) -> &[usize] {
        &self.document_starts
    }

    pub fn sentence(&self, pos: usize) -> &TokenizedSentence {
        &self.sentences[pos]
    }

    pub fn sentences(&self) -> &[TokenizedSentence] {
        &self.sentences
    }

    /// Positions of sentences with at least one in-vocabulary token.
    pub fn non_empty_positions(&self) -> &[usize] {
        &self.non_empty
    }

    /// In-document predecessor and successor of `pos`, regardless of content.
    pub fn neighbours(&self, pos: usize) -> (Option<usize>, Option<usize>) {
        let s = &self.sentences[pos];
        let start = self.document_starts[s.document];
        let end = self.document_starts[s.document + 1];
        let prev = (pos > start).then(|| pos - 1);
        let next = (pos + 1 < end).then_some(pos + 1);
        (prev, next)
    }

    /// Every usable center sentence with its non-empty in-document
    /// neighbours, in corpus order.
    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        self.non_empty.iter().filter_map(move |&center| {
            let (prev, next) = self.neighbours(center);
            let positives: Vec<usize> = [prev, next]
                .into_iter()
                .flatten()
                .filter(|&p| !self.sentences[p].is_empty())
                .collect();
            (!positives.is_empty()).then_some(Window { center, positives })
        })
    }

    /// Draws `n` negatives for `center` uniformly (with replacement) from the
    /// non-empty sentences, rejecting the center and its in-document
    /// neighbours.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, center: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let (prev, next) = self.neighbours(center);
        let excluded = |p: usize| p == center || Some(p) == prev || Some(p) == next;
        let blocked = [Some(center), prev, next]
            .into_iter()
            .flatten()
            .filter(|&p| !self.sentences[p].is_empty())
            .count();
        if self.non_empty.len() <= blocked {
            return Err(Error::InsufficientCorpus(format!(
                "no sentence available as a negative for position {center}"
            )));
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let candidate = self.non_empty[rng.random_range(0..self.non_empty.len())];
            if !excluded(candidate) {
                out.push(candidate);
            }
        }
        Ok(out)
    }

    /// Samples negatives for `window` and resolves everything to token slices.
    pub fn sample_example<R: Rng + ?Sized>(
        &self,
        window: &Window,
        n_negatives: usize,
        rng: &mut R,
    ) -> Result<(TrainingExample<'_>, Vec<usize>)> {
        let negatives = self.sample_negatives(window.center, n_negatives, rng)?;
        Ok((self.example(window, &negatives), negatives))
    }

    pub fn example(&self, window: &Window, negatives: &[usize]) -> TrainingExample<'_> {
        let ids = |p: &usize| self.sentences[*p].token_ids.as_slice();
        TrainingExample {
            center: ids(&window.center),
            positives: window.positives.iter().map(ids).collect(),
            negatives: negatives.iter().map(ids).collect(),
        }
    }
}

/// A center sentence and its adjacent sentences, by corpus position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub center: usize,
    pub positives: Vec<usize>,
}

/// One training input: center sentence, positives and sampled negatives as
/// token-id sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample<'a> {
    pub center: &'a [u32],
    pub positives: Vec<&'a [u32]>,
    pub negatives: Vec<&'a [u32]>,
}

impl<'a> TrainingExample<'a> {
    /// Positives followed by negatives; the order the forward pass uses.
    pub fn candidates(&self) -> impl Iterator<Item = &'a [u32]> + '_ {
        self.positives.iter().chain(self.negatives.iter()).copied()
    }

    pub fn num_candidates(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }
}
