//! Sentence-level word embeddings.
//!
//! Word vectors are trained so that the *average* of a sentence's vectors is
//! a good sentence representation. The training signal comes from predicting
//! which sentences surround a given sentence: the averaged embedding of the
//! center sentence is compared by cosine against its neighbours and a few
//! randomly drawn sentences, a softmax turns those cosines into a
//! distribution, and categorical cross-entropy against the "neighbours only"
//! target is minimised by plain SGD on the embedding matrix.
//!
//! The crate is split into:
//!
//! - [`corpus`]: tokenization, vocabulary, document-aware sentence index and
//!   example sampling.
//! - [`model`]: embedding matrix, forward pass, analytic gradients, SGD and
//!   the training loop.
//! - [`eval`]: sentence-pair similarity scoring, Pearson/Spearman
//!   correlation and the Wilcoxon signed-rank test.
//! - [`analysis`]: norm rankings, nearest neighbours, operation counts and
//!   inference timing.
//! - [`embedio`]: text embedding format and binary checkpoints.

pub mod analysis;
pub mod corpus;
pub mod embedio;
mod error;
pub mod eval;
pub mod model;

pub use error::{Error, Result};
