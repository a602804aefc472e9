//! Toponym detection in article text with a context-window feed-forward
//! classifier.
//!
//! The pipeline: load articles with standoff span annotations ([`corpus`]),
//! look up pretrained word vectors ([`embeddings`]), assemble per-token
//! context-window feature vectors with optional capitalization / POS / lemma
//! channels ([`features`]), classify each token with a small dense ReLU
//! network ([`network`]) trained by SGD with momentum, weighted
//! cross-entropy, gradient-norm clipping, and early stopping ([`training`]),
//! and score the result at token level ([`eval`]).
//!
//! All numeric work is `f64`. Training is deterministic for a fixed
//! `(seed, corpus, config)` triple.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod network;
pub mod training;

#[cfg(test)]
pub(crate) mod testutil;

pub use corpus::{CorpusSplit, Document, Label, Span, Token};
pub use embeddings::{EmbeddingStore, OovPolicy};
pub use error::{Error, Result};
pub use eval::{AblationRow, AblationSpec, EvalReport};
pub use features::{FeatureConfig, FeatureExtractor, FeatureScope};
pub use linalg::{Matrix, Vector};
pub use network::{ArchConfig, ModelParams, Prediction};
pub use training::{TrainConfig, TrainHistory};
