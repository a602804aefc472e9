//! Shared data builders for the pipeline benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use toponym_core::corpus::tokenize;
use toponym_core::embeddings::EmbeddingStore;
use toponym_core::linalg::{Matrix, Vector};
use toponym_core::Document;

pub fn random_vector(len: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Vector::from((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_rows(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-0.1..0.1)).collect(),
    )
    .expect("shape by construction")
}

/// A 200-dimensional store over a synthetic vocabulary, like the pretrained
/// vectors the real pipeline loads.
pub fn synthetic_store(words: usize, dim: usize) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs = (0..words).map(|i| {
        (
            format!("word{i}"),
            (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>(),
        )
    });
    EmbeddingStore::from_pairs("bench", dim, pairs).expect("uniform dimension")
}

/// One synthetic article of `len` tokens drawn from the store vocabulary.
pub fn synthetic_document(len: usize, vocab: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let words: Vec<String> = (0..len)
        .map(|_| format!("word{}", rng.gen_range(0..vocab)))
        .collect();
    let text = words.join(" ");
    Document {
        id: "bench".into(),
        tokens: tokenize(&text),
        gold_spans: Vec::new(),
        text,
    }
}
