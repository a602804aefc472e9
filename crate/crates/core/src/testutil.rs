//! Shared fixtures for unit tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{project_labels, tokenize, Document, Span};
use crate::embeddings::EmbeddingStore;

/// Synthetic corpus where every token that follows "in" is a toponym, so a
/// context window of 1 separates the classes by construction. Returns the
/// labeled documents and a small random embedding store covering the vocab.
pub(crate) fn synthetic_corpus(sentences: usize, seed: u64) -> (Vec<Document>, EmbeddingStore) {
    let vocab: Vec<String> = (0..15).map(|i| format!("w{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for s in 0..sentences {
        let len = rng.gen_range(8..13);
        let in_pos = rng.gen_range(0..len - 1);
        let mut words = Vec::with_capacity(len);
        for i in 0..len {
            if i == in_pos {
                words.push("in".to_string());
            } else {
                words.push(vocab[rng.gen_range(0..vocab.len())].clone());
            }
        }
        let text = format!("{} .", words.join(" "));
        let mut doc = Document {
            id: format!("s{s}"),
            tokens: tokenize(&text),
            gold_spans: Vec::new(),
            text: text.clone(),
        };
        // gold span over the token right after "in"
        let target = &doc.tokens[in_pos + 1];
        doc.gold_spans.push(Span {
            start: target.start,
            end: target.end,
            surface: target.surface.clone(),
        });
        project_labels(&mut doc).unwrap();
        docs.push(doc);
    }

    let mut erng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let dim = 8;
    let mut pairs: Vec<(String, Vec<f64>)> = vocab
        .iter()
        .map(|w| {
            (
                w.clone(),
                (0..dim).map(|_| erng.gen_range(-0.5..0.5)).collect(),
            )
        })
        .collect();
    pairs.push((
        "in".to_string(),
        (0..dim).map(|_| erng.gen_range(-0.5..0.5)).collect(),
    ));
    let store = EmbeddingStore::from_pairs("synthetic", dim, pairs).unwrap();
    (docs, store)
}
