//! Pretrained word vectors: textual-format loading, lookups with a declared
//! out-of-vocabulary policy, OOV accounting, and store concatenation.
//!
//! File format: optional first line `count dim` (auto-detected: exactly two
//! integer fields), then one `word v1 ... vd` row per line,
//! whitespace-separated, UTF-8.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use crate::corpus::Document;
use crate::error::{Error, Result};

/// What [`lookup`] returns for words absent from the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovMode {
    /// All-zero vector (neutral element of the downstream affine layer).
    Zero,
    /// Deterministic pseudo-random vector derived from (word, seed), with
    /// components in `[-0.5/dim, 0.5/dim]`.
    HashedRandom { seed: u64 },
}

/// Out-of-vocabulary handling for [`lookup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OovPolicy {
    pub mode: OovMode,
    /// Try a lower-cased match before declaring the word OOV.
    pub case_fold_first: bool,
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy {
            mode: OovMode::Zero,
            case_fold_first: true,
        }
    }
}

/// An immutable word → dense vector map of fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    name: String,
    dimension: usize,
    vocab: HashMap<String, Arc<[f64]>>,
    zero: Arc<[f64]>,
    /// Count of duplicate rows resolved last-wins during loading.
    duplicate_rows: usize,
}

impl EmbeddingStore {
    /// Builds a store from (word, vector) pairs. Every vector must have
    /// length `dimension`; duplicate words resolve last-wins.
    pub fn from_pairs(
        name: &str,
        dimension: usize,
        pairs: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut vocab: HashMap<String, Arc<[f64]>> = HashMap::new();
        let mut duplicate_rows = 0;
        for (word, vec) in pairs {
            if vec.len() != dimension {
                return Err(Error::Dimension {
                    context: "EmbeddingStore::from_pairs",
                    expected: dimension,
                    actual: vec.len(),
                });
            }
            if vocab.insert(word, vec.into()).is_some() {
                duplicate_rows += 1;
            }
        }
        Ok(EmbeddingStore {
            name: name.to_string(),
            dimension,
            vocab,
            zero: vec![0.0; dimension].into(),
            duplicate_rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn duplicate_rows(&self) -> usize {
        self.duplicate_rows
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&Arc<[f64]>> {
        self.vocab.get(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vocab.keys().map(String::as_str)
    }
}

/// Loads a store from a textual word-vector file.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "embeddings".to_string());
    let file = File::open(path)?;
    read_embeddings(BufReader::new(file), &name)
}

/// Loads a store from any reader; `name` labels the store in reports.
pub fn read_embeddings(reader: impl Read, name: &str) -> Result<EmbeddingStore> {
    let reader = BufReader::new(reader);
    let mut dimension: Option<usize> = None;
    let mut vocab: HashMap<String, Arc<[f64]>> = HashMap::new();
    let mut duplicate_rows = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();

        // Header detection: a first line of exactly two integer fields.
        if lineno == 1 && fields.len() == 2 {
            if let (Ok(_count), Ok(dim)) =
                (fields[0].parse::<usize>(), fields[1].parse::<usize>())
            {
                dimension = Some(dim);
                continue;
            }
        }

        if fields.len() < 2 {
            return Err(Error::EmbeddingFormat {
                line: lineno,
                message: "expected `word v1 ... vd`".into(),
            });
        }
        let word = fields[0];
        let values: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::EmbeddingFormat {
                    line: lineno,
                    message: format!("bad number {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmbeddingFormat {
                line: lineno,
                message: "non-finite component".into(),
            });
        }
        match dimension {
            None => dimension = Some(values.len()),
            Some(dim) if dim != values.len() => {
                return Err(Error::EmbeddingFormat {
                    line: lineno,
                    message: format!("expected {dim} components, got {}", values.len()),
                });
            }
            Some(_) => {}
        }
        if vocab.insert(word.to_string(), values.into()).is_some() {
            duplicate_rows += 1;
        }
    }

    let dimension = dimension.ok_or(Error::EmbeddingFormat {
        line: 0,
        message: "empty embedding file".into(),
    })?;
    Ok(EmbeddingStore {
        name: name.to_string(),
        dimension,
        vocab,
        zero: vec![0.0; dimension].into(),
        duplicate_rows,
    })
}

/// Looks `word` up in `store`: exact match first, then (if the policy says
/// so) a lower-cased match, then the policy's OOV vector. The boolean is
/// true iff the OOV vector was used.
pub fn lookup(store: &EmbeddingStore, word: &str, policy: &OovPolicy) -> (Arc<[f64]>, bool) {
    if let Some(vec) = store.vocab.get(word) {
        return (vec.clone(), false);
    }
    if policy.case_fold_first {
        let folded = word.to_lowercase();
        if folded != word {
            if let Some(vec) = store.vocab.get(&folded) {
                return (vec.clone(), false);
            }
        }
    }
    match policy.mode {
        OovMode::Zero => (store.zero.clone(), true),
        OovMode::HashedRandom { seed } => (hashed_vector(word, seed, store.dimension), true),
    }
}

// FNV-1a, then SplitMix64 expansion: stable across runs and platforms.
fn fnv1a(word: &str, seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed;
    for byte in word.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hashed_vector(word: &str, seed: u64, dim: usize) -> Arc<[f64]> {
    let mut state = fnv1a(word, seed);
    let scale = 1.0 / dim as f64;
    (0..dim)
        .map(|_| {
            // uniform in [0, 1), mapped to [-0.5/dim, 0.5/dim)
            let unit = (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
            (unit - 0.5) * scale
        })
        .collect()
}

/// Out-of-vocabulary percentages over a tokenized document collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OovReport {
    pub distinct_types: usize,
    pub oov_types: usize,
    pub token_occurrences: usize,
    pub oov_occurrences: usize,
}

impl OovReport {
    /// Headline figure: percentage of distinct token types that are OOV.
    pub fn type_rate(&self) -> f64 {
        if self.distinct_types == 0 {
            0.0
        } else {
            100.0 * self.oov_types as f64 / self.distinct_types as f64
        }
    }

    /// Percentage of token occurrences that are OOV.
    pub fn occurrence_rate(&self) -> f64 {
        if self.token_occurrences == 0 {
            0.0
        } else {
            100.0 * self.oov_occurrences as f64 / self.token_occurrences as f64
        }
    }
}

/// Computes OOV statistics over the distinct token types (headline) and the
/// raw occurrences of `docs`.
pub fn oov_rate(store: &EmbeddingStore, docs: &[Document], policy: &OovPolicy) -> OovReport {
    let mut types: HashSet<&str> = HashSet::new();
    let mut occurrences = 0usize;
    let mut oov_occurrences = 0usize;
    for doc in docs {
        for token in &doc.tokens {
            occurrences += 1;
            let (_, oov) = lookup(store, &token.surface, policy);
            if oov {
                oov_occurrences += 1;
            }
            types.insert(token.surface.as_str());
        }
    }
    let oov_types = types
        .iter()
        .filter(|surface| lookup(store, surface, policy).1)
        .count();
    OovReport {
        distinct_types: types.len(),
        oov_types,
        token_occurrences: occurrences,
        oov_occurrences,
    }
}

/// Concatenates two stores: dimension is the sum, vocabulary is the union,
/// and each word's vector is the concatenation of per-side lookups (each
/// side applying its own OOV policy for words it lacks).
pub fn concat_stores(
    a: &EmbeddingStore,
    policy_a: &OovPolicy,
    b: &EmbeddingStore,
    policy_b: &OovPolicy,
) -> EmbeddingStore {
    let mut union: HashSet<&str> = a.words().collect();
    union.extend(b.words());
    let dimension = a.dimension + b.dimension;
    let vocab: HashMap<String, Arc<[f64]>> = union
        .into_iter()
        .map(|word| {
            let (va, _) = lookup(a, word, policy_a);
            let (vb, _) = lookup(b, word, policy_b);
            let mut joined = Vec::with_capacity(dimension);
            joined.extend_from_slice(&va);
            joined.extend_from_slice(&vb);
            (word.to_string(), Arc::<[f64]>::from(joined))
        })
        .collect();
    EmbeddingStore {
        name: format!("{}+{}", a.name, b.name),
        dimension,
        vocab,
        zero: vec![0.0; dimension].into(),
        duplicate_rows: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn mini_store() -> EmbeddingStore {
        EmbeddingStore::from_pairs(
            "mini",
            3,
            vec![
                ("mexico".to_string(), vec![1.0, 2.0, 3.0]),
                ("entered".to_string(), vec![0.1, 0.2, 0.3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn read_with_header() {
        let text = "2 3\nfoo 1 2 3\nbar 4 5 6\n";
        let store = read_embeddings(Cursor::new(text), "t").unwrap();
        assert_eq!(store.vocab_size(), 2);
        assert_eq!(store.dimension(), 3);
    }

    #[test]
    fn read_without_header_autodetects_dimension() {
        let text = "foo 1 2 3\nbar 4 5 6\n";
        let store = read_embeddings(Cursor::new(text), "t").unwrap();
        assert_eq!(store.dimension(), 3);
        assert_eq!(store.vocab_size(), 2);
    }

    #[test]
    fn read_rejects_short_row_with_line_number() {
        let text = "2 3\nfoo 1 2 3\nbar 4 5\n";
        let err = read_embeddings(Cursor::new(text), "t").unwrap_err();
        match err {
            Error::EmbeddingFormat { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_words_last_wins_with_count() {
        let text = "foo 1 2\nfoo 3 4\n";
        let store = read_embeddings(Cursor::new(text), "t").unwrap();
        assert_eq!(store.vocab_size(), 1);
        assert_eq!(store.duplicate_rows(), 1);
        assert_eq!(store.get("foo").unwrap().as_ref(), &[3.0, 4.0]);
    }

    #[test]
    fn lookup_known_word() {
        let store = mini_store();
        let (vec, oov) = lookup(&store, "mexico", &OovPolicy::default());
        assert!(!oov);
        assert_eq!(vec.as_ref(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn lookup_unknown_word_zero_policy() {
        let store = mini_store();
        let (vec, oov) = lookup(&store, "zzz", &OovPolicy::default());
        assert!(oov);
        assert_eq!(vec.as_ref(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn lookup_case_folds_before_oov() {
        let store = mini_store();
        let policy = OovPolicy::default();
        let (vec, oov) = lookup(&store, "Mexico", &policy);
        assert!(!oov);
        assert_eq!(vec.as_ref(), &[1.0, 2.0, 3.0]);

        let no_fold = OovPolicy {
            case_fold_first: false,
            ..policy
        };
        let (_, oov) = lookup(&store, "Mexico", &no_fold);
        assert!(oov);
    }

    #[test]
    fn hashed_random_is_deterministic_and_bounded() {
        let store = mini_store();
        let policy = OovPolicy {
            mode: OovMode::HashedRandom { seed: 7 },
            case_fold_first: true,
        };
        let (a, oov_a) = lookup(&store, "zzz", &policy);
        let (b, oov_b) = lookup(&store, "zzz", &policy);
        assert!(oov_a && oov_b);
        assert_eq!(a.as_ref(), b.as_ref());
        let bound = 0.5 / store.dimension() as f64;
        assert!(a.iter().all(|v| (-bound..=bound).contains(v)));

        let other_seed = OovPolicy {
            mode: OovMode::HashedRandom { seed: 8 },
            case_fold_first: true,
        };
        let (c, _) = lookup(&store, "zzz", &other_seed);
        assert_ne!(a.as_ref(), c.as_ref());
    }

    fn doc_from(text: &str) -> Document {
        Document {
            id: "d".into(),
            text: text.into(),
            tokens: tokenize(text),
            gold_spans: vec![],
        }
    }

    #[test]
    fn oov_rate_all_known_is_zero() {
        let store = mini_store();
        let docs = vec![doc_from("mexico entered mexico")];
        let report = oov_rate(&store, &docs, &OovPolicy::default());
        assert_eq!(report.type_rate(), 0.0);
        assert_eq!(report.occurrence_rate(), 0.0);
    }

    #[test]
    fn oov_rate_one_unknown_of_four_types() {
        let store = EmbeddingStore::from_pairs(
            "t",
            1,
            vec![
                ("a".to_string(), vec![1.0]),
                ("b".to_string(), vec![1.0]),
                ("c".to_string(), vec![1.0]),
            ],
        )
        .unwrap();
        let docs = vec![doc_from("a b c zzz")];
        let report = oov_rate(&store, &docs, &OovPolicy::default());
        assert_eq!(report.distinct_types, 4);
        assert_eq!(report.oov_types, 1);
        assert!((report.type_rate() - 25.00).abs() < 1e-12);
    }

    #[test]
    fn oov_rate_is_type_based_under_duplication() {
        let store = mini_store();
        let once = oov_rate(&store, &[doc_from("mexico zzz")], &OovPolicy::default());
        let dupes = oov_rate(
            &store,
            &[doc_from("zzz mexico mexico"), doc_from("mexico mexico")],
            &OovPolicy::default(),
        );
        assert_eq!(once.type_rate(), dupes.type_rate());
        assert_ne!(once.occurrence_rate(), dupes.occurrence_rate());
    }

    #[test]
    fn concat_sums_dimensions() {
        let a = EmbeddingStore::from_pairs("wp", 200, vec![("x".into(), vec![1.0; 200])]).unwrap();
        let b = EmbeddingStore::from_pairs("glove", 300, vec![("x".into(), vec![2.0; 300])])
            .unwrap();
        let joined = concat_stores(&a, &OovPolicy::default(), &b, &OovPolicy::default());
        assert_eq!(joined.dimension(), 500);
        let vec = joined.get("x").unwrap();
        assert_eq!(vec.len(), 500);
        assert!(vec[..200].iter().all(|&v| v == 1.0));
        assert!(vec[200..].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn concat_with_empty_store_is_identity() {
        let a = mini_store();
        let empty = EmbeddingStore::from_pairs("none", 0, Vec::new()).unwrap();
        let joined = concat_stores(&a, &OovPolicy::default(), &empty, &OovPolicy::default());
        assert_eq!(joined.dimension(), a.dimension());
        for word in a.words() {
            assert_eq!(joined.get(word).unwrap(), a.get(word).unwrap());
        }
    }

    #[test]
    fn concat_pads_one_sided_words_with_policy_vector() {
        let a = EmbeddingStore::from_pairs("a", 2, vec![("only".into(), vec![7.0, 8.0])]).unwrap();
        let b = EmbeddingStore::from_pairs("b", 3, vec![("other".into(), vec![1.0; 3])]).unwrap();
        let joined = concat_stores(&a, &OovPolicy::default(), &b, &OovPolicy::default());
        assert_eq!(joined.get("only").unwrap().as_ref(), &[7.0, 8.0, 0.0, 0.0, 0.0]);
        assert_eq!(joined.get("other").unwrap().as_ref(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn lookup_length_always_matches_dimension(word in "\\PC{1,12}") {
            let store = mini_store();
            for policy in [
                OovPolicy::default(),
                OovPolicy { mode: OovMode::HashedRandom { seed: 3 }, case_fold_first: false },
            ] {
                let (vec, _) = lookup(&store, &word, &policy);
                prop_assert_eq!(vec.len(), store.dimension());
            }
        }

        #[test]
        fn hashed_vectors_stay_in_bounds(word in "\\PC{1,12}", seed in any::<u64>(), dim in 1usize..64) {
            let vec = hashed_vector(&word, seed, dim);
            let bound = 0.5 / dim as f64;
            prop_assert!(vec.iter().all(|v| (-bound..=bound).contains(v)));
        }
    }
}
