//! Per-token input vectors: context-window word embeddings plus optional
//! capitalization, POS, and lemma channels, under punctuation/stop-word
//! filtering policies.
//!
//! Channel layout per window slot is `word ⊕ [cap] ⊕ [pos] ⊕ [lemma]` with
//! slots ordered `[-c .. -1, 0, +1 .. +c]`. Out-of-bounds slots contribute
//! zeros in every channel (capitalization `[0,0]` is reserved for padding).

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use crate::corpus::Token;
use crate::embeddings::{lookup, EmbeddingStore, OovPolicy};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Number of tags in the shipped Penn Treebank registry (36 word tags plus
/// 9 punctuation/symbol tags).
pub const POS_DIM: usize = 45;

/// Width of the capitalization channel.
pub const CAP_DIM: usize = 2;

const DEFAULT_TAGS: &str = include_str!("../data/ptb_tags.txt");
const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Whether feature channels attach to every window slot or only to the
/// target token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureScope {
    #[default]
    PerSlot,
    TargetOnly,
}

/// One ablation variant: window size, filtering switches, and feature
/// channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    /// Context size `c`: tokens taken on each side of the target.
    pub window: usize,
    pub keep_punctuation: bool,
    pub keep_stopwords: bool,
    pub use_capitalization: bool,
    pub use_pos: bool,
    pub use_lemma: bool,
    pub feature_scope: FeatureScope,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 2,
            keep_punctuation: true,
            keep_stopwords: true,
            use_capitalization: false,
            use_pos: false,
            use_lemma: false,
            feature_scope: FeatureScope::PerSlot,
        }
    }
}

impl FeatureConfig {
    /// Extra feature width added next to one word embedding of dimension
    /// `word_dim`.
    fn feature_dim(&self, word_dim: usize) -> usize {
        let mut dim = 0;
        if self.use_capitalization {
            dim += CAP_DIM;
        }
        if self.use_pos {
            dim += POS_DIM;
        }
        if self.use_lemma {
            dim += word_dim;
        }
        dim
    }

    /// Total assembled vector length for a store of dimension `word_dim`.
    pub fn input_dim(&self, word_dim: usize) -> usize {
        let slots = 2 * self.window + 1;
        match self.feature_scope {
            FeatureScope::PerSlot => slots * (word_dim + self.feature_dim(word_dim)),
            FeatureScope::TargetOnly => slots * word_dim + self.feature_dim(word_dim),
        }
    }
}

/// Capitalization shape of a token surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapFeature {
    /// Every alphabetic character is uppercase (and there is at least one).
    AllUpper,
    /// First character is uppercase.
    InitialUpper,
    /// Everything else, including tokens with no alphabetic characters.
    Other,
}

impl CapFeature {
    /// Binary encoding: `[1,1]` all-caps, `[1,0]` initial capital, `[0,1]`
    /// otherwise. `[0,0]` never occurs for a real token; it is reserved for
    /// window padding.
    pub fn bits(self) -> [f64; 2] {
        match self {
            CapFeature::AllUpper => [1.0, 1.0],
            CapFeature::InitialUpper => [1.0, 0.0],
            CapFeature::Other => [0.0, 1.0],
        }
    }
}

/// Classifies the capitalization of a non-empty surface string.
pub fn capitalization_features(surface: &str) -> CapFeature {
    debug_assert!(!surface.is_empty());
    let mut has_alpha = false;
    let mut all_upper = true;
    for ch in surface.chars() {
        if ch.is_alphabetic() {
            has_alpha = true;
            if !ch.is_uppercase() {
                all_upper = false;
            }
        }
    }
    if has_alpha && all_upper {
        return CapFeature::AllUpper;
    }
    if surface.chars().next().is_some_and(char::is_uppercase) {
        return CapFeature::InitialUpper;
    }
    CapFeature::Other
}

/// The fixed Penn Treebank tag inventory used for one-hot POS encoding.
#[derive(Debug, Clone)]
pub struct TagRegistry {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagRegistry {
    fn from_lines(text: &str) -> Self {
        let tags: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let index = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TagRegistry { tags, index }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn position(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.tags[index]
    }
}

impl Default for TagRegistry {
    fn default() -> Self {
        Self::from_lines(DEFAULT_TAGS)
    }
}

/// A POS tag as a position in the registry. `index == None` means the tag
/// was not recognized and encodes as the all-zero one-hot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosTag {
    pub index: Option<usize>,
}

impl PosTag {
    pub fn unknown() -> Self {
        PosTag { index: None }
    }
}

/// Tags a document's tokens. When `sidecar` tags are provided they are used
/// verbatim (one per token, in order); otherwise the built-in fallback
/// tagger applies. Returns the tags and the count of sidecar tags that were
/// not in the registry (those encode as all-zero).
pub fn pos_tag(
    tokens: &[Token],
    sidecar: Option<&[String]>,
    registry: &TagRegistry,
) -> Result<(Vec<PosTag>, usize)> {
    if let Some(tags) = sidecar {
        if tags.len() != tokens.len() {
            return Err(Error::InvalidInput(format!(
                "POS sidecar has {} tags for {} tokens",
                tags.len(),
                tokens.len()
            )));
        }
        let mut unknown = 0;
        let resolved = tags
            .iter()
            .map(|t| {
                let index = registry.position(t.trim());
                if index.is_none() {
                    unknown += 1;
                }
                PosTag { index }
            })
            .collect();
        return Ok((resolved, unknown));
    }
    let tagged = tokens
        .iter()
        .map(|t| PosTag {
            index: registry.position(fallback_tag(&t.surface)),
        })
        .collect();
    Ok((tagged, 0))
}

// Fallback tagger cascade: punctuation map, digits, a small closed-class
// lexicon, capitalization, suffix rules, default NN.
fn fallback_tag(surface: &str) -> &'static str {
    let mut chars = surface.chars();
    let first = chars.next().unwrap_or(' ');

    if !first.is_alphanumeric() && chars.as_str().is_empty() {
        return match first {
            '.' | '!' | '?' => ".",
            ',' => ",",
            ':' | ';' | '…' => ":",
            '(' | '[' | '{' => "(",
            ')' | ']' | '}' => ")",
            '"' | '\'' | '\u{2019}' | '\u{201d}' => "''",
            '`' | '\u{2018}' | '\u{201c}' => "``",
            '$' => "$",
            '#' => "#",
            _ => "SYM",
        };
    }
    if first.is_ascii_digit() {
        return "CD";
    }

    let lower = surface.to_lowercase();
    if let Some(tag) = closed_class(&lower) {
        return tag;
    }
    if first.is_uppercase() {
        return "NNP";
    }
    if lower.ends_with("ed") {
        return "VBD";
    }
    if lower.ends_with("ing") {
        return "VBG";
    }
    if lower.ends_with("ly") {
        return "RB";
    }
    if lower.ends_with("est") && lower.len() > 4 {
        return "JJS";
    }
    if lower.ends_with('s')
        && !lower.ends_with("ss")
        && !lower.ends_with("us")
        && !lower.ends_with("is")
        && lower.len() > 3
    {
        return "NNS";
    }
    "NN"
}

fn closed_class(lower: &str) -> Option<&'static str> {
    let tag = match lower {
        "the" | "a" | "an" | "this" | "that" | "these" | "those" => "DT",
        "in" | "of" | "on" | "at" | "by" | "from" | "with" | "for" | "through" | "during"
        | "against" | "between" | "into" | "about" | "after" | "before" | "under" | "over"
        | "within" | "near" => "IN",
        "and" | "or" | "but" | "nor" | "yet" => "CC",
        "to" => "TO",
        "can" | "could" | "may" | "might" | "must" | "shall" | "should" | "will" | "would"
        | "ought" => "MD",
        "i" | "you" | "he" | "she" | "it" | "we" | "they" | "them" | "him" | "her" | "us"
        | "me" => "PRP",
        "my" | "your" | "his" | "its" | "our" | "their" => "PRP$",
        "is" | "has" | "does" => "VBZ",
        "was" | "were" | "had" | "did" => "VBD",
        "am" | "are" | "have" | "do" => "VBP",
        "be" => "VB",
        "been" => "VBN",
        "being" => "VBG",
        "which" | "what" => "WDT",
        "who" | "whom" => "WP",
        "whose" => "WP$",
        "when" | "where" | "why" | "how" => "WRB",
        "not" | "very" | "also" | "often" | "however" | "only" => "RB",
        "there" => "EX",
        _ => return None,
    };
    Some(tag)
}

/// Optional surface → lemma lookup table, consulted before the suffix rules.
#[derive(Debug, Clone, Default)]
pub struct LemmaLexicon {
    entries: HashMap<String, String>,
}

impl LemmaLexicon {
    /// Parses a TSV file of `surface<TAB>lemma` lines; `#` lines ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path)?;
        let mut entries = HashMap::new();
        for (idx, line) in contents.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let (Some(surface), Some(lemma)) = (parts.next(), parts.next()) else {
                return Err(Error::CorpusFormat {
                    file: path.to_path_buf(),
                    line: idx + 1,
                    message: "expected surface<TAB>lemma".into(),
                });
            };
            entries.insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(LemmaLexicon { entries })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        LemmaLexicon {
            entries: pairs
                .into_iter()
                .map(|(s, l)| (s.to_lowercase(), l.to_lowercase()))
                .collect(),
        }
    }

    pub fn get(&self, lower_surface: &str) -> Option<&str> {
        self.entries.get(lower_surface).map(String::as_str)
    }
}

/// Lower-cases and strips common inflection suffixes, longest match first:
/// `-ies→y`, `-ing→∅/+e`, `-ed→∅/+e`, `-es→e/∅`, `-s→∅`. A lexicon entry,
/// when present, wins over the rules.
pub fn lemmatize(surface: &str, lexicon: &LemmaLexicon) -> String {
    let lower = surface.to_lowercase();
    if let Some(lemma) = lexicon.get(&lower) {
        return lemma.to_string();
    }
    if !lower.chars().any(char::is_alphabetic) {
        return lower;
    }

    if let Some(stem) = lower.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.chars().count() >= 2 && stem.chars().any(is_vowel) {
                return undouble_or_restore_e(stem);
            }
        }
    }
    if let Some(stem) = lower.strip_suffix("es") {
        if stem.len() >= 2 {
            // -xes/-ches/-shes/-sses/-zes/-oes lose the whole suffix, the
            // rest keep a silent e.
            let plain = ["x", "ch", "sh", "ss", "z", "o"]
                .iter()
                .any(|end| stem.ends_with(end));
            return if plain { stem.to_string() } else { format!("{stem}e") };
        }
    }
    if let Some(stem) = lower.strip_suffix('s') {
        if stem.len() >= 2 && !stem.ends_with('s') && !stem.ends_with('u') && !stem.ends_with('i')
        {
            return stem.to_string();
        }
    }
    lower
}

fn is_vowel(ch: char) -> bool {
    matches!(ch, 'a' | 'e' | 'i' | 'o' | 'u')
}

// "stopp" → "stop"; "mak" → "make"; "walk" → "walk".
fn undouble_or_restore_e(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == chars[n - 2] && !chars[n - 1].is_ascii_vowel() {
        if !matches!(chars[n - 1], 'l' | 's' | 'z') {
            return chars[..n - 1].iter().collect();
        }
        return stem.to_string();
    }
    if (3..=4).contains(&n) {
        let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
        if !is_vowel(a) && is_vowel(b) && !is_vowel(c) && !matches!(c, 'w' | 'x' | 'y') {
            return format!("{stem}e");
        }
    }
    stem.to_string()
}

trait AsciiVowel {
    fn is_ascii_vowel(&self) -> bool;
}

impl AsciiVowel for char {
    fn is_ascii_vowel(&self) -> bool {
        is_vowel(*self)
    }
}

/// The shipped stop-word list, overridable from a file.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    fn from_lines(text: &str) -> Self {
        StopwordList {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn contains(&self, lower_surface: &str) -> bool {
        self.words.contains(lower_surface)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::from_lines(DEFAULT_STOPWORDS)
    }
}

/// POS sidecar tags keyed by document id: each `<id>.pos` file carries one
/// tag per line, aligned with the document's token order.
pub type SidecarTags = HashMap<String, Vec<String>>;

/// Collects `<id>.pos` sidecar files from `dir` for the given documents.
/// Missing sidecars are fine (the fallback tagger covers those documents).
pub fn load_sidecars(dir: &Path, docs: &[crate::corpus::Document]) -> Result<SidecarTags> {
    let mut map = SidecarTags::new();
    for doc in docs {
        let path = dir.join(format!("{}.pos", doc.id));
        if !path.exists() {
            continue;
        }
        let tags: Vec<String> = std::fs::read_to_string(&path)?
            .lines()
            .map(|l| l.trim().to_string())
            .collect();
        if tags.len() != doc.tokens.len() {
            return Err(Error::CorpusFormat {
                file: path,
                line: 0,
                message: format!(
                    "sidecar has {} tags for {} tokens",
                    tags.len(),
                    doc.tokens.len()
                ),
            });
        }
        map.insert(doc.id.clone(), tags);
    }
    Ok(map)
}

fn keeps_token(token: &Token, config: &FeatureConfig, stopwords: &StopwordList) -> bool {
    let is_word = token.surface.chars().any(char::is_alphanumeric);
    (config.keep_punctuation || is_word)
        && (config.keep_stopwords || !stopwords.contains(&token.surface.to_lowercase()))
}

/// Splits tokens into (kept, dropped) under the config's filtering switches.
/// `keep_punctuation = false` drops tokens with no letter or digit;
/// `keep_stopwords = false` drops tokens whose lower-cased surface is in the
/// stop list. Order is preserved; together the two lists are the input.
pub fn filter_tokens(
    tokens: &[Token],
    config: &FeatureConfig,
    stopwords: &StopwordList,
) -> (Vec<Token>, Vec<Token>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for token in tokens {
        if keeps_token(token, config, stopwords) {
            kept.push(token.clone());
        } else {
            dropped.push(token.clone());
        }
    }
    (kept, dropped)
}

/// Assembled input vector for one classification target, with its layout
/// parameters.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub values: Vector,
    pub window: usize,
    pub slot_dim: usize,
}

/// A document's tokens after filtering, with every per-token channel
/// precomputed so window assembly is pure concatenation.
#[derive(Debug, Clone)]
pub struct PreparedDoc {
    /// Indices of kept tokens in the original token slice.
    pub kept: Vec<usize>,
    pub surfaces: Vec<String>,
    pub labels: Vec<Option<crate::corpus::Label>>,
    word_vecs: Vec<Arc<[f64]>>,
    caps: Vec<[f64; 2]>,
    pos: Vec<PosTag>,
    lemma_vecs: Vec<Arc<[f64]>>,
    /// Sidecar tags outside the registry (encoded all-zero).
    pub unknown_tags: usize,
}

impl PreparedDoc {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }
}

/// The non-config inputs an extractor needs, bundled so runners can build
/// one extractor per experiment variant.
#[derive(Debug, Clone, Default)]
pub struct FeatureResources {
    pub policy: OovPolicy,
    pub stopwords: StopwordList,
    pub registry: TagRegistry,
    pub lexicon: LemmaLexicon,
}

impl FeatureResources {
    pub fn extractor<'s>(
        &self,
        config: FeatureConfig,
        store: &'s EmbeddingStore,
    ) -> FeatureExtractor<'s> {
        FeatureExtractor::new(config, store, self.policy)
            .with_stopwords(self.stopwords.clone())
            .with_registry(self.registry.clone())
            .with_lexicon(self.lexicon.clone())
    }
}

/// Turns (config, store, policy) into window vectors for classification.
pub struct FeatureExtractor<'s> {
    pub config: FeatureConfig,
    store: &'s EmbeddingStore,
    policy: OovPolicy,
    stopwords: StopwordList,
    registry: TagRegistry,
    lexicon: LemmaLexicon,
}

impl<'s> FeatureExtractor<'s> {
    pub fn new(config: FeatureConfig, store: &'s EmbeddingStore, policy: OovPolicy) -> Self {
        FeatureExtractor {
            config,
            store,
            policy,
            stopwords: StopwordList::default(),
            registry: TagRegistry::default(),
            lexicon: LemmaLexicon::default(),
        }
    }

    pub fn with_stopwords(mut self, stopwords: StopwordList) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn with_registry(mut self, registry: TagRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn with_lexicon(mut self, lexicon: LemmaLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn store(&self) -> &EmbeddingStore {
        self.store
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    /// Length of the vectors [`assemble_window`] produces.
    pub fn input_dim(&self) -> usize {
        self.config.input_dim(self.store.dimension())
    }

    /// Filters tokens and precomputes every enabled channel.
    pub fn prepare(&self, tokens: &[Token], sidecar: Option<&[String]>) -> Result<PreparedDoc> {
        let sidecar_tags = match sidecar {
            Some(tags) => Some(pos_tag(tokens, Some(tags), &self.registry)?),
            None => None,
        };

        let mut kept = Vec::new();
        for (i, token) in tokens.iter().enumerate() {
            if keeps_token(token, &self.config, &self.stopwords) {
                kept.push(i);
            }
        }

        let mut word_cache: HashMap<&str, Arc<[f64]>> = HashMap::new();
        let mut lemma_cache: HashMap<String, Arc<[f64]>> = HashMap::new();

        let mut surfaces = Vec::with_capacity(kept.len());
        let mut labels = Vec::with_capacity(kept.len());
        let mut word_vecs = Vec::with_capacity(kept.len());
        let mut caps = Vec::new();
        let mut pos = Vec::new();
        let mut lemma_vecs = Vec::new();
        let mut unknown_tags = 0;

        for &i in &kept {
            let token = &tokens[i];
            surfaces.push(token.surface.clone());
            labels.push(token.label);
            let vec = word_cache
                .entry(token.surface.as_str())
                .or_insert_with(|| lookup(self.store, &token.surface, &self.policy).0)
                .clone();
            word_vecs.push(vec);

            if self.config.use_capitalization {
                caps.push(capitalization_features(&token.surface).bits());
            }
            if self.config.use_pos {
                let tag = match &sidecar_tags {
                    Some((tags, unknown)) => {
                        unknown_tags = *unknown;
                        tags[i]
                    }
                    None => PosTag {
                        index: self.registry.position(fallback_tag(&token.surface)),
                    },
                };
                pos.push(tag);
            }
            if self.config.use_lemma {
                let lemma = lemmatize(&token.surface, &self.lexicon);
                let vec = lemma_cache
                    .entry(lemma)
                    .or_insert_with_key(|l| lookup(self.store, l, &self.policy).0)
                    .clone();
                lemma_vecs.push(vec);
            }
        }

        Ok(PreparedDoc {
            kept,
            surfaces,
            labels,
            word_vecs,
            caps,
            pos,
            lemma_vecs,
            unknown_tags,
        })
    }

    /// Builds the window vector for the kept token at `index`, slots ordered
    /// `[-c .. 0 .. +c]` over the filtered sequence.
    pub fn assemble_window(&self, prep: &PreparedDoc, index: usize) -> Result<FeatureVector> {
        if index >= prep.len() {
            return Err(Error::InvalidInput(format!(
                "window target {index} out of range for {} kept tokens",
                prep.len()
            )));
        }
        let c = self.config.window as isize;
        let word_dim = self.store.dimension();
        let total = self.input_dim();
        let mut values = Vec::with_capacity(total);

        for offset in -c..=c {
            let slot = index as isize + offset;
            let in_bounds = slot >= 0 && (slot as usize) < prep.len();
            let slot = slot as usize;

            if in_bounds {
                values.extend_from_slice(&prep.word_vecs[slot]);
            } else {
                values.extend(std::iter::repeat_n(0.0, word_dim));
            }

            let attach_features = match self.config.feature_scope {
                FeatureScope::PerSlot => true,
                FeatureScope::TargetOnly => offset == 0,
            };
            if !attach_features {
                continue;
            }
            if self.config.use_capitalization {
                if in_bounds {
                    values.extend_from_slice(&prep.caps[slot]);
                } else {
                    values.extend_from_slice(&[0.0, 0.0]);
                }
            }
            if self.config.use_pos {
                let start = values.len();
                values.extend(std::iter::repeat_n(0.0, POS_DIM));
                if in_bounds {
                    if let Some(tag_index) = prep.pos[slot].index {
                        values[start + tag_index] = 1.0;
                    }
                }
            }
            if self.config.use_lemma {
                if in_bounds {
                    values.extend_from_slice(&prep.lemma_vecs[slot]);
                } else {
                    values.extend(std::iter::repeat_n(0.0, word_dim));
                }
            }
        }

        debug_assert_eq!(values.len(), total);
        let slot_dim = word_dim + self.config.feature_dim(word_dim);
        Ok(FeatureVector {
            values: Vector::from(values),
            window: self.config.window,
            slot_dim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    #[test]
    fn capitalization_paper_cases() {
        assert_eq!(capitalization_features("Mexico").bits(), [1.0, 0.0]);
        assert_eq!(capitalization_features("UK").bits(), [1.0, 1.0]);
        assert_eq!(capitalization_features("derived").bits(), [0.0, 1.0]);
        assert_eq!(capitalization_features("2009").bits(), [0.0, 1.0]);
    }

    #[test]
    fn capitalization_mixed_and_unicode() {
        assert_eq!(capitalization_features("McDonald").bits(), [1.0, 0.0]);
        assert_eq!(capitalization_features("École").bits(), [1.0, 0.0]);
        assert_eq!(capitalization_features("H5N1").bits(), [1.0, 1.0]);
        assert_eq!(capitalization_features("-").bits(), [0.0, 1.0]);
    }

    #[test]
    fn registry_has_45_tags() {
        let registry = TagRegistry::default();
        assert_eq!(registry.len(), POS_DIM);
        assert!(registry.position("NN").is_some());
        assert!(registry.position("PRP$").is_some());
        assert!(registry.position("''").is_some());
    }

    #[test]
    fn pos_tag_punctuation_maps_to_ptb_punct() {
        let registry = TagRegistry::default();
        let tokens = tokenize("Mexico .");
        let (tags, _) = pos_tag(&tokens, None, &registry).unwrap();
        assert_eq!(registry.name(tags[1].index.unwrap()), ".");
    }

    #[test]
    fn pos_tag_sidecar_passthrough() {
        let registry = TagRegistry::default();
        let tokens = tokenize("WNV entered Mexico");
        let sidecar = vec!["NNP".to_string(), "VBD".to_string(), "NNP".to_string()];
        let (tags, unknown) = pos_tag(&tokens, Some(&sidecar), &registry).unwrap();
        assert_eq!(unknown, 0);
        assert_eq!(registry.name(tags[0].index.unwrap()), "NNP");
        assert_eq!(registry.name(tags[1].index.unwrap()), "VBD");
    }

    #[test]
    fn pos_tag_sidecar_length_mismatch_is_error() {
        let registry = TagRegistry::default();
        let tokens = tokenize("a b c");
        let sidecar = vec!["DT".to_string()];
        assert!(pos_tag(&tokens, Some(&sidecar), &registry).is_err());
    }

    #[test]
    fn pos_tag_unknown_sidecar_tag_counts_and_zeroes() {
        let registry = TagRegistry::default();
        let tokens = tokenize("a");
        let sidecar = vec!["NOT_A_TAG".to_string()];
        let (tags, unknown) = pos_tag(&tokens, Some(&sidecar), &registry).unwrap();
        assert_eq!(unknown, 1);
        assert_eq!(tags[0].index, None);
    }

    #[test]
    fn pos_fallback_suffix_rule_ed() {
        assert_eq!(fallback_tag("entered"), "VBD");
        assert_eq!(fallback_tag("running"), "VBG");
        assert_eq!(fallback_tag("quickly"), "RB");
        assert_eq!(fallback_tag("2"), "CD");
        assert_eq!(fallback_tag("Mexico"), "NNP");
        assert_eq!(fallback_tag("virus"), "NN");
        assert_eq!(fallback_tag("in"), "IN");
    }

    #[test]
    fn lemmatize_suffix_rules() {
        let lex = LemmaLexicon::default();
        assert_eq!(lemmatize("introductions", &lex), "introduction");
        assert_eq!(lemmatize(".", &lex), ".");
        assert_eq!(lemmatize("Mexico", &lex), "mexico");
        assert_eq!(lemmatize("studies", &lex), "study");
        assert_eq!(lemmatize("entered", &lex), "enter");
        assert_eq!(lemmatize("stopped", &lex), "stop");
        assert_eq!(lemmatize("viruses", &lex), "viruse");
        assert_eq!(lemmatize("boxes", &lex), "box");
    }

    #[test]
    fn lemmatize_lexicon_wins_over_rules() {
        let lex = LemmaLexicon::from_pairs(vec![("viruses".to_string(), "virus".to_string())]);
        assert_eq!(lemmatize("viruses", &lex), "virus");
        assert_eq!(lemmatize("Viruses", &lex), "virus");
    }

    fn store_of(dim: usize, words: &[&str]) -> EmbeddingStore {
        let pairs = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.to_string(), vec![i as f64 + 1.0; dim]))
            .collect::<Vec<_>>();
        EmbeddingStore::from_pairs("test", dim, pairs).unwrap()
    }

    #[test]
    fn filter_keep_both_drops_nothing() {
        let tokens = tokenize("WNV entered Mexico in 2009 .");
        let config = FeatureConfig::default();
        let (kept, dropped) = filter_tokens(&tokens, &config, &StopwordList::default());
        assert_eq!(kept.len(), tokens.len());
        assert!(dropped.is_empty());
    }

    #[test]
    fn filter_drops_stopword_in() {
        let tokens = tokenize("WNV entered Mexico in 2009");
        let config = FeatureConfig {
            keep_stopwords: false,
            ..FeatureConfig::default()
        };
        let (kept, dropped) = filter_tokens(&tokens, &config, &StopwordList::default());
        assert!(dropped.iter().any(|t| t.surface == "in"));
        assert!(kept.iter().all(|t| t.surface != "in"));
    }

    #[test]
    fn filter_drops_punctuation() {
        let tokens = tokenize("Mexico .");
        let config = FeatureConfig {
            keep_punctuation: false,
            ..FeatureConfig::default()
        };
        let (kept, dropped) = filter_tokens(&tokens, &config, &StopwordList::default());
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].surface, ".");
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn window_length_paper_case_1000() {
        let store = store_of(200, &["a"]);
        let config = FeatureConfig {
            window: 2,
            ..FeatureConfig::default()
        };
        assert_eq!(config.input_dim(store.dimension()), 1000);
    }

    #[test]
    fn window_length_c0_is_word_dim() {
        let config = FeatureConfig {
            window: 0,
            ..FeatureConfig::default()
        };
        assert_eq!(config.input_dim(200), 200);
    }

    #[test]
    fn window_length_full_features_c5() {
        let config = FeatureConfig {
            window: 5,
            use_capitalization: true,
            use_pos: true,
            use_lemma: true,
            ..FeatureConfig::default()
        };
        // 11 × (200 + 2 + 45 + 200)
        assert_eq!(config.input_dim(200), 4917);
    }

    #[test]
    fn assembled_length_matches_formula_for_all_subsets() {
        let dims = [3usize, 200];
        for d in dims {
            let store = store_of(d, &["w1", "w2", "w3"]);
            let tokens = tokenize("w1 w2 w3");
            for mask in 0u8..8 {
                for c in 0usize..=5 {
                    let config = FeatureConfig {
                        window: c,
                        use_capitalization: mask & 1 != 0,
                        use_pos: mask & 2 != 0,
                        use_lemma: mask & 4 != 0,
                        ..FeatureConfig::default()
                    };
                    let extractor =
                        FeatureExtractor::new(config, &store, OovPolicy::default());
                    let prep = extractor.prepare(&tokens, None).unwrap();
                    let fv = extractor.assemble_window(&prep, 1).unwrap();
                    let cap = usize::from(mask & 1 != 0);
                    let pos = usize::from(mask & 2 != 0);
                    let lem = usize::from(mask & 4 != 0);
                    let expected = (2 * c + 1) * (d + 2 * cap + POS_DIM * pos + d * lem);
                    assert_eq!(fv.values.len(), expected, "mask={mask} c={c} d={d}");
                }
            }
        }
    }

    #[test]
    fn target_only_scope_length() {
        let config = FeatureConfig {
            window: 2,
            use_capitalization: true,
            use_pos: true,
            use_lemma: true,
            feature_scope: FeatureScope::TargetOnly,
            ..FeatureConfig::default()
        };
        // 5 × 10 word dims + (2 + 45 + 10) once
        assert_eq!(config.input_dim(10), 50 + 57);
    }

    #[test]
    fn center_slot_word_channel_equals_lookup() {
        let store = store_of(4, &["alpha", "beta", "gamma"]);
        let tokens = tokenize("alpha beta gamma");
        let config = FeatureConfig {
            window: 1,
            use_capitalization: true,
            ..FeatureConfig::default()
        };
        let extractor = FeatureExtractor::new(config, &store, OovPolicy::default());
        let prep = extractor.prepare(&tokens, None).unwrap();
        let fv = extractor.assemble_window(&prep, 1).unwrap();
        let slot_dim = 4 + 2;
        let center = &fv.values.as_slice()[slot_dim..slot_dim + 4];
        let (expected, _) = lookup(&store, "beta", &OovPolicy::default());
        assert_eq!(center, expected.as_ref());
    }

    #[test]
    fn out_of_bounds_slots_are_zero_padded() {
        let store = store_of(3, &["solo"]);
        let tokens = tokenize("solo");
        let config = FeatureConfig {
            window: 1,
            use_capitalization: true,
            ..FeatureConfig::default()
        };
        let extractor = FeatureExtractor::new(config, &store, OovPolicy::default());
        let prep = extractor.prepare(&tokens, None).unwrap();
        let fv = extractor.assemble_window(&prep, 0).unwrap();
        let slot = 3 + 2;
        // left pad: zero word channel and [0,0] capitalization
        assert!(fv.values.as_slice()[..slot].iter().all(|&v| v == 0.0));
        // right pad
        assert!(fv.values.as_slice()[2 * slot..].iter().all(|&v| v == 0.0));
        // center cap is [1,0] never [0,0]
        assert_eq!(&fv.values.as_slice()[slot + 3..slot + 5], &[0.0, 1.0]);
    }

    #[test]
    fn assemble_rejects_out_of_range_index() {
        let store = store_of(2, &["a"]);
        let tokens = tokenize("a");
        let extractor =
            FeatureExtractor::new(FeatureConfig::default(), &store, OovPolicy::default());
        let prep = extractor.prepare(&tokens, None).unwrap();
        assert!(extractor.assemble_window(&prep, 5).is_err());
    }

    proptest! {
        #[test]
        fn capitalization_range_is_three_valued(surface in "\\PC{1,12}") {
            let bits = capitalization_features(&surface).bits();
            prop_assert!(bits == [1.0, 0.0] || bits == [0.0, 1.0] || bits == [1.0, 1.0]);
        }

        #[test]
        fn filter_partitions_input(text in "[a-zA-Z .,in]{0,60}") {
            let tokens = tokenize(&text);
            for (kp, ks) in [(true, true), (true, false), (false, true), (false, false)] {
                let config = FeatureConfig {
                    keep_punctuation: kp,
                    keep_stopwords: ks,
                    ..FeatureConfig::default()
                };
                let (kept, dropped) = filter_tokens(&tokens, &config, &StopwordList::default());
                prop_assert_eq!(kept.len() + dropped.len(), tokens.len());
                if kp && ks {
                    prop_assert!(dropped.is_empty());
                }
                // order-preserving partition: merge by offsets reproduces input
                let mut merged: Vec<&Token> = kept.iter().chain(dropped.iter()).collect();
                merged.sort_by_key(|t| t.start);
                let original: Vec<&Token> = tokens.iter().collect();
                prop_assert_eq!(
                    merged.iter().map(|t| &t.surface).collect::<Vec<_>>(),
                    original.iter().map(|t| &t.surface).collect::<Vec<_>>()
                );
            }
        }
    }
}
