//! Articles, offset-preserving tokenization, standoff span annotations, and
//! corpus statistics.
//!
//! On-disk layout: each document is a pair `<id>.txt` (raw UTF-8 text) and
//! `<id>.ann` (one span per line, `start<TAB>end<TAB>surface`, `#` lines
//! ignored). Splits are manifest files with one document id per line.
//!
//! All character offsets count Unicode scalar values, not bytes.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Per-token binary classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Toponym,
    NonToponym,
}

/// A token with its surface form and half-open character offsets into the
/// document text.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    /// Set by [`project_labels`]; `None` until spans are projected.
    pub label: Option<Label>,
}

/// A gold toponym mention, stored standoff by character offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

/// One article: raw text, its tokens, and gold toponym spans.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub gold_spans: Vec<Span>,
}

/// Train/dev/test document lists, disjoint by id.
#[derive(Debug, Clone, Default)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

/// Splits text into tokens: each maximal run of letters/digits is one token,
/// each remaining non-whitespace character is its own token. Offsets index
/// the original text in characters.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut run = String::new();

    for (i, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
            run.push(ch);
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(Token {
                surface: std::mem::take(&mut run),
                start,
                end: i,
                label: None,
            });
        }
        if !ch.is_whitespace() {
            tokens.push(Token {
                surface: ch.to_string(),
                start: i,
                end: i + 1,
                label: None,
            });
        }
    }
    if let Some(start) = run_start {
        let end = start + run.chars().count();
        tokens.push(Token {
            surface: run,
            start,
            end,
            label: None,
        });
    }
    tokens
}

/// Labels every token: toponym iff its `[start, end)` range overlaps any gold
/// span, non-toponym otherwise. Idempotent.
pub fn project_labels(doc: &mut Document) -> Result<()> {
    let text_len = doc.text.chars().count();
    for span in &doc.gold_spans {
        if span.start >= span.end || span.end > text_len {
            return Err(Error::CorpusFormat {
                file: PathBuf::from(format!("{}.ann", doc.id)),
                line: 0,
                message: format!(
                    "span [{}, {}) outside text bounds (len {})",
                    span.start, span.end, text_len
                ),
            });
        }
    }
    for token in &mut doc.tokens {
        let overlaps = doc
            .gold_spans
            .iter()
            .any(|s| token.start < s.end && s.start < token.end);
        token.label = Some(if overlaps {
            Label::Toponym
        } else {
            Label::NonToponym
        });
    }
    Ok(())
}

fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

/// Parses a standoff span file (`start<TAB>end<TAB>surface` per line, `#`
/// lines ignored) and validates offsets and surfaces against `text`.
pub fn parse_spans(path: &Path, text: &str) -> Result<Vec<Span>> {
    let contents = fs::read_to_string(path)?;
    let text_len = text.chars().count();
    let mut spans = Vec::new();
    for (idx, line) in contents.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (start, end, surface) = match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(e), Some(sur)) => (s, e, sur),
            _ => {
                return Err(Error::CorpusFormat {
                    file: path.to_path_buf(),
                    line: lineno,
                    message: "expected start<TAB>end<TAB>surface".into(),
                })
            }
        };
        let start: usize = start.trim().parse().map_err(|_| Error::CorpusFormat {
            file: path.to_path_buf(),
            line: lineno,
            message: format!("bad start offset {start:?}"),
        })?;
        let end: usize = end.trim().parse().map_err(|_| Error::CorpusFormat {
            file: path.to_path_buf(),
            line: lineno,
            message: format!("bad end offset {end:?}"),
        })?;
        if start >= end || end > text_len {
            return Err(Error::CorpusFormat {
                file: path.to_path_buf(),
                line: lineno,
                message: format!("span [{start}, {end}) outside text bounds (len {text_len})"),
            });
        }
        let actual = char_slice(text, start, end);
        if actual != surface {
            return Err(Error::CorpusFormat {
                file: path.to_path_buf(),
                line: lineno,
                message: format!(
                    "surface mismatch: annotation says {surface:?}, text has {actual:?}"
                ),
            });
        }
        spans.push(Span {
            start,
            end,
            surface: surface.to_string(),
        });
    }
    Ok(spans)
}

/// Loads every `<id>.txt` / `<id>.ann` pair in `dir`, tokenizes, and
/// validates annotations against the text. Both files of a pair must be
/// present; an orphan of either kind is an error.
pub fn load_corpus(dir: &Path) -> Result<Vec<Document>> {
    let mut txt_ids = HashSet::new();
    let mut ann_ids = HashSet::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        let stem = stem.to_string_lossy().into_owned();
        match ext.to_string_lossy().as_ref() {
            "txt" => {
                txt_ids.insert(stem);
            }
            "ann" => {
                ann_ids.insert(stem);
            }
            _ => {}
        }
    }
    for id in &txt_ids {
        if !ann_ids.contains(id) {
            return Err(Error::CorpusFormat {
                file: dir.join(format!("{id}.txt")),
                line: 0,
                message: "orphan text file: no matching .ann".into(),
            });
        }
    }
    for id in &ann_ids {
        if !txt_ids.contains(id) {
            return Err(Error::CorpusFormat {
                file: dir.join(format!("{id}.ann")),
                line: 0,
                message: "orphan annotation file: no matching .txt".into(),
            });
        }
    }

    let mut ids: Vec<_> = txt_ids.into_iter().collect();
    ids.sort();
    ids.iter().map(|id| load_document(dir, id)).collect()
}

/// Loads every `.txt` file in `dir` without requiring annotations: gold
/// spans come from a matching `.ann` when present and are empty otherwise.
/// Used for prediction-time input and vocabulary accounting.
pub fn load_texts(dir: &Path) -> Result<Vec<Document>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem() {
                ids.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    ids.sort();
    ids.iter().map(|id| load_document(dir, id)).collect()
}

/// Loads a single `<id>.txt` / `<id>.ann` pair.
pub fn load_document(dir: &Path, id: &str) -> Result<Document> {
    let text = fs::read_to_string(dir.join(format!("{id}.txt")))?;
    let ann_path = dir.join(format!("{id}.ann"));
    let gold_spans = if ann_path.exists() {
        parse_spans(&ann_path, &text)?
    } else {
        Vec::new()
    };
    let tokens = tokenize(&text);
    Ok(Document {
        id: id.to_string(),
        text,
        tokens,
        gold_spans,
    })
}

/// Reads a split manifest: one document id per line, `#` lines ignored.
pub fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let contents = fs::read_to_string(path)?;
    Ok(contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Loads a train/dev/test split from three manifest files, pulling documents
/// from `dir`. Splits must be disjoint by document id.
pub fn load_split(
    dir: &Path,
    train_manifest: &Path,
    dev_manifest: &Path,
    test_manifest: &Path,
) -> Result<CorpusSplit> {
    let train_ids = read_manifest(train_manifest)?;
    let dev_ids = read_manifest(dev_manifest)?;
    let test_ids = read_manifest(test_manifest)?;

    let mut seen: HashSet<&str> = HashSet::new();
    for id in train_ids.iter().chain(&dev_ids).chain(&test_ids) {
        if !seen.insert(id) {
            return Err(Error::InvalidInput(format!(
                "document id {id:?} appears in more than one split"
            )));
        }
    }

    let load_ids = |ids: &[String]| -> Result<Vec<Document>> {
        ids.iter().map(|id| load_document(dir, id)).collect()
    };
    Ok(CorpusSplit {
        train: load_ids(&train_ids)?,
        dev: load_ids(&dev_ids)?,
        test: load_ids(&test_ids)?,
    })
}

/// Statistics for one split, mirroring the corpus summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub articles: usize,
    /// Mean count of word tokens (tokens containing a letter or digit) per
    /// article.
    pub avg_words: f64,
    /// Mean count of gold spans per article.
    pub avg_toponyms: f64,
    /// Percentage of tokens labeled toponym; the dominant class is tracked
    /// because the corpus is extremely imbalanced.
    pub toponym_token_pct: f64,
}

/// Full corpus statistics keyed by split name.
pub fn corpus_stats(split: &CorpusSplit) -> BTreeMap<&'static str, SplitStats> {
    let mut out = BTreeMap::new();
    out.insert("train", split_stats(&split.train));
    out.insert("dev", split_stats(&split.dev));
    out.insert("test", split_stats(&split.test));
    out
}

/// Statistics for a single document list.
pub fn split_stats(docs: &[Document]) -> SplitStats {
    if docs.is_empty() {
        return SplitStats {
            articles: 0,
            avg_words: 0.0,
            avg_toponyms: 0.0,
            toponym_token_pct: 0.0,
        };
    }
    let mut words = 0usize;
    let mut spans = 0usize;
    let mut tokens = 0usize;
    let mut toponym_tokens = 0usize;
    for doc in docs {
        words += doc
            .tokens
            .iter()
            .filter(|t| t.surface.chars().any(char::is_alphanumeric))
            .count();
        spans += doc.gold_spans.len();
        tokens += doc.tokens.len();
        toponym_tokens += doc
            .tokens
            .iter()
            .filter(|t| t.label == Some(Label::Toponym))
            .count();
    }
    let n = docs.len() as f64;
    SplitStats {
        articles: docs.len(),
        avg_words: words as f64 / n,
        avg_toponyms: spans as f64 / n,
        toponym_token_pct: if tokens == 0 {
            0.0
        } else {
            100.0 * toponym_tokens as f64 / tokens as f64
        },
    }
}
