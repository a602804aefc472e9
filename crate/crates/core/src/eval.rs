//! Token-level scoring, the eight-variant ablation matrix, the window-size
//! sweep, and per-token confidence dumps.
//!
//! Scoring is token-level over the toponym class. Tokens dropped by feature
//! filtering are auto-predicted non-toponym. A strict span-level score is
//! also emitted for reference: a gold span counts only when a maximal
//! predicted run covers exactly its tokens.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusSplit, Document, Label};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureResources, SidecarTags};
use crate::network::{init_model, ArchConfig, ModelParams};
use crate::training::{train, TrainConfig};

/// Token-level confusion counts over the toponym class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn add(&mut self, pred: Label, gold: Label) {
        match (pred, gold) {
            (Label::Toponym, Label::Toponym) => self.tp += 1,
            (Label::Toponym, Label::NonToponym) => self.fp += 1,
            (Label::NonToponym, Label::Toponym) => self.fn_ += 1,
            (Label::NonToponym, Label::NonToponym) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    fn degenerate(&self) -> bool {
        self.tp + self.fp == 0 && self.tp + self.fn_ == 0
    }

    /// Precision as a percentage. With no predicted positives this is 0,
    /// unless the gold side also has none, in which case P = R = F1 = 100.
    pub fn precision(&self) -> f64 {
        if self.degenerate() {
            return 100.0;
        }
        if self.tp + self.fp == 0 {
            return 0.0;
        }
        100.0 * self.tp as f64 / (self.tp + self.fp) as f64
    }

    pub fn recall(&self) -> f64 {
        if self.degenerate() {
            return 100.0;
        }
        if self.tp + self.fn_ == 0 {
            return 0.0;
        }
        100.0 * self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn f1(&self) -> f64 {
        if self.degenerate() {
            return 100.0;
        }
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            return 0.0;
        }
        2.0 * p * r / (p + r)
    }
}

/// Rounds a percentage half-up to two decimals; counts stay exact
/// internally, rounding happens only at presentation.
pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Scoring result: overall counts plus a per-document breakdown.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub totals: Counts,
    pub per_doc: Vec<(String, Counts)>,
    /// Strict span-level counts, for reference.
    pub span_totals: Counts,
}

impl EvalReport {
    pub fn precision(&self) -> f64 {
        self.totals.precision()
    }

    pub fn recall(&self) -> f64 {
        self.totals.recall()
    }

    pub fn f1(&self) -> f64 {
        self.totals.f1()
    }

    /// `name  context  precision  recall  f1` header plus one row.
    pub fn to_tsv(&self, name: &str, context: usize) -> String {
        let mut out = String::from("name\tcontext\tprecision\trecall\tf1\n");
        out.push_str(&format!(
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
            name,
            context,
            round2(self.precision()),
            round2(self.recall()),
            round2(self.f1())
        ));
        out
    }
}

/// Token-level counts for one aligned prediction/gold pair.
pub fn score(pred: &[Label], gold: &[Label]) -> Result<Counts> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension {
            context: "score label sequences",
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    let mut counts = Counts::default();
    for (&p, &g) in pred.iter().zip(gold) {
        counts.add(p, g);
    }
    Ok(counts)
}

/// Maximal runs of toponym-predicted tokens, as (first, last) token index
/// ranges.
fn predicted_runs(labels: &[Label]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &label) in labels.iter().enumerate() {
        match (label, start) {
            (Label::Toponym, None) => start = Some(i),
            (Label::NonToponym, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, labels.len() - 1));
    }
    runs
}

/// Strict span-level counts: a gold span is a true positive iff some maximal
/// predicted run covers exactly the tokens the span overlaps.
pub fn span_score(doc: &Document, pred: &[Label]) -> Result<Counts> {
    if pred.len() != doc.tokens.len() {
        return Err(Error::Dimension {
            context: "span_score labels",
            expected: doc.tokens.len(),
            actual: pred.len(),
        });
    }
    let runs = predicted_runs(pred);
    let gold_ranges: Vec<(usize, usize)> = doc
        .gold_spans
        .iter()
        .filter_map(|span| {
            let covered: Vec<usize> = doc
                .tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.start < span.end && span.start < t.end)
                .map(|(i, _)| i)
                .collect();
            covered.first().map(|&f| (f, *covered.last().expect("non-empty")))
        })
        .collect();

    let run_set: HashSet<(usize, usize)> = runs.iter().copied().collect();
    let gold_set: HashSet<(usize, usize)> = gold_ranges.iter().copied().collect();
    let tp = gold_ranges.iter().filter(|r| run_set.contains(r)).count() as u64;
    Ok(Counts {
        tp,
        fp: runs.iter().filter(|r| !gold_set.contains(r)).count() as u64,
        fn_: gold_ranges.len() as u64 - tp,
        tn: 0,
    })
}

/// Per-token predictions for a whole document, aligned with `doc.tokens`.
/// Tokens dropped by filtering come back as non-toponym.
pub fn predict_doc(
    model: &ModelParams,
    extractor: &FeatureExtractor,
    doc: &Document,
    sidecar: Option<&[String]>,
) -> Result<Vec<Label>> {
    let prep = extractor.prepare(&doc.tokens, sidecar)?;
    let mut labels = vec![Label::NonToponym; doc.tokens.len()];
    for i in 0..prep.len() {
        let x = extractor.assemble_window(&prep, i)?.values;
        labels[prep.kept[i]] = model.forward(&x)?.label;
    }
    Ok(labels)
}

/// Scores `model` over labeled documents, accumulating token-level counts
/// per document plus the strict span-level reference counts.
pub fn evaluate_model(
    model: &ModelParams,
    extractor: &FeatureExtractor,
    docs: &[Document],
    sidecars: &SidecarTags,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for doc in docs {
        let pred = predict_doc(model, extractor, doc, sidecars.get(&doc.id).map(Vec::as_slice))?;
        let gold: Vec<Label> = doc
            .tokens
            .iter()
            .map(|t| {
                t.label.ok_or_else(|| {
                    Error::InvalidInput(format!("document {:?} has unlabeled tokens", doc.id))
                })
            })
            .collect::<Result<_>>()?;
        let counts = score(&pred, &gold)?;
        report.totals.merge(&counts);
        report.span_totals.merge(&span_score(doc, &pred)?);
        report.per_doc.push((doc.id.clone(), counts));
    }
    Ok(report)
}

/// Architecture parameters of one experiment row; the input dimension comes
/// from the row's feature configuration and the store.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchSpec {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub dropout_p: f64,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec {
            hidden_layers: 3,
            hidden_units: 500,
            dropout_p: 0.5,
        }
    }
}

impl ArchSpec {
    pub fn baseline() -> Self {
        ArchSpec {
            hidden_layers: 2,
            hidden_units: 150,
            dropout_p: 0.5,
        }
    }

    pub fn arch(&self, input_dim: usize) -> ArchConfig {
        ArchConfig {
            input_dim,
            hidden_layers: self.hidden_layers,
            hidden_units: self.hidden_units,
            dropout_p: self.dropout_p,
            output_classes: 2,
        }
    }
}

/// One named experiment variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub features: FeatureConfig,
    pub training: TrainConfig,
    pub arch: ArchSpec,
}

/// A list of experiment variants with unique names.
#[derive(Debug, Clone, Default)]
pub struct AblationSpec {
    pub rows: Vec<AblationRow>,
}

impl AblationSpec {
    pub fn new(rows: Vec<AblationRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !seen.insert(row.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate ablation row name {:?}",
                    row.name
                )));
            }
        }
        Ok(AblationSpec { rows })
    }
}

/// The eight shipped experiment variants, in published row order 1..8:
/// punctuation/stop-word removal, the baseline shape, the basic model, then
/// capitalization, POS, weighted loss, and lemma additions.
pub fn table_presets() -> AblationSpec {
    let base_features = FeatureConfig::default(); // window 2, keep everything
    let unweighted = TrainConfig {
        class_weights: (1.0, 1.0),
        ..TrainConfig::default()
    };
    let weighted = TrainConfig::default();

    let row = |name: &str, features: FeatureConfig, training: TrainConfig, arch: ArchSpec| {
        AblationRow {
            name: name.to_string(),
            features,
            training,
            arch,
        }
    };

    let rows = vec![
        row(
            "nopunct",
            FeatureConfig {
                keep_punctuation: false,
                ..base_features
            },
            unweighted,
            ArchSpec::default(),
        ),
        row(
            "nostop",
            FeatureConfig {
                keep_stopwords: false,
                ..base_features
            },
            unweighted,
            ArchSpec::default(),
        ),
        row("baseline", base_features, unweighted, ArchSpec::baseline()),
        row("basic", base_features, unweighted, ArchSpec::default()),
        row(
            "cap",
            FeatureConfig {
                use_capitalization: true,
                ..base_features
            },
            unweighted,
            ArchSpec::default(),
        ),
        row(
            "pos",
            FeatureConfig {
                window: 5,
                use_capitalization: true,
                use_pos: true,
                ..base_features
            },
            unweighted,
            ArchSpec::default(),
        ),
        row(
            "weighted",
            FeatureConfig {
                window: 5,
                use_capitalization: true,
                use_pos: true,
                ..base_features
            },
            weighted,
            ArchSpec::default(),
        ),
        row(
            "full",
            FeatureConfig {
                window: 5,
                use_capitalization: true,
                use_pos: true,
                use_lemma: true,
                ..base_features
            },
            weighted,
            ArchSpec::default(),
        ),
    ];
    AblationSpec::new(rows).expect("preset names are unique")
}

/// Outcome of one ablation row: metrics (seed means when several seeds ran)
/// or the error that stopped the row.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub name: String,
    pub context: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// max − min F1 across seeds; 0 for a single seed.
    pub f1_spread: f64,
    pub error: Option<String>,
}

fn run_row(
    row: &AblationRow,
    split: &CorpusSplit,
    store: &EmbeddingStore,
    resources: &FeatureResources,
    sidecars: &SidecarTags,
    seeds: &[u64],
) -> Result<(f64, f64, f64, f64)> {
    let extractor = resources.extractor(row.features, store);
    let input_dim = extractor.input_dim();
    let mut metrics = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let training = TrainConfig {
            seed,
            ..row.training
        };
        let model = init_model(row.arch.arch(input_dim), seed)?;
        let (best, _) = train(
            model,
            &split.train,
            &split.dev,
            &extractor,
            sidecars,
            &training,
        )?;
        let report = evaluate_model(&best, &extractor, &split.test, sidecars)?;
        metrics.push((report.precision(), report.recall(), report.f1()));
    }
    let n = metrics.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| metrics.iter().map(f).sum::<f64>() / n;
    let f1s: Vec<f64> = metrics.iter().map(|m| m.2).collect();
    let spread = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - f1s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((mean(|m| m.0), mean(|m| m.1), mean(|m| m.2), spread))
}

/// Trains and evaluates every row of `spec` on the split. A row failure is
/// recorded in its outcome; remaining rows still run. Passing several seeds
/// reports per-row means and the F1 spread.
pub fn run_ablation(
    spec: &AblationSpec,
    split: &CorpusSplit,
    store: &EmbeddingStore,
    resources: &FeatureResources,
    sidecars: &SidecarTags,
    seeds: &[u64],
) -> Vec<AblationOutcome> {
    spec.rows
        .iter()
        .map(|row| {
            let seed_list: Vec<u64> = if seeds.is_empty() {
                vec![row.training.seed]
            } else {
                seeds.to_vec()
            };
            match run_row(row, split, store, resources, sidecars, &seed_list) {
                Ok((precision, recall, f1, f1_spread)) => AblationOutcome {
                    name: row.name.clone(),
                    context: row.features.window,
                    precision,
                    recall,
                    f1,
                    f1_spread,
                    error: None,
                },
                Err(e) => AblationOutcome {
                    name: row.name.clone(),
                    context: row.features.window,
                    precision: 0.0,
                    recall: 0.0,
                    f1: 0.0,
                    f1_spread: 0.0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// TSV rendering of ablation outcomes; failed rows appear as `#` comments.
pub fn ablation_tsv(outcomes: &[AblationOutcome]) -> String {
    let mut out = String::from("name\tcontext\tprecision\trecall\tf1\n");
    for o in outcomes {
        match &o.error {
            Some(err) => out.push_str(&format!("# row {} failed: {}\n", o.name, err)),
            None => out.push_str(&format!(
                "{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
                o.name,
                o.context,
                round2(o.precision),
                round2(o.recall),
                round2(o.f1)
            )),
        }
    }
    out
}

/// One point of the window-size sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub context: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub error: Option<String>,
}

/// Trains one model per context size in `range`, holding everything else
/// fixed, and reports test metrics per size (plot-ready).
pub fn sweep_window(
    range: std::ops::RangeInclusive<usize>,
    base: &AblationRow,
    split: &CorpusSplit,
    store: &EmbeddingStore,
    resources: &FeatureResources,
    sidecars: &SidecarTags,
) -> Vec<SweepPoint> {
    range
        .map(|c| {
            let row = AblationRow {
                name: format!("c{c}"),
                features: FeatureConfig {
                    window: c,
                    ..base.features
                },
                training: base.training,
                arch: base.arch,
            };
            match run_row(
                &row,
                split,
                store,
                resources,
                sidecars,
                &[row.training.seed],
            ) {
                Ok((precision, recall, f1, _)) => SweepPoint {
                    context: c,
                    precision,
                    recall,
                    f1,
                    error: None,
                },
                Err(e) => SweepPoint {
                    context: c,
                    precision: 0.0,
                    recall: 0.0,
                    f1: 0.0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// TSV rendering of the window sweep: `c precision recall f1`.
pub fn sweep_tsv(points: &[SweepPoint]) -> String {
    let mut out = String::from("c\tprecision\trecall\tf1\n");
    for p in points {
        match &p.error {
            Some(err) => out.push_str(&format!("# c={} failed: {}\n", p.context, err)),
            None => out.push_str(&format!(
                "{}\t{:.2}\t{:.2}\t{:.2}\n",
                p.context,
                round2(p.precision),
                round2(p.recall),
                round2(p.f1)
            )),
        }
    }
    out
}

/// One classified token with the model's categorical confidence.
#[derive(Debug, Clone)]
pub struct ConfidenceRecord {
    pub doc_id: String,
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub p_toponym: f64,
    pub p_non_toponym: f64,
    pub gold: Label,
}

/// Per-token probabilities over the kept tokens of labeled documents. With
/// `sample = Some(n)`, a seeded sample of `n` gold-toponym and `n`
/// gold-non-toponym records is returned instead of everything.
pub fn dump_confidences(
    model: &ModelParams,
    extractor: &FeatureExtractor,
    docs: &[Document],
    sidecars: &SidecarTags,
    sample: Option<usize>,
    seed: u64,
) -> Result<Vec<ConfidenceRecord>> {
    let mut records = Vec::new();
    for doc in docs {
        let prep = extractor.prepare(&doc.tokens, sidecars.get(&doc.id).map(Vec::as_slice))?;
        for i in 0..prep.len() {
            let token = &doc.tokens[prep.kept[i]];
            let gold = token.label.ok_or_else(|| {
                Error::InvalidInput(format!("document {:?} has unlabeled tokens", doc.id))
            })?;
            let x = extractor.assemble_window(&prep, i)?.values;
            let pred = model.forward(&x)?;
            records.push(ConfidenceRecord {
                doc_id: doc.id.clone(),
                surface: token.surface.clone(),
                start: token.start,
                end: token.end,
                p_toponym: pred.p_toponym(),
                p_non_toponym: pred.p_non_toponym(),
                gold,
            });
        }
    }
    if let Some(n) = sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut toponyms, mut rest): (Vec<_>, Vec<_>) = records
            .into_iter()
            .partition(|r| r.gold == Label::Toponym);
        toponyms.shuffle(&mut rng);
        rest.shuffle(&mut rng);
        toponyms.truncate(n);
        rest.truncate(n);
        toponyms.append(&mut rest);
        records = toponyms;
    }
    Ok(records)
}

/// TSV rendering of confidence records.
pub fn confidence_tsv(records: &[ConfidenceRecord]) -> String {
    let mut out = String::from("doc\ttoken\tstart\tend\tp_toponym\tp_nontoponym\tgold\n");
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\n",
            r.doc_id,
            r.surface,
            r.start,
            r.end,
            r.p_toponym,
            r.p_non_toponym,
            match r.gold {
                Label::Toponym => "toponym",
                Label::NonToponym => "non-toponym",
            }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{project_labels, tokenize, Span};
    use crate::embeddings::OovPolicy;
    use rand::Rng;

    #[test]
    fn perfect_predictions_score_100() {
        let gold = vec![Label::Toponym, Label::NonToponym, Label::Toponym];
        let counts = score(&gold, &gold).unwrap();
        assert_eq!(counts.precision(), 100.0);
        assert_eq!(counts.recall(), 100.0);
        assert_eq!(counts.f1(), 100.0);
    }

    #[test]
    fn hand_counted_two_one_one() {
        // TP=2, FP=1, FN=1 → 66.67 across the board
        let counts = Counts {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 10,
        };
        assert_eq!(round2(counts.precision()), 66.67);
        assert_eq!(round2(counts.recall()), 66.67);
        assert_eq!(round2(counts.f1()), 66.67);
    }

    #[test]
    fn score_rejects_length_mismatch() {
        assert!(score(&[Label::Toponym], &[]).is_err());
    }

    #[test]
    fn degenerate_both_empty_is_100() {
        let counts = Counts {
            tn: 5,
            ..Counts::default()
        };
        assert_eq!(counts.precision(), 100.0);
        assert_eq!(counts.recall(), 100.0);
        assert_eq!(counts.f1(), 100.0);
    }

    #[test]
    fn degenerate_no_predictions_with_gold_is_zero() {
        let counts = Counts {
            fn_: 3,
            tn: 5,
            ..Counts::default()
        };
        assert_eq!(counts.precision(), 0.0);
        assert_eq!(counts.recall(), 0.0);
        assert_eq!(counts.f1(), 0.0);
    }

    /// Independent brute-force tally used as the scorer oracle.
    fn brute_force(pred: &[Label], gold: &[Label]) -> (u64, u64, u64, u64) {
        let mut tally = (0, 0, 0, 0);
        for i in 0..pred.len() {
            let p = pred[i] == Label::Toponym;
            let g = gold[i] == Label::Toponym;
            if p && g {
                tally.0 += 1;
            }
            if p && !g {
                tally.1 += 1;
            }
            if !p && g {
                tally.2 += 1;
            }
            if !p && !g {
                tally.3 += 1;
            }
        }
        tally
    }

    #[test]
    fn scorer_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let len = rng.gen_range(0..50);
            let flip = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.3) {
                    Label::Toponym
                } else {
                    Label::NonToponym
                }
            };
            let pred: Vec<Label> = (0..len).map(|_| flip(&mut rng)).collect();
            let gold: Vec<Label> = (0..len).map(|_| flip(&mut rng)).collect();
            let counts = score(&pred, &gold).unwrap();
            let (tp, fp, fn_, tn) = brute_force(&pred, &gold);
            assert_eq!((counts.tp, counts.fp, counts.fn_, counts.tn), (tp, fp, fn_, tn));
        }
    }

    #[test]
    fn scoring_is_invariant_to_document_order() {
        let a = (
            vec![Label::Toponym, Label::NonToponym],
            vec![Label::Toponym, Label::Toponym],
        );
        let b = (
            vec![Label::NonToponym, Label::Toponym, Label::Toponym],
            vec![Label::NonToponym, Label::NonToponym, Label::Toponym],
        );
        let mut forward = score(&a.0, &a.1).unwrap();
        forward.merge(&score(&b.0, &b.1).unwrap());
        let mut backward = score(&b.0, &b.1).unwrap();
        backward.merge(&score(&a.0, &a.1).unwrap());
        assert_eq!(forward, backward);
    }

    #[test]
    fn f1_is_harmonic_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let counts = Counts {
                tp: rng.gen_range(0..20),
                fp: rng.gen_range(0..20),
                fn_: rng.gen_range(0..20),
                tn: rng.gen_range(0..20),
            };
            let (p, r, f1) = (counts.precision(), counts.recall(), counts.f1());
            if p + r > 0.0 {
                assert!((f1 - 2.0 * p * r / (p + r)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn predicted_runs_merge_adjacent_tokens() {
        use Label::{NonToponym as N, Toponym as T};
        assert_eq!(predicted_runs(&[N, T, T, N, T]), vec![(1, 2), (4, 4)]);
        assert_eq!(predicted_runs(&[T, T]), vec![(0, 1)]);
        assert_eq!(predicted_runs(&[N, N]), vec![]);
    }

    #[test]
    fn span_score_requires_exact_run_match() {
        let text = "We visited New York today";
        let mut doc = Document {
            id: "d".into(),
            tokens: tokenize(text),
            gold_spans: vec![Span {
                start: 11,
                end: 19,
                surface: "New York".into(),
            }],
            text: text.into(),
        };
        project_labels(&mut doc).unwrap();
        use Label::{NonToponym as N, Toponym as T};

        // exact match
        let counts = span_score(&doc, &[N, N, T, T, N]).unwrap();
        assert_eq!((counts.tp, counts.fp, counts.fn_), (1, 0, 0));
        // partial coverage is a miss and a false run
        let counts = span_score(&doc, &[N, N, T, N, N]).unwrap();
        assert_eq!((counts.tp, counts.fp, counts.fn_), (0, 1, 1));
        // overshooting run is also wrong
        let counts = span_score(&doc, &[N, T, T, T, N]).unwrap();
        assert_eq!((counts.tp, counts.fp, counts.fn_), (0, 1, 1));
    }

    #[test]
    fn ablation_presets_have_published_shape() {
        let spec = table_presets();
        assert_eq!(spec.rows.len(), 8);
        let names: Vec<&str> = spec.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["nopunct", "nostop", "baseline", "basic", "cap", "pos", "weighted", "full"]
        );
        let by_name = |n: &str| spec.rows.iter().find(|r| r.name == n).unwrap();

        assert!(!by_name("nopunct").features.keep_punctuation);
        assert!(!by_name("nostop").features.keep_stopwords);
        assert_eq!(by_name("baseline").arch.hidden_layers, 2);
        assert_eq!(by_name("baseline").arch.hidden_units, 150);
        assert_eq!(by_name("basic").features.window, 2);
        assert_eq!(by_name("pos").features.window, 5);
        assert_eq!(by_name("weighted").training.class_weights, (2.0, 1.0));
        assert_eq!(by_name("basic").training.class_weights, (1.0, 1.0));
        assert!(by_name("full").features.use_lemma);
        assert_eq!(by_name("full").features.window, 5);
    }

    #[test]
    fn ablation_smoke_one_row_toy_corpus() {
        let (docs, store) = crate::testutil::synthetic_corpus(9, 3);
        let split = CorpusSplit {
            train: docs[..5].to_vec(),
            dev: docs[5..7].to_vec(),
            test: docs[7..].to_vec(),
        };
        let spec = AblationSpec::new(vec![AblationRow {
            name: "smoke".into(),
            features: FeatureConfig {
                window: 1,
                ..FeatureConfig::default()
            },
            training: TrainConfig {
                max_epochs: 2,
                ..TrainConfig::default()
            },
            arch: ArchSpec {
                hidden_layers: 1,
                hidden_units: 4,
                dropout_p: 0.0,
            },
        }])
        .unwrap();
        let outcomes = run_ablation(
            &spec,
            &split,
            &store,
            &FeatureResources::default(),
            &SidecarTags::new(),
            &[],
        );
        assert_eq!(outcomes.len(), 1);
        assert!(outcomes[0].error.is_none(), "{:?}", outcomes[0].error);
        let tsv = ablation_tsv(&outcomes);
        assert!(tsv.lines().count() == 2);
        assert!(tsv.contains("smoke\t1\t"));
    }

    #[test]
    fn ablation_row_failure_does_not_stop_others() {
        let (docs, store) = crate::testutil::synthetic_corpus(6, 3);
        let split = CorpusSplit {
            train: vec![],
            dev: docs[..2].to_vec(),
            test: docs[2..4].to_vec(),
        };
        // empty training split fails every row; both rows must report it
        let spec = AblationSpec::new(vec![
            AblationRow {
                name: "a".into(),
                features: FeatureConfig::default(),
                training: TrainConfig::default(),
                arch: ArchSpec {
                    hidden_layers: 1,
                    hidden_units: 2,
                    dropout_p: 0.0,
                },
            },
            AblationRow {
                name: "b".into(),
                features: FeatureConfig::default(),
                training: TrainConfig::default(),
                arch: ArchSpec {
                    hidden_layers: 1,
                    hidden_units: 2,
                    dropout_p: 0.0,
                },
            },
        ])
        .unwrap();
        let outcomes = run_ablation(
            &spec,
            &split,
            &store,
            &FeatureResources::default(),
            &SidecarTags::new(),
            &[],
        );
        assert_eq!(outcomes.len(), 2);
        assert!(outcomes.iter().all(|o| o.error.is_some()));
    }

    #[test]
    fn duplicate_row_names_rejected() {
        let row = AblationRow {
            name: "same".into(),
            features: FeatureConfig::default(),
            training: TrainConfig::default(),
            arch: ArchSpec::default(),
        };
        assert!(AblationSpec::new(vec![row.clone(), row]).is_err());
    }

    #[test]
    fn untrained_zero_bias_model_dumps_uniform_confidence() {
        let (docs, store) = crate::testutil::synthetic_corpus(3, 8);
        let extractor = FeatureExtractor::new(
            FeatureConfig {
                window: 1,
                ..FeatureConfig::default()
            },
            &store,
            OovPolicy::default(),
        );
        // zero weights and biases: every probability is exactly 0.5
        let mut model = init_model(
            ArchConfig {
                input_dim: extractor.input_dim(),
                hidden_layers: 1,
                hidden_units: 4,
                dropout_p: 0.0,
                output_classes: 2,
            },
            0,
        )
        .unwrap();
        for layer in &mut model.layers {
            for w in layer.weights.data_mut() {
                *w = 0.0;
            }
        }
        let records =
            dump_confidences(&model, &extractor, &docs, &SidecarTags::new(), None, 0).unwrap();
        assert!(!records.is_empty());
        for r in &records {
            assert_eq!(r.p_toponym, 0.5);
            assert_eq!(r.p_non_toponym, 0.5);
        }
    }

    #[test]
    fn confidence_probabilities_are_complementary() {
        let (docs, store) = crate::testutil::synthetic_corpus(3, 9);
        let extractor = FeatureExtractor::new(
            FeatureConfig {
                window: 1,
                ..FeatureConfig::default()
            },
            &store,
            OovPolicy::default(),
        );
        let model = init_model(
            ArchConfig {
                input_dim: extractor.input_dim(),
                hidden_layers: 1,
                hidden_units: 4,
                dropout_p: 0.0,
                output_classes: 2,
            },
            5,
        )
        .unwrap();
        let records =
            dump_confidences(&model, &extractor, &docs, &SidecarTags::new(), None, 0).unwrap();
        for r in &records {
            assert!((r.p_toponym + r.p_non_toponym - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn confidence_sampling_is_seeded_and_per_class() {
        let (docs, store) = crate::testutil::synthetic_corpus(6, 10);
        let extractor = FeatureExtractor::new(
            FeatureConfig {
                window: 1,
                ..FeatureConfig::default()
            },
            &store,
            OovPolicy::default(),
        );
        let model = init_model(
            ArchConfig {
                input_dim: extractor.input_dim(),
                hidden_layers: 1,
                hidden_units: 4,
                dropout_p: 0.0,
                output_classes: 2,
            },
            5,
        )
        .unwrap();
        let a = dump_confidences(&model, &extractor, &docs, &SidecarTags::new(), Some(2), 1)
            .unwrap();
        let b = dump_confidences(&model, &extractor, &docs, &SidecarTags::new(), Some(2), 1)
            .unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.iter().filter(|r| r.gold == Label::Toponym).count(), 2);
        assert_eq!(
            a.iter().map(|r| r.surface.clone()).collect::<Vec<_>>(),
            b.iter().map(|r| r.surface.clone()).collect::<Vec<_>>()
        );
    }
}
