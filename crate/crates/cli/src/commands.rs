//! Command implementations. Every command validates its full configuration
//! before any side effect; validation failures exit 1, runtime failures 2.

use std::fs;
use std::path::{Path, PathBuf};

use toponym_core::corpus::{
    self, corpus_stats, load_split, load_texts, project_labels, CorpusSplit, Document, Label,
};
use toponym_core::embeddings::{concat_stores, load_embeddings, oov_rate, EmbeddingStore};
use toponym_core::eval::{
    ablation_tsv, confidence_tsv, dump_confidences, evaluate_model, predict_doc, round2,
    run_ablation, score, span_score, sweep_tsv, sweep_window, table_presets, AblationRow,
    AblationSpec, Counts, EvalReport,
};
use toponym_core::features::{
    load_sidecars, FeatureResources, LemmaLexicon, SidecarTags, StopwordList, TagRegistry,
};
use toponym_core::network::{init_model, load_model, save_model};
use toponym_core::training::train;

use crate::config::{resolve_path, RunConfig};

/// Validation problems exit with code 1, runtime problems with code 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) => m,
            CliError::Runtime(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn require(path: &Option<PathBuf>, field: &str) -> CliResult<PathBuf> {
    let Some(path) = path else {
        return Err(CliError::Validation(format!(
            "missing required path: [paths] {field}"
        )));
    };
    let resolved = resolve_path(path);
    if !resolved.exists() {
        return Err(CliError::Validation(format!(
            "[paths] {field}: {} does not exist",
            path.display()
        )));
    }
    Ok(resolved)
}

fn optional(path: &Option<PathBuf>, field: &str) -> CliResult<Option<PathBuf>> {
    match path {
        None => Ok(None),
        Some(_) => require(path, field).map(Some),
    }
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    fs::write(path, contents).map_err(runtime)
}

/// Loaded, validated inputs shared by the corpus-driven commands.
struct LoadedRun {
    split: CorpusSplit,
    store: EmbeddingStore,
    resources: FeatureResources,
    sidecars: SidecarTags,
}

fn load_resources(config: &RunConfig) -> CliResult<FeatureResources> {
    let mut resources = FeatureResources {
        policy: config.oov,
        ..FeatureResources::default()
    };
    if let Some(path) = optional(&config.paths.stopwords, "stopwords")? {
        resources.stopwords = StopwordList::load(&path).map_err(runtime)?;
    }
    if let Some(path) = optional(&config.paths.tag_registry, "tag_registry")? {
        resources.registry = TagRegistry::load(&path).map_err(runtime)?;
    }
    if let Some(path) = optional(&config.paths.lemma_lexicon, "lemma_lexicon")? {
        resources.lexicon = LemmaLexicon::load(&path).map_err(runtime)?;
    }
    Ok(resources)
}

fn load_store(config: &RunConfig) -> CliResult<EmbeddingStore> {
    let primary_path = require(&config.paths.embeddings, "embeddings")?;
    let primary = load_embeddings(&primary_path).map_err(runtime)?;
    match optional(&config.paths.embeddings_secondary, "embeddings_secondary")? {
        Some(secondary_path) => {
            let secondary = load_embeddings(&secondary_path).map_err(runtime)?;
            Ok(concat_stores(
                &primary,
                &config.oov,
                &secondary,
                &config.oov,
            ))
        }
        None => Ok(primary),
    }
}

fn load_run(config: &RunConfig) -> CliResult<LoadedRun> {
    let corpus_dir = require(&config.paths.corpus_dir, "corpus_dir")?;
    let train_manifest = require(&config.paths.train_manifest, "train_manifest")?;
    let dev_manifest = require(&config.paths.dev_manifest, "dev_manifest")?;
    let test_manifest = require(&config.paths.test_manifest, "test_manifest")?;
    let resources = load_resources(config)?;
    let store = load_store(config)?;

    let mut split = load_split(&corpus_dir, &train_manifest, &dev_manifest, &test_manifest)
        .map_err(runtime)?;
    for doc in split
        .train
        .iter_mut()
        .chain(&mut split.dev)
        .chain(&mut split.test)
    {
        project_labels(doc).map_err(runtime)?;
    }

    let sidecar_dir = match optional(&config.paths.pos_sidecar_dir, "pos_sidecar_dir")? {
        Some(dir) => dir,
        None => corpus_dir.clone(),
    };
    let mut sidecars = SidecarTags::new();
    for docs in [&split.train, &split.dev, &split.test] {
        sidecars.extend(load_sidecars(&sidecar_dir, docs).map_err(runtime)?);
    }

    Ok(LoadedRun {
        split,
        store,
        resources,
        sidecars,
    })
}

pub fn cmd_train(config: &RunConfig) -> CliResult<()> {
    let model_out = config.paths.model_out.clone().ok_or_else(|| {
        CliError::Validation("missing required path: [paths] model_out".into())
    })?;
    let history_out = config
        .paths
        .history_out
        .clone()
        .unwrap_or_else(|| model_out.with_extension("history.tsv"));

    let run = load_run(config)?;
    let extractor = run.resources.extractor(config.features, &run.store);
    let arch = config.arch.arch(extractor.input_dim());
    let model = init_model(arch, config.training.seed).map_err(runtime)?;

    let (best, history) = train(
        model,
        &run.split.train,
        &run.split.dev,
        &extractor,
        &run.sidecars,
        &config.training,
    )
    .map_err(runtime)?;

    if let Some(parent) = model_out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    save_model(&best, &model_out).map_err(runtime)?;
    write_output(&history_out, &history.to_tsv())?;
    // the effective configuration, for reproducing the run
    write_output(
        &model_out.with_extension("conf"),
        &crate::config::render_conf(config),
    )?;

    let report = evaluate_model(&best, &extractor, &run.split.test, &run.sidecars)
        .map_err(runtime)?;
    println!(
        "trained {} evaluation points, best epoch {}{}",
        history.points.len(),
        history.best_epoch,
        if history.stopped_early {
            " (stopped early)"
        } else {
            ""
        }
    );
    println!(
        "test precision {:.2} recall {:.2} f1 {:.2}",
        round2(report.precision()),
        round2(report.recall()),
        round2(report.f1())
    );
    println!("model written to {}", model_out.display());
    println!("history written to {}", history_out.display());
    Ok(())
}

/// Merges maximal runs of toponym-labeled tokens into standoff spans.
fn labels_to_spans(doc: &Document, labels: &[Label]) -> Vec<(usize, usize, String)> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &label) in labels.iter().enumerate() {
        match (label, run_start) {
            (Label::Toponym, None) => run_start = Some(i),
            (Label::NonToponym, Some(first)) => {
                spans.push(span_of(doc, first, i - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(first) = run_start {
        spans.push(span_of(doc, first, labels.len() - 1));
    }
    spans
}

fn span_of(doc: &Document, first: usize, last: usize) -> (usize, usize, String) {
    let start = doc.tokens[first].start;
    let end = doc.tokens[last].end;
    let surface: String = doc
        .text
        .chars()
        .skip(start)
        .take(end - start)
        .collect();
    (start, end, surface)
}

pub fn cmd_predict(
    config: &RunConfig,
    model_path: &Path,
    input: &Path,
    out_dir: &Path,
) -> CliResult<()> {
    let model_path = resolve_path(model_path);
    if !model_path.exists() {
        return Err(CliError::Validation(format!(
            "--model: {} does not exist",
            model_path.display()
        )));
    }
    let input = resolve_path(input);
    if !input.exists() {
        return Err(CliError::Validation(format!(
            "--corpus: {} does not exist",
            input.display()
        )));
    }
    let resources = load_resources(config)?;
    let store = load_store(config)?;
    let model = load_model(&model_path).map_err(runtime)?;
    let extractor = resources.extractor(config.features, &store);
    if extractor.input_dim() != model.arch.input_dim {
        return Err(CliError::Validation(format!(
            "feature configuration implies input dimension {} but the model expects {}",
            extractor.input_dim(),
            model.arch.input_dim
        )));
    }

    let docs = if input.is_dir() {
        load_texts(&input).map_err(runtime)?
    } else {
        let id = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".into());
        let dir = input.parent().unwrap_or(Path::new("."));
        vec![corpus::load_document(dir, &id).map_err(runtime)?]
    };
    let sidecar_dir = match optional(&config.paths.pos_sidecar_dir, "pos_sidecar_dir")? {
        Some(dir) => dir,
        None => {
            if input.is_dir() {
                input.clone()
            } else {
                input.parent().unwrap_or(Path::new(".")).to_path_buf()
            }
        }
    };
    let sidecars = load_sidecars(&sidecar_dir, &docs).map_err(runtime)?;

    fs::create_dir_all(out_dir).map_err(runtime)?;
    for doc in &docs {
        let labels = predict_doc(
            &model,
            &extractor,
            doc,
            sidecars.get(&doc.id).map(Vec::as_slice),
        )
        .map_err(runtime)?;
        let mut out = String::new();
        for (start, end, surface) in labels_to_spans(doc, &labels) {
            out.push_str(&format!("{start}\t{end}\t{surface}\n"));
        }
        write_output(&out_dir.join(format!("{}.pred.ann", doc.id)), &out)?;
    }
    println!("wrote {} annotation files to {}", docs.len(), out_dir.display());
    Ok(())
}

pub fn cmd_evaluate(gold_dir: &Path, pred_dir: &Path, out: Option<&Path>) -> CliResult<()> {
    let gold_dir = resolve_path(gold_dir);
    let pred_dir = resolve_path(pred_dir);
    for (dir, flag) in [(&gold_dir, "--gold"), (&pred_dir, "--pred")] {
        if !dir.is_dir() {
            return Err(CliError::Validation(format!(
                "{flag}: {} is not a directory",
                dir.display()
            )));
        }
    }

    let mut gold_docs = corpus::load_corpus(&gold_dir).map_err(runtime)?;
    let mut report = EvalReport::default();
    for doc in &mut gold_docs {
        project_labels(doc).map_err(runtime)?;
        let gold: Vec<Label> = doc.tokens.iter().map(|t| t.label.unwrap()).collect();

        // predictions: same text, spans from the prediction directory
        let pred_ann = {
            let with_pred = pred_dir.join(format!("{}.pred.ann", doc.id));
            if with_pred.exists() {
                with_pred
            } else {
                pred_dir.join(format!("{}.ann", doc.id))
            }
        };
        if !pred_ann.exists() {
            return Err(CliError::Validation(format!(
                "no predictions for document {:?} in {}",
                doc.id,
                pred_dir.display()
            )));
        }
        let mut pred_doc = doc.clone();
        pred_doc.gold_spans =
            corpus::parse_spans(&pred_ann, &doc.text).map_err(runtime)?;
        project_labels(&mut pred_doc).map_err(runtime)?;
        let pred: Vec<Label> = pred_doc.tokens.iter().map(|t| t.label.unwrap()).collect();

        let counts = score(&pred, &gold).map_err(runtime)?;
        report.totals.merge(&counts);
        report
            .span_totals
            .merge(&span_score(doc, &pred).map_err(runtime)?);
        report.per_doc.push((doc.id.clone(), counts));
    }

    let tsv = format_eval_report(&report);
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    Ok(())
}

fn format_eval_report(report: &EvalReport) -> String {
    let mut out = String::from("scope\tprecision\trecall\tf1\ttp\tfp\tfn\n");
    let line = |scope: &str, c: &Counts| {
        format!(
            "{scope}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}\t{}\n",
            round2(c.precision()),
            round2(c.recall()),
            round2(c.f1()),
            c.tp,
            c.fp,
            c.fn_
        )
    };
    out.push_str(&line("token", &report.totals));
    out.push_str(&line("span-strict", &report.span_totals));
    for (id, counts) in &report.per_doc {
        out.push_str(&line(&format!("doc:{id}"), counts));
    }
    out
}

/// Ablation spec file: one row per line, each a shipped preset name or a
/// path to a `.conf` file; the row name is the preset name or file stem.
fn read_ablation_spec(path: &Path, base: &RunConfig) -> CliResult<AblationSpec> {
    let text = fs::read_to_string(path).map_err(runtime)?;
    let mut rows = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, config) = if crate::config::preset_sources().contains_key(line) {
            (
                line.to_string(),
                crate::config::apply_preset(base.clone(), line)
                    .map_err(CliError::Validation)?,
            )
        } else {
            let conf_path = resolve_path(Path::new(line));
            if !conf_path.exists() {
                return Err(CliError::Validation(format!(
                    "ablation row {line:?} is neither a shipped preset nor an existing file"
                )));
            }
            let text = fs::read_to_string(&conf_path).map_err(runtime)?;
            let name = conf_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| line.to_string());
            (
                name,
                crate::config::apply_conf(base.clone(), &text, line)
                    .map_err(CliError::Validation)?,
            )
        };
        rows.push(AblationRow {
            name,
            features: config.features,
            training: config.training,
            arch: config.arch,
        });
    }
    AblationSpec::new(rows).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_ablate(
    config: &RunConfig,
    spec_path: Option<&Path>,
    seeds: &[u64],
    out: Option<&Path>,
) -> CliResult<()> {
    let spec = match spec_path {
        Some(path) => {
            let path = resolve_path(path);
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "--spec: {} does not exist",
                    path.display()
                )));
            }
            read_ablation_spec(&path, config)?
        }
        None => table_presets(),
    };
    let run = load_run(config)?;
    let outcomes = run_ablation(
        &spec,
        &run.split,
        &run.store,
        &run.resources,
        &run.sidecars,
        seeds,
    );
    let tsv = ablation_tsv(&outcomes);
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    let failures = outcomes.iter().filter(|o| o.error.is_some()).count();
    if failures == outcomes.len() && !outcomes.is_empty() {
        return Err(CliError::Runtime("every ablation row failed".into()));
    }
    Ok(())
}

pub fn cmd_sweep_window(
    config: &RunConfig,
    min_c: usize,
    max_c: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    if min_c > max_c {
        return Err(CliError::Validation(format!(
            "--min-c {min_c} exceeds --max-c {max_c}"
        )));
    }
    let run = load_run(config)?;
    let base = AblationRow {
        name: "sweep".into(),
        features: config.features,
        training: config.training,
        arch: config.arch,
    };
    let points = sweep_window(
        min_c..=max_c,
        &base,
        &run.split,
        &run.store,
        &run.resources,
        &run.sidecars,
    );
    let tsv = sweep_tsv(&points);
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    Ok(())
}

pub fn cmd_stats(config: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let corpus_dir = require(&config.paths.corpus_dir, "corpus_dir")?;
    let train_manifest = require(&config.paths.train_manifest, "train_manifest")?;
    let dev_manifest = require(&config.paths.dev_manifest, "dev_manifest")?;
    let test_manifest = require(&config.paths.test_manifest, "test_manifest")?;
    let mut split = load_split(&corpus_dir, &train_manifest, &dev_manifest, &test_manifest)
        .map_err(runtime)?;
    for doc in split
        .train
        .iter_mut()
        .chain(&mut split.dev)
        .chain(&mut split.test)
    {
        project_labels(doc).map_err(runtime)?;
    }

    let stats = corpus_stats(&split);
    let mut tsv =
        String::from("split\tarticles\tavg_words\tavg_toponyms\ttoponym_token_pct\n");
    for split_name in ["train", "dev", "test"] {
        let s = &stats[split_name];
        tsv.push_str(&format!(
            "{split_name}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
            s.articles, s.avg_words, s.avg_toponyms, s.toponym_token_pct
        ));
    }
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    Ok(())
}

pub fn cmd_oov(
    config: &RunConfig,
    embeddings: &Path,
    secondary: Option<&Path>,
    corpus_dir: &Path,
    out: Option<&Path>,
) -> CliResult<()> {
    let embeddings = resolve_path(embeddings);
    let corpus_dir = resolve_path(corpus_dir);
    if !embeddings.exists() {
        return Err(CliError::Validation(format!(
            "--embeddings: {} does not exist",
            embeddings.display()
        )));
    }
    if !corpus_dir.is_dir() {
        return Err(CliError::Validation(format!(
            "--corpus: {} is not a directory",
            corpus_dir.display()
        )));
    }
    let docs = load_texts(&corpus_dir).map_err(runtime)?;
    let primary = load_embeddings(&embeddings).map_err(runtime)?;
    let mut stores = vec![primary];
    if let Some(path) = secondary {
        let path = resolve_path(path);
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "--secondary: {} does not exist",
                path.display()
            )));
        }
        let second = load_embeddings(&path).map_err(runtime)?;
        let combined = concat_stores(&stores[0], &config.oov, &second, &config.oov);
        stores.push(second);
        stores.push(combined);
    }

    let mut tsv = String::from(
        "model\tvocabulary\tdimension\toov_types_pct\toov_occurrences_pct\n",
    );
    for store in &stores {
        let report = oov_rate(store, &docs, &config.oov);
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{:.2}\t{:.2}\n",
            store.name(),
            store.vocab_size(),
            store.dimension(),
            report.type_rate(),
            report.occurrence_rate()
        ));
    }
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    Ok(())
}

pub fn cmd_confidences(
    config: &RunConfig,
    model_path: &Path,
    sample: Option<usize>,
    out: Option<&Path>,
) -> CliResult<()> {
    let model_path = resolve_path(model_path);
    if !model_path.exists() {
        return Err(CliError::Validation(format!(
            "--model: {} does not exist",
            model_path.display()
        )));
    }
    let run = load_run(config)?;
    let model = load_model(&model_path).map_err(runtime)?;
    let extractor = run.resources.extractor(config.features, &run.store);
    if extractor.input_dim() != model.arch.input_dim {
        return Err(CliError::Validation(format!(
            "feature configuration implies input dimension {} but the model expects {}",
            extractor.input_dim(),
            model.arch.input_dim
        )));
    }
    let records = dump_confidences(
        &model,
        &extractor,
        &run.split.test,
        &run.sidecars,
        sample,
        config.training.seed,
    )
    .map_err(runtime)?;
    let tsv = confidence_tsv(&records);
    print!("{tsv}");
    if let Some(path) = out {
        write_output(path, &tsv)?;
    }
    Ok(())
}
