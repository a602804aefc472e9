//! Run configuration: a flat `key = value` text format with `[features]`,
//! `[training]`, `[arch]`, and `[paths]` sections. `#` starts a comment.
//! Unknown sections or keys are validation errors that name the offender.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use toponym_core::embeddings::{OovMode, OovPolicy};
use toponym_core::eval::ArchSpec;
use toponym_core::features::{FeatureConfig, FeatureScope};
use toponym_core::training::TrainConfig;

/// Everything a run needs: feature switches, training hyperparameters,
/// architecture, OOV policy, and file locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub training: TrainConfig,
    pub arch: ArchSpec,
    pub oov: OovPolicy,
    pub paths: PathsConfig,
}

/// File locations; every optional until a command requires it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathsConfig {
    pub corpus_dir: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Second word-vector file, concatenated onto the first when present.
    pub embeddings_secondary: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub history_out: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemma_lexicon: Option<PathBuf>,
    pub tag_registry: Option<PathBuf>,
    /// Directory holding `<id>.pos` sidecars; defaults to the corpus dir.
    pub pos_sidecar_dir: Option<PathBuf>,
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("[{section}] {key}: expected true or false, got {value:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("[{section}] {key}: bad value {value:?}"))
}

/// Parses the flat config format, starting from defaults. Later keys win.
#[cfg(test)]
pub fn parse_conf(text: &str, source: &str) -> Result<RunConfig, String> {
    apply_conf(RunConfig::default(), text, source)
}

/// Applies `text` on top of an existing configuration.
pub fn apply_conf(mut config: RunConfig, text: &str, source: &str) -> Result<RunConfig, String> {
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if !matches!(section.as_str(), "features" | "training" | "arch" | "paths") {
                return Err(format!("{source}:{}: unknown section [{section}]", idx + 1));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{source}:{}: expected key = value", idx + 1));
        };
        let key = key.trim();
        let value = value.trim();
        set_key(&mut config, &section, key, value)
            .map_err(|e| format!("{source}:{}: {e}", idx + 1))?;
    }
    Ok(config)
}

fn set_key(config: &mut RunConfig, section: &str, key: &str, value: &str) -> Result<(), String> {
    match section {
        "features" => {
            let f = &mut config.features;
            match key {
                "window" => f.window = parse_num(section, key, value)?,
                "keep_punctuation" => f.keep_punctuation = parse_bool(section, key, value)?,
                "keep_stopwords" => f.keep_stopwords = parse_bool(section, key, value)?,
                "use_capitalization" => f.use_capitalization = parse_bool(section, key, value)?,
                "use_pos" => f.use_pos = parse_bool(section, key, value)?,
                "use_lemma" => f.use_lemma = parse_bool(section, key, value)?,
                "feature_scope" => {
                    f.feature_scope = match value {
                        "per-slot" => FeatureScope::PerSlot,
                        "target-only" => FeatureScope::TargetOnly,
                        _ => {
                            return Err(format!(
                                "[features] feature_scope: expected per-slot or target-only, got {value:?}"
                            ))
                        }
                    }
                }
                "oov_mode" => {
                    config.oov.mode = match value {
                        "zero" => OovMode::Zero,
                        "hashed-random" => OovMode::HashedRandom {
                            seed: match config.oov.mode {
                                OovMode::HashedRandom { seed } => seed,
                                OovMode::Zero => 0,
                            },
                        },
                        _ => {
                            return Err(format!(
                                "[features] oov_mode: expected zero or hashed-random, got {value:?}"
                            ))
                        }
                    }
                }
                "oov_seed" => {
                    let seed = parse_num(section, key, value)?;
                    config.oov.mode = OovMode::HashedRandom { seed };
                }
                "case_fold" => config.oov.case_fold_first = parse_bool(section, key, value)?,
                _ => return Err(format!("[features] unknown key {key:?}")),
            }
        }
        "training" => {
            let t = &mut config.training;
            match key {
                "learning_rate" => t.learning_rate = parse_num(section, key, value)?,
                "batch_size" => t.batch_size = parse_num(section, key, value)?,
                "momentum" => t.momentum = parse_num(section, key, value)?,
                "weight_toponym" => t.class_weights.0 = parse_num(section, key, value)?,
                "weight_nontoponym" => t.class_weights.1 = parse_num(section, key, value)?,
                "clip_threshold" => t.clip_threshold = parse_num(section, key, value)?,
                "max_epochs" => t.max_epochs = parse_num(section, key, value)?,
                "patience" => t.patience = parse_num(section, key, value)?,
                "eval_every" => t.eval_every = parse_num(section, key, value)?,
                "seed" => t.seed = parse_num(section, key, value)?,
                _ => return Err(format!("[training] unknown key {key:?}")),
            }
        }
        "arch" => {
            let a = &mut config.arch;
            match key {
                "hidden_layers" => a.hidden_layers = parse_num(section, key, value)?,
                "hidden_units" => a.hidden_units = parse_num(section, key, value)?,
                "dropout" => a.dropout_p = parse_num(section, key, value)?,
                _ => return Err(format!("[arch] unknown key {key:?}")),
            }
        }
        "paths" => {
            let p = &mut config.paths;
            let path = Some(PathBuf::from(value));
            match key {
                "corpus_dir" => p.corpus_dir = path,
                "train_manifest" => p.train_manifest = path,
                "dev_manifest" => p.dev_manifest = path,
                "test_manifest" => p.test_manifest = path,
                "embeddings" => p.embeddings = path,
                "embeddings_secondary" => p.embeddings_secondary = path,
                "model_out" => p.model_out = path,
                "history_out" => p.history_out = path,
                "stopwords" => p.stopwords = path,
                "lemma_lexicon" => p.lemma_lexicon = path,
                "tag_registry" => p.tag_registry = path,
                "pos_sidecar_dir" => p.pos_sidecar_dir = path,
                _ => return Err(format!("[paths] unknown key {key:?}")),
            }
        }
        "" => return Err(format!("key {key:?} appears before any [section]")),
        _ => unreachable!("sections validated in apply_conf"),
    }
    Ok(())
}

/// Renders a configuration back to the conf format. `parse_conf` of the
/// output reproduces the input.
pub fn render_conf(config: &RunConfig) -> String {
    let f = &config.features;
    let t = &config.training;
    let a = &config.arch;
    let mut out = String::new();

    out.push_str("[features]\n");
    out.push_str(&format!("window = {}\n", f.window));
    out.push_str(&format!("keep_punctuation = {}\n", f.keep_punctuation));
    out.push_str(&format!("keep_stopwords = {}\n", f.keep_stopwords));
    out.push_str(&format!("use_capitalization = {}\n", f.use_capitalization));
    out.push_str(&format!("use_pos = {}\n", f.use_pos));
    out.push_str(&format!("use_lemma = {}\n", f.use_lemma));
    out.push_str(&format!(
        "feature_scope = {}\n",
        match f.feature_scope {
            FeatureScope::PerSlot => "per-slot",
            FeatureScope::TargetOnly => "target-only",
        }
    ));
    match config.oov.mode {
        OovMode::Zero => out.push_str("oov_mode = zero\n"),
        OovMode::HashedRandom { seed } => {
            out.push_str("oov_mode = hashed-random\n");
            out.push_str(&format!("oov_seed = {seed}\n"));
        }
    }
    out.push_str(&format!("case_fold = {}\n", config.oov.case_fold_first));

    out.push_str("\n[training]\n");
    out.push_str(&format!("learning_rate = {}\n", t.learning_rate));
    out.push_str(&format!("batch_size = {}\n", t.batch_size));
    out.push_str(&format!("momentum = {}\n", t.momentum));
    out.push_str(&format!("weight_toponym = {}\n", t.class_weights.0));
    out.push_str(&format!("weight_nontoponym = {}\n", t.class_weights.1));
    out.push_str(&format!("clip_threshold = {}\n", t.clip_threshold));
    out.push_str(&format!("max_epochs = {}\n", t.max_epochs));
    out.push_str(&format!("patience = {}\n", t.patience));
    out.push_str(&format!("eval_every = {}\n", t.eval_every));
    out.push_str(&format!("seed = {}\n", t.seed));

    out.push_str("\n[arch]\n");
    out.push_str(&format!("hidden_layers = {}\n", a.hidden_layers));
    out.push_str(&format!("hidden_units = {}\n", a.hidden_units));
    out.push_str(&format!("dropout = {}\n", a.dropout_p));

    let mut paths = Vec::new();
    let p = &config.paths;
    let mut push = |key: &str, value: &Option<PathBuf>| {
        if let Some(v) = value {
            paths.push(format!("{key} = {}\n", v.display()));
        }
    };
    push("corpus_dir", &p.corpus_dir);
    push("train_manifest", &p.train_manifest);
    push("dev_manifest", &p.dev_manifest);
    push("test_manifest", &p.test_manifest);
    push("embeddings", &p.embeddings);
    push("embeddings_secondary", &p.embeddings_secondary);
    push("model_out", &p.model_out);
    push("history_out", &p.history_out);
    push("stopwords", &p.stopwords);
    push("lemma_lexicon", &p.lemma_lexicon);
    push("tag_registry", &p.tag_registry);
    push("pos_sidecar_dir", &p.pos_sidecar_dir);
    if !paths.is_empty() {
        out.push_str("\n[paths]\n");
        for line in paths {
            out.push_str(&line);
        }
    }
    out
}

/// The shipped experiment presets, one per published ablation row.
pub fn preset_sources() -> HashMap<&'static str, &'static str> {
    HashMap::from([
        ("nopunct", include_str!("../presets/nopunct.conf")),
        ("nostop", include_str!("../presets/nostop.conf")),
        ("baseline", include_str!("../presets/baseline.conf")),
        ("basic", include_str!("../presets/basic.conf")),
        ("cap", include_str!("../presets/cap.conf")),
        ("pos", include_str!("../presets/pos.conf")),
        ("weighted", include_str!("../presets/weighted.conf")),
        ("full", include_str!("../presets/full.conf")),
    ])
}

/// Loads a preset by name onto `base`.
pub fn apply_preset(base: RunConfig, name: &str) -> Result<RunConfig, String> {
    let sources = preset_sources();
    let Some(text) = sources.get(name) else {
        let mut known: Vec<&str> = sources.keys().copied().collect();
        known.sort();
        return Err(format!(
            "unknown preset {name:?}; shipped presets: {}",
            known.join(", ")
        ));
    };
    apply_conf(base, text, &format!("preset {name}"))
}

/// Resolves a configured path, falling back to `$TOPO_DATA_DIR/<path>` when
/// the path is relative and does not exist as given.
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("TOPO_DATA_DIR") {
        Some(prefix) => {
            let candidate = PathBuf::from(prefix).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}
