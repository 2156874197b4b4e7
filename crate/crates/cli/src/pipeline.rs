//! Shared stage plumbing: loading inputs, applying corpus filters, and
//! writing outputs under the configured directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use inkling_core::corpus::{self, Corpus, RiskLabel};
use inkling_core::features::{build_matrix, profiles, FeatureMatrix, UserProfile};
use inkling_core::harm::{harm_level, HarmScore, KeywordLabeler};
use inkling_core::lexicon::Lexicon;
use inkling_core::traits::{load_weights, WeightMatrix};

use crate::config::{CliError, CliResult, RunConfig};

fn load_lexicon_full(config: &RunConfig) -> CliResult<Lexicon> {
    let path = config.require(config.lexicon.as_ref(), "lexicon", "--lexicon")?;
    let text = fs::read_to_string(&path).map_err(CliError::runtime)?;
    Lexicon::parse(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn load_lexicon(config: &RunConfig) -> CliResult<Lexicon> {
    let lexicon = load_lexicon_full(config)?;
    match &config.exclude_categories {
        Some(excluded) if !excluded.is_empty() => {
            let set: BTreeSet<u32> = excluded.iter().copied().collect();
            lexicon
                .filter_categories(&set)
                .map_err(|e| CliError::validation(e.to_string()))
        }
        _ => Ok(lexicon),
    }
}

/// Load weights validated against the *full* dictionary, then keep only the
/// columns that survived any category exclusion. A weights file may thus
/// always carry a row per original feature, excluded or not.
pub fn load_weight_matrix(config: &RunConfig, lexicon: &Lexicon) -> CliResult<WeightMatrix> {
    let path = config.require(config.weights.as_ref(), "weights", "--weights")?;
    let text = fs::read_to_string(&path).map_err(CliError::runtime)?;
    let full = load_lexicon_full(config)?;
    let full_names = full.feature_names();
    let parsed = load_weights(&text, &full_names)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let kept_names = lexicon.feature_names();
    if kept_names == full_names {
        return Ok(parsed);
    }
    let mut reduced = WeightMatrix::zeros(kept_names.clone());
    for (kept_index, name) in kept_names.iter().enumerate() {
        let full_index = full_names
            .iter()
            .position(|n| n == name)
            .expect("filtered lexicon features come from the full lexicon");
        for kind in inkling_core::traits::TraitKind::ALL {
            reduced.set(kind, kept_index, parsed.get(kind, full_index));
        }
    }
    Ok(reduced)
}

/// Read a message file and apply the configured corpus filters: the
/// min/max message-count bound first, then the word-risk rewrite.
pub fn load_corpus(config: &RunConfig, path: &Path) -> CliResult<Corpus> {
    let file = fs::File::open(path).map_err(|e| {
        CliError::validation(format!("cannot open messages {}: {e}", path.display()))
    })?;
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    let mut corpus = corpus::read_messages(BufReader::new(file), tag)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;

    let min = config.min_messages.unwrap_or(1);
    if min > 1 || config.max_messages.is_some() {
        corpus = corpus
            .filter_users(min, config.max_messages)
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    if let Some(risk_path) = &config.risk_words {
        let text = fs::read_to_string(risk_path).map_err(|e| {
            CliError::validation(format!("cannot read risk words {}: {e}", risk_path.display()))
        })?;
        let risk = corpus::read_word_risk(&text)
            .map_err(|e| CliError::runtime(format!("{}: {e}", risk_path.display())))?;
        let keep: BTreeSet<u8> = match &config.keep_levels {
            Some(levels) => levels.iter().copied().collect(),
            None => [0u8, 1, 4].into(),
        };
        corpus = corpus
            .filter_words_by_risk(&risk, &keep)
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    if corpus.user_count() == 0 {
        return Err(CliError::validation(format!(
            "corpus {} is empty after filtering",
            path.display()
        )));
    }
    Ok(corpus)
}

pub fn load_main_corpus(config: &RunConfig) -> CliResult<Corpus> {
    let path = config.require(config.messages.as_ref(), "messages", "--messages")?;
    load_corpus(config, &path)
}

/// Labels from a label file, or produced by the keyword labeler when only a
/// labeler config is given.
pub fn load_labels(config: &RunConfig, corpus: &Corpus) -> CliResult<BTreeMap<String, RiskLabel>> {
    match (&config.labels, &config.labeler) {
        (Some(path), _) => {
            let file = fs::File::open(path).map_err(|e| {
                CliError::validation(format!("cannot open labels {}: {e}", path.display()))
            })?;
            corpus::read_labels(BufReader::new(file))
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read labeler config {}: {e}", path.display()))
            })?;
            let labeler = KeywordLabeler::from_csv(&text)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            Ok(labeler.label_corpus(corpus))
        }
        (None, None) => Err(CliError::validation(
            "labels required: pass --labels or --labeler",
        )),
    }
}

/// Per-user harm scores in sorted user order, plus users that had no
/// ratable messages.
pub fn harm_scores(
    corpus: &Corpus,
    labels: &BTreeMap<String, RiskLabel>,
) -> (Vec<HarmScore>, Vec<String>) {
    let mut scores = Vec::new();
    let mut unlabeled = Vec::new();
    for (user, messages) in corpus.users() {
        let user_labels: Vec<RiskLabel> = messages
            .iter()
            .filter_map(|m| labels.get(&m.id).copied())
            .collect();
        match harm_level(user.clone(), &user_labels) {
            Some(score) => scores.push(score),
            None => unlabeled.push(user.clone()),
        }
    }
    (scores, unlabeled)
}

pub fn feature_matrix(
    lexicon: &Lexicon,
    corpus: &Corpus,
) -> CliResult<(Vec<UserProfile>, FeatureMatrix)> {
    let user_profiles = profiles(lexicon, corpus);
    let matrix = build_matrix(&user_profiles, &lexicon.feature_names())
        .map_err(CliError::runtime)?;
    Ok((user_profiles, matrix))
}

/// Write/read the per-feature `(min, max)` normalization parameters so test
/// sets can be scored against frozen training statistics.
pub fn write_feature_params(matrix: &FeatureMatrix) -> String {
    let mut out = String::from("feature,min,max\n");
    for (name, (min, max)) in matrix.feature_names.iter().zip(&matrix.params) {
        out.push_str(&format!("{name},{min},{max}\n"));
    }
    out
}

pub fn read_feature_params(text: &str, feature_names: &[String]) -> CliResult<Vec<(f64, f64)>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::runtime(format!(
                "feature params line {}: expected `feature,min,max`",
                i + 1
            )));
        }
        let min: f64 = parts[1].parse().map_err(CliError::runtime)?;
        let max: f64 = parts[2].parse().map_err(CliError::runtime)?;
        map.insert(parts[0].to_string(), (min, max));
    }
    feature_names
        .iter()
        .map(|name| {
            map.get(name).copied().ok_or_else(|| {
                CliError::runtime(format!("feature params missing feature {name:?}"))
            })
        })
        .collect()
}

/// Output directory handle; all command outputs land under it.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(config: &RunConfig) -> CliResult<OutDir> {
        let root = config.out_dir()?.to_path_buf();
        fs::create_dir_all(&root).map_err(|e| {
            CliError::validation(format!("cannot create output dir {}: {e}", root.display()))
        })?;
        let dir = OutDir { root };
        dir.write("run_config.toml", config.to_toml())?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::runtime)?;
        }
        fs::write(&path, contents.as_ref())
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
        self.write(name, text + "\n")
    }
}
