//! Python bindings: the pipeline's main types and operations, with plain
//! dict/list/tuple interchange at the boundary.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Cursor;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::IntoPyObjectExt;

use inkling_core::corpus;
use inkling_core::corpus::{HarmType, RiskLabel};
use inkling_core::features;
use inkling_core::harm;
use inkling_core::lexicon;
use inkling_core::regress;
use inkling_core::regress::ExpansionMode;
use inkling_core::stability;
use inkling_core::synth;
use inkling_core::traits;
use inkling_core::traits::{OutlierGroup, TraitKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn labels_from_py(labels: &BTreeMap<String, BTreeMap<String, u8>>) -> PyResult<BTreeMap<String, RiskLabel>> {
    let mut out = BTreeMap::new();
    for (id, levels) in labels {
        let mut label = RiskLabel::safe();
        for (name, &level) in levels {
            let harm = HarmType::from_name(name)
                .ok_or_else(|| value_err(format!("unknown harm type {name:?}")))?;
            if !label.set(harm, level) {
                return Err(value_err(format!("level {level} out of range 0..=7")));
            }
        }
        out.insert(id.clone(), label);
    }
    Ok(out)
}

fn labels_to_py(labels: &BTreeMap<String, RiskLabel>) -> BTreeMap<String, BTreeMap<String, u8>> {
    labels
        .iter()
        .map(|(id, label)| {
            let levels: BTreeMap<String, u8> = HarmType::ALL
                .iter()
                .map(|h| (h.name().to_string(), label.get(*h)))
                .collect();
            (id.clone(), levels)
        })
        .collect()
}

fn parse_mode(mode: &str) -> PyResult<ExpansionMode> {
    match mode {
        "full" => Ok(ExpansionMode::Full),
        "univariate" => Ok(ExpansionMode::Univariate),
        other => Err(value_err(format!("unknown expansion mode {other:?}"))),
    }
}

/// Category dictionary with wildcard-stem matching.
#[pyclass(frozen)]
struct Lexicon {
    inner: lexicon::Lexicon,
}

#[pymethods]
impl Lexicon {
    /// Parse dictionary text in `.dic` layout.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Lexicon> {
        Ok(Lexicon {
            inner: lexicon::Lexicon::parse(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn parse_file(path: &str) -> PyResult<Lexicon> {
        let text = std::fs::read_to_string(path).map_err(runtime_err)?;
        Lexicon::parse(&text)
    }

    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names()
    }

    fn feature_count(&self) -> usize {
        self.inner.feature_count()
    }

    /// Category ids matched by one word token.
    fn match_word(&self, word: &str) -> Vec<u32> {
        self.inner
            .match_token(&lexicon::Token::word(word.to_lowercase()))
            .into_iter()
            .collect()
    }

    /// Per-category hit counts over a batch of texts:
    /// `(counts, word_count, message_count)`.
    fn count(&self, texts: Vec<String>) -> (Vec<u64>, u64, u64) {
        let counts = lexicon::count_features(&self.inner, &texts);
        (counts.counts, counts.word_count, counts.message_count)
    }

    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocabulary().into_iter().collect()
    }

    fn words_in_category(&self, index: usize) -> Vec<String> {
        self.inner.words_in_category(index)
    }

    fn filter_categories(&self, excluded: Vec<u32>) -> PyResult<Lexicon> {
        let set: BTreeSet<u32> = excluded.into_iter().collect();
        Ok(Lexicon {
            inner: self.inner.filter_categories(&set).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Lexicon(features={})", self.inner.feature_count())
    }
}

/// Tokenize text into `(surface, kind)` pairs; kind is `word`, `numeral`,
/// or a punctuation class name.
#[pyfunction]
fn tokenize(text: &str) -> Vec<(String, String)> {
    lexicon::tokenize(text)
        .into_iter()
        .map(|t| {
            let kind = match t.kind {
                lexicon::TokenKind::Word => "word".to_string(),
                lexicon::TokenKind::Numeral => "numeral".to_string(),
                lexicon::TokenKind::Punctuation(c) => c.reserved_name().to_string(),
            };
            (t.surface, kind)
        })
        .collect()
}

/// Vocabulary overlap diagnostic between two word sets. `risk_tags` maps
/// word -> level 0..7 and `signs` maps word -> "+" or "-".
#[pyfunction]
#[pyo3(signature = (a, b, risk_tags=None, signs=None))]
fn lexicon_overlap(
    a: Vec<String>,
    b: Vec<String>,
    risk_tags: Option<BTreeMap<String, u8>>,
    signs: Option<BTreeMap<String, String>>,
) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let a: BTreeSet<String> = a.into_iter().collect();
    let b: BTreeSet<String> = b.into_iter().collect();
    let signs = match signs {
        Some(map) => {
            let mut out = BTreeMap::new();
            for (word, sign) in map {
                let sign = match sign.as_str() {
                    "+" => lexicon::CorrelationSign::Positive,
                    "-" => lexicon::CorrelationSign::Negative,
                    other => return Err(value_err(format!("sign must be + or -, got {other:?}"))),
                };
                out.insert(word, sign);
            }
            Some(out)
        }
        None => None,
    };
    let report = lexicon::lexicon_overlap(&a, &b, risk_tags.as_ref(), signs.as_ref());
    Python::attach(|py| {
        let mut out: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
        out.insert("only_in_a".into(), report.only_in_a.into_py_any(py)?);
        out.insert("only_in_b".into(), report.only_in_b.into_py_any(py)?);
        out.insert("in_both".into(), report.in_both.into_py_any(py)?);
        out.insert(
            "shared_tokens".into(),
            report
                .shared_tokens
                .iter()
                .cloned()
                .collect::<Vec<String>>()
                .into_py_any(py)?,
        );
        out.insert(
            "disagreement_fraction".into(),
            report.disagreement_fraction.into_py_any(py)?,
        );
        out.insert("warnings".into(), report.warnings.into_py_any(py)?);
        Ok(out)
    })
}

/// Messages grouped per user in chronological order.
#[pyclass(frozen)]
struct Corpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl Corpus {
    /// Parse JSON-lines text (`{"id":..,"user":..,"ts":..,"text":..}`).
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Corpus> {
        Ok(Corpus {
            inner: corpus::read_messages(Cursor::new(text), "python").map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn read_file(path: &str) -> PyResult<Corpus> {
        let text = std::fs::read_to_string(path).map_err(runtime_err)?;
        Corpus::from_jsonl(&text)
    }

    fn user_ids(&self) -> Vec<String> {
        self.inner.user_ids()
    }

    fn user_count(&self) -> usize {
        self.inner.user_count()
    }

    fn message_count(&self) -> usize {
        self.inner.message_count()
    }

    /// `(id, ts, text)` triples for one user, oldest first.
    fn messages_of(&self, user: &str) -> PyResult<Vec<(String, u64, String)>> {
        let messages = self
            .inner
            .messages_of(user)
            .ok_or_else(|| value_err(format!("unknown user {user:?}")))?;
        Ok(messages
            .iter()
            .map(|m| (m.id.clone(), m.ts, m.text.clone()))
            .collect())
    }

    #[pyo3(signature = (min_messages, max_messages=None))]
    fn filter_users(&self, min_messages: usize, max_messages: Option<usize>) -> PyResult<Corpus> {
        Ok(Corpus {
            inner: self
                .inner
                .filter_users(min_messages, max_messages)
                .map_err(value_err)?,
        })
    }

    fn filter_words_by_risk(
        &self,
        word_risk: HashMap<String, u8>,
        keep_levels: Vec<u8>,
    ) -> PyResult<Corpus> {
        let keep: BTreeSet<u8> = keep_levels.into_iter().collect();
        Ok(Corpus {
            inner: self
                .inner
                .filter_words_by_risk(&word_risk, &keep)
                .map_err(value_err)?,
        })
    }

    fn to_jsonl(&self) -> PyResult<String> {
        let mut buffer = Vec::new();
        self.inner.write_jsonl(&mut buffer).map_err(runtime_err)?;
        String::from_utf8(buffer).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(users={}, messages={})",
            self.inner.user_count(),
            self.inner.message_count()
        )
    }
}

/// Normalized users-by-features matrix.
#[pyclass(frozen)]
struct FeatureMatrix {
    inner: features::FeatureMatrix,
}

#[pymethods]
impl FeatureMatrix {
    #[getter]
    fn user_ids(&self) -> Vec<String> {
        self.inner.user_ids.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.clone()
    }

    /// Per-feature `(min, max)` rate parameters.
    #[getter]
    fn params(&self) -> Vec<(f64, f64)> {
        self.inner.params.clone()
    }

    /// Score a held-out user's raw counts against these frozen parameters.
    fn apply_params(&self, counts: Vec<u64>, word_count: u64) -> PyResult<Vec<f64>> {
        let profile = features::UserProfile {
            user_id: String::new(),
            counts,
            word_count,
            message_count: 0,
        };
        features::apply_params(&profile, &self.inner.params).map_err(value_err)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buffer = Vec::new();
        self.inner.write_csv(&mut buffer).map_err(runtime_err)?;
        String::from_utf8(buffer).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "FeatureMatrix(users={}, features={})",
            self.inner.user_count(),
            self.inner.feature_count()
        )
    }
}

/// Count features for every user and build the min-max normalized matrix.
#[pyfunction]
fn build_matrix(lexicon: &Lexicon, corpus: &Corpus) -> PyResult<FeatureMatrix> {
    let profiles = features::profiles(&lexicon.inner, &corpus.inner);
    let matrix = features::build_matrix(&profiles, &lexicon.inner.feature_names())
        .map_err(value_err)?;
    Ok(FeatureMatrix { inner: matrix })
}

/// Trait weights (8 traits by F features).
#[pyclass(frozen)]
struct WeightMatrix {
    inner: traits::WeightMatrix,
}

#[pymethods]
impl WeightMatrix {
    /// Parse the weights CSV against the given feature order.
    #[staticmethod]
    fn parse(csv_text: &str, feature_names: Vec<String>) -> PyResult<WeightMatrix> {
        Ok(WeightMatrix {
            inner: traits::load_weights(csv_text, &feature_names).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn parse_file(path: &str, feature_names: Vec<String>) -> PyResult<WeightMatrix> {
        let text = std::fs::read_to_string(path).map_err(runtime_err)?;
        WeightMatrix::parse(&text, feature_names)
    }

    fn get(&self, trait_abbrev: &str, feature: usize) -> PyResult<f64> {
        let kind = TraitKind::ALL
            .into_iter()
            .find(|k| k.abbrev() == trait_abbrev)
            .ok_or_else(|| value_err(format!("unknown trait {trait_abbrev:?}")))?;
        Ok(self.inner.get(kind, feature))
    }
}

/// The eight trait labels in score order.
#[pyfunction]
fn trait_names() -> Vec<String> {
    TraitKind::ALL.iter().map(|k| k.abbrev().to_string()).collect()
}

/// Weighted trait sums: `[(user_id, [8 scores]), ...]`.
#[pyfunction]
fn score_traits(matrix: &FeatureMatrix, weights: &WeightMatrix) -> PyResult<Vec<(String, [f64; 8])>> {
    let scores = traits::score_traits(&matrix.inner, &weights.inner).map_err(value_err)?;
    Ok(scores.into_iter().map(|s| (s.user_id, s.scores)).collect())
}

/// Quartiles and Tukey fences of one value set.
#[pyfunction]
fn boxplot(values: Vec<f64>) -> PyResult<BTreeMap<String, f64>> {
    let stats = traits::boxplot(&values).map_err(value_err)?;
    Ok([
        ("q1".to_string(), stats.q1),
        ("median".to_string(), stats.median),
        ("q3".to_string(), stats.q3),
        ("iqr".to_string(), stats.iqr),
        ("lower_fence".to_string(), stats.lower_fence),
        ("upper_fence".to_string(), stats.upper_fence),
    ]
    .into())
}

/// Per-trait {lower, box, upper} user sets.
#[pyclass(frozen)]
struct OutlierPartition {
    inner: traits::OutlierPartition,
}

#[pymethods]
impl OutlierPartition {
    /// Members of one group: `group` is "upper", "box", or "lower".
    fn members(&self, trait_abbrev: &str, group: &str) -> PyResult<Vec<String>> {
        let kind = TraitKind::ALL
            .into_iter()
            .find(|k| k.abbrev() == trait_abbrev)
            .ok_or_else(|| value_err(format!("unknown trait {trait_abbrev:?}")))?;
        let group = match group {
            "upper" => OutlierGroup::Upper,
            "box" => OutlierGroup::Box,
            "lower" => OutlierGroup::Lower,
            other => return Err(value_err(format!("unknown group {other:?}"))),
        };
        Ok(self.inner.members(kind, group).to_vec())
    }

    /// Users above the fence on at least one Dark Triad trait.
    fn dark_triad_upper(&self) -> Vec<String> {
        self.inner.dark_triad_upper()
    }
}

#[pyfunction]
fn partition_outliers(scores: Vec<(String, [f64; 8])>) -> PyResult<OutlierPartition> {
    let scores: Vec<traits::TraitScores> = scores
        .into_iter()
        .map(|(user_id, scores)| traits::TraitScores { user_id, scores })
        .collect();
    Ok(OutlierPartition {
        inner: traits::partition_outliers(&scores).map_err(value_err)?,
    })
}

/// Safe/unsafe percentages per trait and outlier group. Labels map message
/// id -> {harm type -> level}. Empty groups map to None.
#[pyfunction]
fn harm_ratio_table(
    partition: &OutlierPartition,
    labels: BTreeMap<String, BTreeMap<String, u8>>,
    corpus: &Corpus,
) -> PyResult<BTreeMap<String, BTreeMap<String, Option<(f64, f64)>>>> {
    let labels = labels_from_py(&labels)?;
    let table = traits::harm_ratio_table(&partition.inner, &labels, &corpus.inner);
    let mut out = BTreeMap::new();
    for kind in TraitKind::ALL {
        let mut row = BTreeMap::new();
        for (group, name) in [
            (OutlierGroup::Upper, "upper"),
            (OutlierGroup::Box, "box"),
            (OutlierGroup::Lower, "lower"),
        ] {
            row.insert(
                name.to_string(),
                table.get(kind, group).map(|r| (r.safe_pct, r.unsafe_pct)),
            );
        }
        out.insert(kind.abbrev().to_string(), row);
    }
    Ok(out)
}

#[pyfunction]
fn logit(x: f64) -> PyResult<f64> {
    harm::logit(x).map_err(value_err)
}

#[pyfunction]
fn expit(x: f64) -> f64 {
    harm::expit(x)
}

fn harm_score_to_py(score: &harm::HarmScore) -> BTreeMap<String, Py<PyAny>> {
    Python::attach(|py| {
        [
            ("user".to_string(), score.user_id.clone().into_py_any(py).unwrap()),
            ("raw".to_string(), score.raw.into_py_any(py).unwrap()),
            (
                "transformed".to_string(),
                score.transformed.into_py_any(py).unwrap(),
            ),
            ("total".to_string(), score.total.into_py_any(py).unwrap()),
            ("m5".to_string(), score.m5.into_py_any(py).unwrap()),
            ("m6".to_string(), score.m6.into_py_any(py).unwrap()),
            ("m7".to_string(), score.m7.into_py_any(py).unwrap()),
        ]
        .into()
    })
}

/// Per-user harm levels, ranked worst first. Users with no ratable messages
/// are returned separately.
#[pyfunction]
fn harm_ranking(
    corpus: &Corpus,
    labels: BTreeMap<String, BTreeMap<String, u8>>,
) -> PyResult<(Vec<BTreeMap<String, Py<PyAny>>>, Vec<String>)> {
    let labels = labels_from_py(&labels)?;
    let mut scores = Vec::new();
    let mut unlabeled = Vec::new();
    for (user, messages) in corpus.inner.users() {
        let user_labels: Vec<RiskLabel> = messages
            .iter()
            .filter_map(|m| labels.get(&m.id).copied())
            .collect();
        match harm::harm_level(user.clone(), &user_labels) {
            Some(score) => scores.push(score),
            None => unlabeled.push(user.clone()),
        }
    }
    let ranking = harm::rank_users(scores);
    Ok((
        ranking.entries.iter().map(harm_score_to_py).collect(),
        unlabeled,
    ))
}

/// Word-list message labeler.
#[pyclass(frozen)]
struct KeywordLabeler {
    inner: harm::KeywordLabeler,
}

#[pymethods]
impl KeywordLabeler {
    /// Build from `(word, harm_type, level)` rules.
    #[new]
    fn new(rules: Vec<(String, String, u8)>) -> PyResult<KeywordLabeler> {
        let mut converted = Vec::new();
        for (word, harm_name, level) in rules {
            let harm = HarmType::from_name(&harm_name)
                .ok_or_else(|| value_err(format!("unknown harm type {harm_name:?}")))?;
            converted.push((word, harm, level));
        }
        Ok(KeywordLabeler {
            inner: harm::KeywordLabeler::new(converted).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<KeywordLabeler> {
        Ok(KeywordLabeler {
            inner: harm::KeywordLabeler::from_csv(text).map_err(value_err)?,
        })
    }

    /// Label every message of a corpus: `{id: {harm type: level}}`.
    fn label_corpus(&self, corpus: &Corpus) -> BTreeMap<String, BTreeMap<String, u8>> {
        labels_to_py(&self.inner.label_corpus(&corpus.inner))
    }
}

/// A fitted polynomial harm regressor.
#[pyclass(frozen)]
struct RegressionModel {
    inner: regress::RegressionModel,
}

#[pymethods]
impl RegressionModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<RegressionModel> {
        Ok(RegressionModel {
            inner: regress::RegressionModel::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.name().to_string()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.diagnostics.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.iterations
    }

    #[getter]
    fn chosen_alpha(&self) -> Option<f64> {
        self.inner.diagnostics.chosen_alpha
    }

    /// Coefficients in standardized expansion space.
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    /// Coefficients in raw monomial space.
    fn raw_coefficients(&self) -> Vec<f64> {
        self.inner.raw_coefficients()
    }

    /// Predict logit-domain harm for raw feature rows.
    fn predict(&self, base: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let design = self.inner.expand_base(&base).map_err(value_err)?;
        regress::predict(&self.inner, &design).map_err(value_err)
    }

    /// Zero-ablation contributions over the all-features-positive cohort:
    /// `(mean_contributions, cohort_rows)`.
    fn ablate(&self, base: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<usize>)> {
        let design = self.inner.expand_base(&base).map_err(value_err)?;
        let report = regress::ablate(&self.inner, &design).map_err(value_err)?;
        Ok((report.contributions, report.cohort_rows))
    }

    fn __repr__(&self) -> String {
        format!(
            "RegressionModel(method={}, degree={}, terms={})",
            self.inner.method.name(),
            self.inner.degree,
            self.inner.terms.len()
        )
    }
}

/// Fit one regressor on raw feature rows and logit-domain targets.
/// `method` is ridge | ridge-cv | bayesian-ridge | sgd | huber;
/// `mode` is full | univariate.
#[pyfunction]
#[pyo3(signature = (base, y, method="ridge", degree=3, mode="full", alpha=None, seed=None, epochs=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    base: Vec<Vec<f64>>,
    y: Vec<f64>,
    method: &str,
    degree: usize,
    mode: &str,
    alpha: Option<f64>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> PyResult<RegressionModel> {
    let method = regress::Method::from_name(method)
        .ok_or_else(|| value_err(format!("unknown method {method:?}")))?;
    let mode = parse_mode(mode)?;
    let design = regress::expand(&base, degree, mode).map_err(value_err)?;
    let mut options = regress::FitOptions::default();
    if let Some(alpha) = alpha {
        options.ridge_alpha = alpha;
    }
    if let Some(epochs) = epochs {
        options.sgd_epochs = epochs;
    }
    options.seed = seed;
    Ok(RegressionModel {
        inner: regress::fit(&design, &y, method, &options).map_err(value_err)?,
    })
}

#[pyfunction]
fn pearson(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    regress::pearson(&a, &b).map_err(value_err)
}

#[pyfunction]
fn mse(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    regress::mse(&a, &b).map_err(value_err)
}

/// Dark-Triad outlier share per harm-ranking bucket. `ranking` is user ids
/// ordered worst-first; returns `(bucket_sizes, fractions, classes)`.
#[pyfunction]
fn overlay(
    ranking: Vec<(String, f64)>,
    partition: &OutlierPartition,
    groups: usize,
) -> PyResult<(Vec<usize>, Vec<f64>, Vec<String>)> {
    let scores: Vec<harm::HarmScore> = ranking
        .into_iter()
        .map(|(user_id, transformed)| harm::HarmScore {
            user_id,
            raw: harm::expit(transformed),
            transformed,
            total: 0,
            m5: 0,
            m6: 0,
            m7: 0,
        })
        .collect();
    let ranking = harm::rank_users(scores);
    let result = regress::overlay(&ranking, &partition.inner, groups).map_err(value_err)?;
    let classes = result
        .classes
        .iter()
        .map(|c| {
            match c {
                regress::RankClass::Psychopathy => "Ps",
                regress::RankClass::Machiavellianism => "Ma",
                regress::RankClass::Narcissism => "Na",
                regress::RankClass::None => "none",
            }
            .to_string()
        })
        .collect();
    Ok((result.bucket_sizes, result.fractions, classes))
}

/// Prefix-size stability table: `{trait: [correlation or None per
/// checkpoint]}`. `correlation` is pearson | spearman.
#[pyfunction]
#[pyo3(signature = (corpus, lexicon, weights, checkpoints, reference, correlation="pearson"))]
fn stability_table(
    corpus: &Corpus,
    lexicon: &Lexicon,
    weights: &WeightMatrix,
    checkpoints: Vec<usize>,
    reference: usize,
    correlation: &str,
) -> PyResult<BTreeMap<String, Vec<Option<f64>>>> {
    let kind = stability::CorrelationKind::from_name(correlation)
        .ok_or_else(|| value_err(format!("unknown correlation {correlation:?}")))?;
    let mut sizes = checkpoints;
    sizes.push(reference);
    let per_size = stability::prefix_scores(&corpus.inner, &lexicon.inner, &weights.inner, &sizes)
        .map_err(value_err)?;
    let table = stability::stability_table(&per_size, reference, kind).map_err(value_err)?;
    Ok(TraitKind::ALL
        .into_iter()
        .map(|k| (k.abbrev().to_string(), table.cells[k.index()].clone()))
        .collect())
}

/// Generate a synthetic corpus with planted per-user category rates.
/// `categories` entries are `(name, words, base_rate, jitter)`.
/// Returns `(corpus, truth_rates)` where truth rates are
/// `(user_id, [per-category rate], filler_rate)`.
#[pyfunction]
#[pyo3(signature = (users, messages_per_user, words_mean, words_spread, categories, filler_words, seed))]
fn gen_corpus(
    users: usize,
    messages_per_user: usize,
    words_mean: f64,
    words_spread: f64,
    categories: Vec<(String, Vec<String>, f64, f64)>,
    filler_words: Vec<String>,
    seed: u64,
) -> PyResult<(Corpus, Vec<(String, Vec<f64>, f64)>)> {
    let spec = synth::PopulationSpec {
        user_count: users,
        messages_per_user,
        words_per_message: (words_mean, words_spread),
        categories: categories
            .into_iter()
            .map(|(name, words, base_rate, jitter)| synth::CategorySpec {
                name,
                words,
                base_rate,
                jitter,
            })
            .collect(),
        filler_words,
        seed,
    };
    let (corpus, truths) = synth::gen_corpus(&spec).map_err(value_err)?;
    Ok((
        Corpus { inner: corpus },
        truths
            .into_iter()
            .map(|t| (t.user_id, t.rates, t.filler_rate))
            .collect(),
    ))
}

/// Plant a polynomial harm function over a feature matrix and emit labels
/// consistent with it. Returns `(targets, labels)`.
#[pyfunction]
#[pyo3(signature = (matrix, corpus, coefficients, degree=1, mode="univariate", noise=0.0, seed=0))]
fn gen_harm(
    matrix: &FeatureMatrix,
    corpus: &Corpus,
    coefficients: Vec<f64>,
    degree: usize,
    mode: &str,
    noise: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, BTreeMap<String, BTreeMap<String, u8>>)> {
    let planted = synth::PlantedHarm {
        degree,
        mode: parse_mode(mode)?,
        coefficients,
        noise,
        seed,
    };
    let result = synth::gen_harm(&matrix.inner, &planted, &corpus.inner).map_err(value_err)?;
    Ok((result.targets, labels_to_py(&result.labels)))
}

#[pymodule]
fn inkling_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lexicon>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<FeatureMatrix>()?;
    m.add_class::<WeightMatrix>()?;
    m.add_class::<OutlierPartition>()?;
    m.add_class::<KeywordLabeler>()?;
    m.add_class::<RegressionModel>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(lexicon_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(build_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(trait_names, m)?)?;
    m.add_function(wrap_pyfunction!(score_traits, m)?)?;
    m.add_function(wrap_pyfunction!(boxplot, m)?)?;
    m.add_function(wrap_pyfunction!(partition_outliers, m)?)?;
    m.add_function(wrap_pyfunction!(harm_ratio_table, m)?)?;
    m.add_function(wrap_pyfunction!(logit, m)?)?;
    m.add_function(wrap_pyfunction!(expit, m)?)?;
    m.add_function(wrap_pyfunction!(harm_ranking, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(overlay, m)?)?;
    m.add_function(wrap_pyfunction!(stability_table, m)?)?;
    m.add_function(wrap_pyfunction!(gen_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(gen_harm, m)?)?;
    Ok(())
}
