//! Declarative run configuration: one TOML file, overridden by flags,
//! echoed into the output directory for provenance.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Command failure classes mapped to exit codes: validation errors exit 2,
/// runtime errors exit 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl fmt::Display) -> CliError {
        CliError::Runtime(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// One synthetic category: which lexicon category supplies the vocabulary
/// and the planted emission rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthCategory {
    pub name: String,
    pub base_rate: f64,
    #[serde(default)]
    pub jitter: f64,
}

/// `[synth]` section: population shape plus the planted harm polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub messages_per_user: usize,
    pub words_mean: f64,
    #[serde(default)]
    pub words_spread: f64,
    pub categories: Vec<SynthCategory>,
    #[serde(default)]
    pub filler_words: Vec<String>,
    #[serde(default = "default_harm_degree")]
    pub harm_degree: usize,
    #[serde(default = "default_harm_mode")]
    pub harm_mode: String,
    /// Explicit planted coefficients (one per expansion term). When absent,
    /// `harm_nonzero` random terms are drawn from the seed.
    #[serde(default)]
    pub harm_coefficients: Option<Vec<f64>>,
    #[serde(default = "default_harm_nonzero")]
    pub harm_nonzero: usize,
    #[serde(default = "default_harm_scale")]
    pub harm_scale: f64,
    #[serde(default = "default_harm_noise")]
    pub harm_noise: f64,
}

fn default_harm_degree() -> usize {
    1
}
fn default_harm_mode() -> String {
    "univariate".to_string()
}
fn default_harm_nonzero() -> usize {
    8
}
fn default_harm_scale() -> f64 {
    1.0
}
fn default_harm_noise() -> f64 {
    0.05
}

/// Every tunable of every subcommand. Each command validates the subset it
/// needs; flags override file values field by field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // input paths
    pub lexicon: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub messages: Option<PathBuf>,
    /// Second corpus for side-by-side boxplots.
    pub messages_b: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Keyword-labeler CSV used when no label file is available.
    pub labeler: Option<PathBuf>,
    pub test_messages: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Frozen per-feature min/max from a training run.
    pub feature_params: Option<PathBuf>,
    pub risk_words: Option<PathBuf>,
    pub signs: Option<PathBuf>,
    pub vocab_a: Option<PathBuf>,
    pub vocab_b: Option<PathBuf>,
    pub out: Option<PathBuf>,

    // stage parameters
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub min_messages: Option<usize>,
    pub max_messages: Option<usize>,
    pub degree: Option<usize>,
    /// ridge | ridge-cv | bayesian-ridge | sgd | huber | all
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub epochs: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub reference: Option<usize>,
    pub groups: Option<usize>,
    /// pearson | spearman
    pub correlation: Option<String>,
    pub keep_levels: Option<Vec<u8>>,
    pub exclude_categories: Option<Vec<u32>>,

    // mode flags
    pub frozen_normalization: Option<bool>,
    pub univariate_expansion: Option<bool>,

    pub synth: Option<SynthConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("bad config {}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::validation("no output directory: pass --out or set `out`"))
    }

    pub fn require(&self, field: Option<&PathBuf>, name: &str, flag: &str) -> CliResult<PathBuf> {
        let path = field
            .cloned()
            .ok_or_else(|| CliError::validation(format!("missing {name}: pass {flag} or set `{name}`")))?;
        if !path.exists() {
            return Err(CliError::validation(format!(
                "{name} file {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    /// Serialize the effective configuration for the provenance echo.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }
}
