//! Per-user harm levels, the logit/expit pair, and message labelers.
//!
//! A user's harm level is the share of their ratable messages (combined
//! level != 4) that land in the high-risk band 5-7:
//!
//! ```text
//! T = (M5 + M6 + M7) / M
//! ```
//!
//! Because the logit transform is undefined at 0 and 1, the transformed
//! score uses additive smoothing, `T' = (M5 + M6 + M7 + 0.5) / (M + 1)`,
//! while the raw unsmoothed ratio is reported alongside.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{CorpusError, HarmType, Message, RiskLabel};
use crate::features::csv_field;
use crate::lexicon::tokenize;

#[derive(Debug, Error)]
pub enum HarmError {
    #[error("logit argument {x} outside the open interval (0, 1)")]
    LogitDomain { x: f64 },
    #[error("invalid level {level} for word {word:?} in labeler config")]
    InvalidConfigLevel { word: String, level: i64 },
    #[error("labeler config line {line}: {reason}")]
    MalformedConfig { line: usize, reason: String },
}

/// Natural-log odds. Defined only on the open interval (0, 1).
pub fn logit(x: f64) -> Result<f64, HarmError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(HarmError::LogitDomain { x });
    }
    Ok((x / (1.0 - x)).ln())
}

/// Inverse of [`logit`]: `1 / (1 + exp(-x))`.
pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One user's harm level with the counts behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmScore {
    pub user_id: String,
    /// Unsmoothed ratio in [0, 1].
    pub raw: f64,
    /// Logit of the smoothed ratio; always finite.
    pub transformed: f64,
    /// Ratable messages (combined level != 4).
    pub total: u64,
    pub m5: u64,
    pub m6: u64,
    pub m7: u64,
}

/// Compute a user's harm level from their message labels. Returns `None`
/// when the user has no ratable messages (every label is level 4, or the
/// sequence is empty); such users are excluded from rankings.
pub fn harm_level(user_id: impl Into<String>, labels: &[RiskLabel]) -> Option<HarmScore> {
    let mut total = 0u64;
    let mut m5 = 0u64;
    let mut m6 = 0u64;
    let mut m7 = 0u64;
    for label in labels {
        let level = label.max_level();
        if level == 4 {
            continue;
        }
        total += 1;
        match level {
            5 => m5 += 1,
            6 => m6 += 1,
            7 => m7 += 1,
            _ => {}
        }
    }
    if total == 0 {
        return None;
    }
    let high = (m5 + m6 + m7) as f64;
    let raw = high / total as f64;
    let smoothed = (high + 0.5) / (total as f64 + 1.0);
    let transformed = logit(smoothed).expect("smoothed ratio is strictly inside (0, 1)");
    Some(HarmScore {
        user_id: user_id.into(),
        raw,
        transformed,
        total,
        m5,
        m6,
        m7,
    })
}

/// A message risk labeler. Implementations must be deterministic for a
/// fixed configuration and callable from concurrent workers.
pub trait Labeler: Sync {
    fn label(&self, message: &Message) -> RiskLabel;
}

/// Word-list labeler for testing and demos: a message's level per harm type
/// is the maximum configured level over its word tokens.
#[derive(Debug, Clone, Default)]
pub struct KeywordLabeler {
    rules: HashMap<String, Vec<(HarmType, u8)>>,
}

impl KeywordLabeler {
    pub fn new(
        config: impl IntoIterator<Item = (String, HarmType, u8)>,
    ) -> Result<KeywordLabeler, HarmError> {
        let mut rules: HashMap<String, Vec<(HarmType, u8)>> = HashMap::new();
        for (word, harm, level) in config {
            if level > RiskLabel::MAX_LEVEL {
                return Err(HarmError::InvalidConfigLevel {
                    word,
                    level: level as i64,
                });
            }
            rules.entry(word.to_lowercase()).or_default().push((harm, level));
        }
        Ok(KeywordLabeler { rules })
    }

    /// Parse `word,harm-type,level` CSV lines; `#` comments allowed.
    pub fn from_csv(content: &str) -> Result<KeywordLabeler, HarmError> {
        let mut config = Vec::new();
        for (idx, raw) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(|p| p.trim()).collect();
            if parts.len() != 3 {
                return Err(HarmError::MalformedConfig {
                    line: line_no,
                    reason: "expected `word,harm-type,level`".to_string(),
                });
            }
            let harm = HarmType::from_name(parts[1]).ok_or(HarmError::MalformedConfig {
                line: line_no,
                reason: format!("unknown harm type {:?}", parts[1]),
            })?;
            let level: i64 = parts[2].parse().map_err(|_| HarmError::MalformedConfig {
                line: line_no,
                reason: "level is not an integer".to_string(),
            })?;
            let level = u8::try_from(level)
                .ok()
                .filter(|l| *l <= RiskLabel::MAX_LEVEL)
                .ok_or_else(|| HarmError::InvalidConfigLevel {
                    word: parts[0].to_string(),
                    level,
                })?;
            config.push((parts[0].to_string(), harm, level));
        }
        KeywordLabeler::new(config)
    }

    /// Label every message of a corpus, keyed by message id.
    pub fn label_corpus(
        &self,
        corpus: &crate::corpus::Corpus,
    ) -> BTreeMap<String, RiskLabel> {
        corpus
            .all_messages()
            .map(|m| (m.id.clone(), self.label(m)))
            .collect()
    }
}

impl Labeler for KeywordLabeler {
    fn label(&self, message: &Message) -> RiskLabel {
        let mut label = RiskLabel::safe();
        for token in tokenize(&message.text) {
            if !token.is_word() {
                continue;
            }
            if let Some(rules) = self.rules.get(&token.surface) {
                for &(harm, level) in rules {
                    if level > label.get(harm) {
                        label.set(harm, level);
                    }
                }
            }
        }
        label
    }
}

/// Transport contract for an external labeling service.
///
/// Request: the message text, UTF-8. Response: five levels in 0..=7, one per
/// harm type in [`HarmType::ALL`] order. A JSON carrier would look like
/// `{"text": "..."}` -> `{"general": 0, "bullying": 0, "fighting": 0,
/// "vulgar": 6, "sexting": 0}`. No transport is shipped; this adapter exists
/// so deployments can plug a real service behind the [`Labeler`] interface.
pub trait LabelTransport: Sync {
    fn levels_for(&self, text: &str) -> Result<[u8; 5], CorpusError>;
}

/// Adapter from a [`LabelTransport`] to [`Labeler`]. Transport failures fall
/// back to an all-zero label, matching the treatment of unlabeled messages.
pub struct ExternalServiceLabeler<T: LabelTransport> {
    pub transport: T,
}

impl<T: LabelTransport> Labeler for ExternalServiceLabeler<T> {
    fn label(&self, message: &Message) -> RiskLabel {
        match self.transport.levels_for(&message.text) {
            Ok(levels) => RiskLabel::new(levels).unwrap_or_default(),
            Err(_) => RiskLabel::safe(),
        }
    }
}

/// Users sorted by transformed harm score, highest first, ties broken by
/// user id. Doubles as the plot data for sorted-score distribution charts.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmRanking {
    pub entries: Vec<HarmScore>,
}

impl HarmRanking {
    pub fn user_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.user_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `rank,user,raw,transformed` CSV, one row per user, best rank first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rank,user,raw,transformed")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, csv_field(&e.user_id), e.raw, e.transformed)?;
        }
        Ok(())
    }
}

/// Sort harm scores into a ranking (descending transformed score).
pub fn rank_users(scores: impl IntoIterator<Item = HarmScore>) -> HarmRanking {
    let mut entries: Vec<HarmScore> = scores.into_iter().collect();
    entries.sort_by(|a, b| {
        b.transformed
            .total_cmp(&a.transformed)
            .then_with(|| a.user_id.cmp(&b.user_id))
    });
    HarmRanking { entries }
}
