//! Message ingestion, per-user chronological grouping, and risk labels.
//!
//! Messages arrive as UTF-8 JSON lines with keys `id`, `user`, `ts`, `text`;
//! labels as lines with keys `id` and `levels` (harm-type name -> 0..7).
//! Corpora are immutable after construction: every filter returns a new
//! value, and per-user message lists stay sorted by `(ts, id)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{self, TokenKind};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate message id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: risk level {level} out of range 0..=7")]
    LevelOutOfRange { line: usize, level: i64 },
    #[error("line {line}: unknown harm type {name:?}")]
    UnknownHarmType { line: usize, name: String },
    #[error("min-messages {min} exceeds max-messages {max}")]
    BadMessageBounds { min: usize, max: usize },
    #[error("keep-levels entry {level} out of range 0..=7")]
    KeepLevelOutOfRange { level: u8 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One user utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub user: String,
    /// Epoch seconds.
    pub ts: u64,
    pub text: String,
}

/// The five harm types tracked by the labeling interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarmType {
    General,
    Bullying,
    Fighting,
    Vulgar,
    Sexting,
}

impl HarmType {
    pub const ALL: [HarmType; 5] = [
        HarmType::General,
        HarmType::Bullying,
        HarmType::Fighting,
        HarmType::Vulgar,
        HarmType::Sexting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HarmType::General => "general",
            HarmType::Bullying => "bullying",
            HarmType::Fighting => "fighting",
            HarmType::Vulgar => "vulgar",
            HarmType::Sexting => "sexting",
        }
    }

    pub fn from_name(name: &str) -> Option<HarmType> {
        HarmType::ALL.into_iter().find(|h| h.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Eight-level risk ratings for one message, one level per harm type.
/// Levels 0-3 are safe, 4 is unratable, 5-7 are harmful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RiskLabel {
    levels: [u8; 5],
}

impl RiskLabel {
    pub const MAX_LEVEL: u8 = 7;

    /// All-zero (super-safe) label.
    pub fn safe() -> RiskLabel {
        RiskLabel::default()
    }

    pub fn new(levels: [u8; 5]) -> Option<RiskLabel> {
        if levels.iter().all(|&l| l <= Self::MAX_LEVEL) {
            Some(RiskLabel { levels })
        } else {
            None
        }
    }

    pub fn get(&self, harm: HarmType) -> u8 {
        self.levels[harm.index()]
    }

    pub fn set(&mut self, harm: HarmType, level: u8) -> bool {
        if level > Self::MAX_LEVEL {
            return false;
        }
        self.levels[harm.index()] = level;
        true
    }

    /// The message's combined level: the maximum across the five harm types.
    pub fn max_level(&self) -> u8 {
        *self.levels.iter().max().unwrap()
    }

    pub fn levels(&self) -> [u8; 5] {
        self.levels
    }
}

/// Messages grouped per user in chronological `(ts, id)` order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    users: BTreeMap<String, Vec<Message>>,
    source_tag: String,
}

#[derive(Serialize, Deserialize)]
struct MessageRecord {
    id: String,
    user: String,
    ts: u64,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    id: String,
    levels: BTreeMap<String, i64>,
}

impl Corpus {
    pub fn new(source_tag: impl Into<String>) -> Corpus {
        Corpus {
            users: BTreeMap::new(),
            source_tag: source_tag.into(),
        }
    }

    /// Build from unordered messages; rejects duplicate ids.
    pub fn from_messages(
        source_tag: impl Into<String>,
        messages: impl IntoIterator<Item = Message>,
    ) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::new(source_tag);
        let mut seen = BTreeSet::new();
        for (i, msg) in messages.into_iter().enumerate() {
            if !seen.insert(msg.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: msg.id,
                });
            }
            corpus.users.entry(msg.user.clone()).or_default().push(msg);
        }
        corpus.sort_users();
        Ok(corpus)
    }

    fn sort_users(&mut self) {
        for msgs in self.users.values_mut() {
            msgs.sort_by(|a, b| (a.ts, &a.id).cmp(&(b.ts, &b.id)));
        }
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn message_count(&self) -> usize {
        self.users.values().map(|m| m.len()).sum()
    }

    /// Users in sorted id order with their chronological messages.
    pub fn users(&self) -> impl Iterator<Item = (&String, &Vec<Message>)> {
        self.users.iter()
    }

    pub fn user_ids(&self) -> Vec<String> {
        self.users.keys().cloned().collect()
    }

    pub fn messages_of(&self, user: &str) -> Option<&[Message]> {
        self.users.get(user).map(|v| v.as_slice())
    }

    pub fn all_messages(&self) -> impl Iterator<Item = &Message> {
        self.users.values().flatten()
    }

    /// Drop users with fewer than `min` messages; truncate users with more
    /// than `max` to their oldest `max` messages (chronological prefix).
    pub fn filter_users(&self, min: usize, max: Option<usize>) -> Result<Corpus, CorpusError> {
        if let Some(max) = max {
            if min > max {
                return Err(CorpusError::BadMessageBounds { min, max });
            }
        }
        let mut users = BTreeMap::new();
        for (user, msgs) in &self.users {
            if msgs.len() < min {
                continue;
            }
            let mut kept = msgs.clone();
            if let Some(max) = max {
                kept.truncate(max);
            }
            users.insert(user.clone(), kept);
        }
        Ok(Corpus {
            users,
            source_tag: self.source_tag.clone(),
        })
    }

    /// Rewrite every message keeping only tokens whose risk level is in
    /// `keep_levels`. Unknown tokens (including punctuation) count as level
    /// 0. Kept tokens are re-joined with single spaces, lowercased.
    pub fn filter_words_by_risk(
        &self,
        word_risk: &HashMap<String, u8>,
        keep_levels: &BTreeSet<u8>,
    ) -> Result<Corpus, CorpusError> {
        for &level in keep_levels {
            if level > RiskLabel::MAX_LEVEL {
                return Err(CorpusError::KeepLevelOutOfRange { level });
            }
        }
        let mut users = BTreeMap::new();
        for (user, msgs) in &self.users {
            let rewritten = msgs
                .iter()
                .map(|m| {
                    let kept: Vec<String> = lexicon::tokenize(&m.text)
                        .into_iter()
                        .filter(|t| {
                            let level = word_risk.get(&t.surface).copied().unwrap_or(0);
                            keep_levels.contains(&level)
                        })
                        .map(|t| t.surface)
                        .collect();
                    Message {
                        id: m.id.clone(),
                        user: m.user.clone(),
                        ts: m.ts,
                        text: kept.join(" "),
                    }
                })
                .collect();
            users.insert(user.clone(), rewritten);
        }
        Ok(Corpus {
            users,
            source_tag: self.source_tag.clone(),
        })
    }

    /// Serialize as JSON lines, users in sorted order, messages chronological.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for msgs in self.users.values() {
            for m in msgs {
                let record = MessageRecord {
                    id: m.id.clone(),
                    user: m.user.clone(),
                    ts: m.ts,
                    text: m.text.clone(),
                };
                serde_json::to_writer(&mut out, &record)
                    .map_err(|e| CorpusError::MalformedLine {
                        line: 0,
                        reason: e.to_string(),
                    })?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Parse a JSON-lines message stream into a corpus.
pub fn read_messages<R: BufRead>(
    reader: R,
    source_tag: impl Into<String>,
) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new(source_tag);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MessageRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        corpus
            .users
            .entry(record.user.clone())
            .or_default()
            .push(Message {
                id: record.id,
                user: record.user,
                ts: record.ts,
                text: record.text,
            });
    }
    corpus.sort_users();
    Ok(corpus)
}

/// Parse a JSON-lines label stream. Harm types missing from a record default
/// to level 0.
pub fn read_labels<R: BufRead>(reader: R) -> Result<BTreeMap<String, RiskLabel>, CorpusError> {
    let mut labels = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LabelRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
        if labels.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        let mut label = RiskLabel::safe();
        for (name, level) in &record.levels {
            let harm =
                HarmType::from_name(name).ok_or_else(|| CorpusError::UnknownHarmType {
                    line: line_no,
                    name: name.clone(),
                })?;
            let level_u8 = u8::try_from(*level).ok().filter(|l| *l <= RiskLabel::MAX_LEVEL);
            match level_u8 {
                Some(l) => {
                    label.set(harm, l);
                }
                None => {
                    return Err(CorpusError::LevelOutOfRange {
                        line: line_no,
                        level: *level,
                    })
                }
            }
        }
        labels.insert(record.id, label);
    }
    Ok(labels)
}

/// Serialize labels as JSON lines in sorted id order.
pub fn write_labels<W: Write>(
    labels: &BTreeMap<String, RiskLabel>,
    mut out: W,
) -> Result<(), CorpusError> {
    for (id, label) in labels {
        let levels: BTreeMap<String, i64> = HarmType::ALL
            .iter()
            .map(|h| (h.name().to_string(), label.get(*h) as i64))
            .collect();
        let record = LabelRecord {
            id: id.clone(),
            levels,
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| CorpusError::MalformedLine {
            line: 0,
            reason: e.to_string(),
        })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Tokenize-based word-level risk map loader: one `word,level` pair per CSV
/// line, `#` comments allowed.
pub fn read_word_risk(content: &str) -> Result<HashMap<String, u8>, CorpusError> {
    let mut map = HashMap::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(word), Some(level)) = (parts.next(), parts.next()) else {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: "expected `word,level`".to_string(),
            });
        };
        let level: i64 = level.trim().parse().map_err(|_| CorpusError::MalformedLine {
            line: line_no,
            reason: "level is not an integer".to_string(),
        })?;
        let level_u8 = u8::try_from(level)
            .ok()
            .filter(|l| *l <= RiskLabel::MAX_LEVEL)
            .ok_or(CorpusError::LevelOutOfRange {
                line: line_no,
                level,
            })?;
        map.insert(word.trim().to_lowercase(), level_u8);
    }
    Ok(map)
}

/// True when `text` still tokenizes to at least one word token.
pub fn has_words(text: &str) -> bool {
    lexicon::tokenize(text)
        .iter()
        .any(|t| t.kind == TokenKind::Word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn msg(id: &str, user: &str, ts: u64, text: &str) -> Message {
        Message {
            id: id.to_string(),
            user: user.to_string(),
            ts,
            text: text.to_string(),
        }
    }

    #[test]
    fn read_messages_groups_and_orders() {
        let data = concat!(
            "{\"id\":\"m2\",\"user\":\"A\",\"ts\":20,\"text\":\"second\"}\n",
            "{\"id\":\"m1\",\"user\":\"A\",\"ts\":10,\"text\":\"first\"}\n",
            "{\"id\":\"m3\",\"user\":\"B\",\"ts\":5,\"text\":\"other\"}\n",
        );
        let corpus = read_messages(Cursor::new(data), "test").unwrap();
        assert_eq!(corpus.user_count(), 2);
        let a = corpus.messages_of("A").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].id, "m1");
        assert_eq!(a[1].id, "m2");
    }

    #[test]
    fn read_messages_empty_stream() {
        let corpus = read_messages(Cursor::new(""), "test").unwrap();
        assert_eq!(corpus.user_count(), 0);
        assert_eq!(corpus.message_count(), 0);
    }

    #[test]
    fn read_messages_rejects_duplicate_id() {
        let data = concat!(
            "{\"id\":\"m1\",\"user\":\"A\",\"ts\":1,\"text\":\"x\"}\n",
            "{\"id\":\"m1\",\"user\":\"B\",\"ts\":2,\"text\":\"y\"}\n",
        );
        let err = read_messages(Cursor::new(data), "test").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn read_messages_reports_malformed_line_number() {
        let data = "{\"id\":\"m1\",\"user\":\"A\",\"ts\":1,\"text\":\"x\"}\nnot json\n";
        let err = read_messages(Cursor::new(data), "test").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn ties_break_by_message_id() {
        let corpus = Corpus::from_messages(
            "t",
            vec![msg("b", "A", 1, ""), msg("a", "A", 1, "")],
        )
        .unwrap();
        let ids: Vec<&str> = corpus.messages_of("A").unwrap().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = Corpus::from_messages(
            "tag",
            vec![
                msg("m1", "A", 10, "hello there"),
                msg("m2", "A", 20, "don't \"quote\" me"),
                msg("m3", "B", 5, ""),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let back = read_messages(Cursor::new(buf), "tag").unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn read_labels_defaults_missing_types() {
        let data = "{\"id\":\"m1\",\"levels\":{\"general\":5,\"vulgar\":6}}\n";
        let labels = read_labels(Cursor::new(data)).unwrap();
        let label = labels["m1"];
        assert_eq!(label.get(HarmType::General), 5);
        assert_eq!(label.get(HarmType::Vulgar), 6);
        assert_eq!(label.get(HarmType::Bullying), 0);
        assert_eq!(label.max_level(), 6);
    }

    #[test]
    fn read_labels_empty_stream() {
        let labels = read_labels(Cursor::new("")).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn read_labels_rejects_out_of_range() {
        let data = "{\"id\":\"m1\",\"levels\":{\"general\":9}}\n";
        let err = read_labels(Cursor::new(data)).unwrap_err();
        assert!(matches!(err, CorpusError::LevelOutOfRange { level: 9, .. }));
    }

    #[test]
    fn read_labels_rejects_unknown_harm_type() {
        let data = "{\"id\":\"m1\",\"levels\":{\"gossip\":1}}\n";
        let err = read_labels(Cursor::new(data)).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownHarmType { .. }));
    }

    #[test]
    fn filter_users_by_min() {
        let mut messages = Vec::new();
        for (user, n) in [("u5", 5usize), ("u40", 40), ("u400", 400)] {
            for i in 0..n {
                messages.push(msg(&format!("{user}-{i}"), user, i as u64, "x"));
            }
        }
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let filtered = corpus.filter_users(40, None).unwrap();
        assert_eq!(filtered.user_count(), 2);
        assert!(filtered.messages_of("u5").is_none());
    }

    #[test]
    fn filter_users_identity() {
        let corpus = Corpus::from_messages("t", vec![msg("a", "A", 1, "x")]).unwrap();
        let filtered = corpus.filter_users(1, None).unwrap();
        assert_eq!(corpus, filtered);
    }

    #[test]
    fn filter_users_truncates_to_oldest() {
        let messages: Vec<Message> = (0..100)
            .map(|i| msg(&format!("m{i:03}"), "A", i as u64, "x"))
            .collect();
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let filtered = corpus.filter_users(40, Some(40)).unwrap();
        let kept = filtered.messages_of("A").unwrap();
        assert_eq!(kept.len(), 40);
        assert_eq!(kept[0].id, "m000");
        assert_eq!(kept[39].id, "m039");
    }

    #[test]
    fn filter_users_is_idempotent() {
        let messages: Vec<Message> = (0..100)
            .map(|i| msg(&format!("m{i:03}"), "A", i as u64, "x"))
            .collect();
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let once = corpus.filter_users(10, Some(50)).unwrap();
        let twice = once.filter_users(10, Some(50)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn filter_words_drops_risky_tokens() {
        let corpus =
            Corpus::from_messages("t", vec![msg("m1", "A", 1, "we damn agree")]).unwrap();
        let risk: HashMap<String, u8> = [("damn".to_string(), 6)].into();
        let keep: BTreeSet<u8> = [0, 1, 4].into();
        let filtered = corpus.filter_words_by_risk(&risk, &keep).unwrap();
        assert_eq!(filtered.messages_of("A").unwrap()[0].text, "we agree");
    }

    #[test]
    fn filter_words_keep_all_is_identity_modulo_tokens() {
        let corpus = Corpus::from_messages("t", vec![msg("m1", "A", 1, "We Agree!")]).unwrap();
        let keep: BTreeSet<u8> = (0..=7).collect();
        let filtered = corpus
            .filter_words_by_risk(&HashMap::new(), &keep)
            .unwrap();
        assert_eq!(filtered.messages_of("A").unwrap()[0].text, "we agree !");
    }

    #[test]
    fn filter_words_can_empty_messages() {
        let corpus = Corpus::from_messages("t", vec![msg("m1", "A", 1, "damn hell")]).unwrap();
        let risk: HashMap<String, u8> = [("damn".to_string(), 6), ("hell".to_string(), 5)].into();
        let keep: BTreeSet<u8> = [0].into();
        let filtered = corpus.filter_words_by_risk(&risk, &keep).unwrap();
        assert_eq!(filtered.messages_of("A").unwrap()[0].text, "");
    }
}
