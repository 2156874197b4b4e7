//! Category dictionaries, tokenization, and token-to-category matching.
//!
//! A [`Lexicon`] maps words, wildcard stems (`hear*`), and punctuation
//! classes to small-integer category ids. Dictionaries are parsed from the
//! common `.dic` interchange layout: a header section delimited by `%` lines
//! declaring `id<TAB>name` pairs, followed by entry lines
//! `word<TAB>id[<TAB>id...]`. Categories declared under the reserved names
//! `period`, `comma`, `qmark`, `exclam`, `quote`, and `otherp` are matched
//! against punctuation tokens instead of words.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Category identifier as declared in the dictionary header.
pub type CategoryId = u32;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: malformed header entry {text:?}")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: duplicate category id {id}")]
    DuplicateCategoryId { line: usize, id: CategoryId },
    #[error("line {line}: entry {word:?} references undeclared category {id}")]
    UndeclaredCategory {
        line: usize,
        word: String,
        id: CategoryId,
    },
    #[error("line {line}: empty entry")]
    EmptyEntry { line: usize },
    #[error("line {line}: malformed entry {text:?}")]
    MalformedEntry { line: usize, text: String },
    #[error("missing `%`-delimited header section")]
    MissingHeader,
    #[error("unknown category id {id}")]
    UnknownCategory { id: CategoryId },
}

/// Punctuation classes recognized by the tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PunctClass {
    Period,
    Comma,
    Question,
    Exclamation,
    Quote,
    Other,
}

impl PunctClass {
    pub const ALL: [PunctClass; 6] = [
        PunctClass::Period,
        PunctClass::Comma,
        PunctClass::Question,
        PunctClass::Exclamation,
        PunctClass::Quote,
        PunctClass::Other,
    ];

    /// Reserved category name that maps to this class in dictionary headers.
    pub fn reserved_name(self) -> &'static str {
        match self {
            PunctClass::Period => "period",
            PunctClass::Comma => "comma",
            PunctClass::Question => "qmark",
            PunctClass::Exclamation => "exclam",
            PunctClass::Quote => "quote",
            PunctClass::Other => "otherp",
        }
    }

    fn from_reserved_name(name: &str) -> Option<PunctClass> {
        PunctClass::ALL
            .into_iter()
            .find(|c| c.reserved_name() == name)
    }

    fn classify(ch: char) -> PunctClass {
        match ch {
            '.' | '…' => PunctClass::Period,
            ',' => PunctClass::Comma,
            '?' | '¿' => PunctClass::Question,
            '!' | '¡' => PunctClass::Exclamation,
            '"' | '\'' | '`' | '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' => {
                PunctClass::Quote
            }
            _ => PunctClass::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Numeral,
    Punctuation(PunctClass),
}

/// One unit of counting: a lowercased word, a numeral, or a punctuation mark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn word(surface: impl Into<String>) -> Token {
        Token {
            surface: surface.into(),
            kind: TokenKind::Word,
        }
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

fn is_word_char(ch: char) -> bool {
    ch.is_alphanumeric()
}

fn is_apostrophe(ch: char) -> bool {
    ch == '\'' || ch == '\u{2019}'
}

/// Split text into word, numeral, and punctuation tokens.
///
/// Runs of Unicode letters/digits form one token; an apostrophe is kept
/// inside a token only when flanked by word characters on both sides
/// (`don't` stays whole, a leading `'tis` quote does not attach). Words are
/// lowercased. A run without any letter is a numeral. Every other
/// non-whitespace character becomes a punctuation token. The number of
/// `Word` tokens is the text's word-count contribution.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if is_word_char(ch) {
            let mut run = String::new();
            while i < chars.len() {
                let c = chars[i];
                if is_word_char(c) {
                    run.push(c);
                    i += 1;
                } else if is_apostrophe(c)
                    && i + 1 < chars.len()
                    && is_word_char(chars[i + 1])
                    && !run.is_empty()
                {
                    run.push('\'');
                    i += 1;
                } else {
                    break;
                }
            }
            let has_letter = run.chars().any(|c| c.is_alphabetic());
            let surface = run.to_lowercase();
            tokens.push(Token {
                surface,
                kind: if has_letter {
                    TokenKind::Word
                } else {
                    TokenKind::Numeral
                },
            });
        } else {
            tokens.push(Token {
                surface: ch.to_string(),
                kind: TokenKind::Punctuation(PunctClass::classify(ch)),
            });
            i += 1;
        }
    }
    tokens
}

/// Number of `Word` tokens produced by [`tokenize`].
pub fn word_count(text: &str) -> u64 {
    tokenize(text).iter().filter(|t| t.is_word()).count() as u64
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<char, TrieNode>,
    categories: Option<BTreeSet<CategoryId>>,
}

/// Prefix trie over wildcard stems. Matching returns the categories of the
/// longest stem that prefixes the query.
#[derive(Debug, Clone, Default)]
struct StemTrie {
    root: TrieNode,
    len: usize,
}

impl StemTrie {
    fn insert(&mut self, stem: &str, ids: impl IntoIterator<Item = CategoryId>) {
        let mut node = &mut self.root;
        for ch in stem.chars() {
            node = node.children.entry(ch).or_default();
        }
        let slot = node.categories.get_or_insert_with(BTreeSet::new);
        if slot.is_empty() {
            self.len += 1;
        }
        slot.extend(ids);
    }

    fn longest_match(&self, word: &str) -> Option<&BTreeSet<CategoryId>> {
        let mut node = &self.root;
        let mut best = node.categories.as_ref();
        for ch in word.chars() {
            match node.children.get(&ch) {
                Some(next) => {
                    node = next;
                    if node.categories.is_some() {
                        best = node.categories.as_ref();
                    }
                }
                None => break,
            }
        }
        best
    }

    fn iter(&self) -> Vec<(String, &BTreeSet<CategoryId>)> {
        let mut out = Vec::new();
        let mut stack = vec![(String::new(), &self.root)];
        while let Some((prefix, node)) = stack.pop() {
            if let Some(cats) = &node.categories {
                out.push((prefix.clone(), cats));
            }
            for (ch, child) in node.children.iter().rev() {
                let mut next = prefix.clone();
                next.push(*ch);
                stack.push((next, child));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// A declared category: id as written in the header plus its display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

/// Immutable category dictionary. Shareable across threads; all matching is
/// read-only.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    categories: Vec<Category>,
    exact: HashMap<String, BTreeSet<CategoryId>>,
    stems: StemTrie,
    punctuation: BTreeMap<PunctClass, BTreeSet<CategoryId>>,
}

impl Lexicon {
    /// Parse a dictionary in `.dic` layout. Entries are lowercased; a
    /// trailing `*` marks a stem entry.
    pub fn parse(content: &str) -> Result<Lexicon, LexiconError> {
        let mut categories: Vec<Category> = Vec::new();
        let mut seen_ids: BTreeSet<CategoryId> = BTreeSet::new();
        let mut exact: HashMap<String, BTreeSet<CategoryId>> = HashMap::new();
        let mut stems = StemTrie::default();
        let mut punctuation: BTreeMap<PunctClass, BTreeSet<CategoryId>> = BTreeMap::new();

        // 0 = before header, 1 = inside header, 2 = entry section
        let mut section = 0u8;
        for (idx, raw) in content.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            if line.trim() == "%" {
                section += 1;
                if section > 2 {
                    return Err(LexiconError::MalformedEntry {
                        line: line_no,
                        text: line.to_string(),
                    });
                }
                continue;
            }
            match section {
                0 => {
                    // Content before the first `%` is not part of the format.
                    return Err(LexiconError::MissingHeader);
                }
                1 => {
                    let mut parts = line.split('\t').filter(|p| !p.trim().is_empty());
                    let id_part = parts.next();
                    let name_part = parts.next();
                    let (id_part, name_part) = match (id_part, name_part) {
                        (Some(a), Some(b)) => (a.trim(), b.trim()),
                        _ => {
                            return Err(LexiconError::MalformedHeader {
                                line: line_no,
                                text: line.to_string(),
                            })
                        }
                    };
                    let id: CategoryId =
                        id_part
                            .parse()
                            .map_err(|_| LexiconError::MalformedHeader {
                                line: line_no,
                                text: line.to_string(),
                            })?;
                    if !seen_ids.insert(id) {
                        return Err(LexiconError::DuplicateCategoryId { line: line_no, id });
                    }
                    let name = name_part.to_lowercase();
                    if let Some(class) = PunctClass::from_reserved_name(&name) {
                        punctuation.entry(class).or_default().insert(id);
                    }
                    categories.push(Category { id, name });
                }
                _ => {
                    let mut parts = line.split('\t').filter(|p| !p.trim().is_empty());
                    let word = match parts.next() {
                        Some(w) => w.trim().to_lowercase(),
                        None => return Err(LexiconError::EmptyEntry { line: line_no }),
                    };
                    let mut ids = Vec::new();
                    for part in parts {
                        let id: CategoryId =
                            part.trim()
                                .parse()
                                .map_err(|_| LexiconError::MalformedEntry {
                                    line: line_no,
                                    text: line.to_string(),
                                })?;
                        if !seen_ids.contains(&id) {
                            return Err(LexiconError::UndeclaredCategory {
                                line: line_no,
                                word,
                                id,
                            });
                        }
                        ids.push(id);
                    }
                    if ids.is_empty() {
                        return Err(LexiconError::MalformedEntry {
                            line: line_no,
                            text: line.to_string(),
                        });
                    }
                    if let Some(stem) = word.strip_suffix('*') {
                        if stem.is_empty() {
                            return Err(LexiconError::EmptyEntry { line: line_no });
                        }
                        stems.insert(stem, ids);
                    } else {
                        if word.is_empty() {
                            return Err(LexiconError::EmptyEntry { line: line_no });
                        }
                        exact.entry(word).or_default().extend(ids);
                    }
                }
            }
        }
        if section == 0 {
            // Empty input: treat as an empty dictionary only when truly empty.
            if content.trim().is_empty() {
                return Ok(Lexicon::default());
            }
            return Err(LexiconError::MissingHeader);
        }
        Ok(Lexicon {
            categories,
            exact,
            stems,
            punctuation,
        })
    }

    /// Build a lexicon programmatically; entries ending in `*` become stems.
    /// Used heavily by tests and the synthetic generators.
    pub fn from_entries(
        categories: Vec<(CategoryId, &str)>,
        entries: Vec<(&str, Vec<CategoryId>)>,
    ) -> Result<Lexicon, LexiconError> {
        let mut text = String::from("%\n");
        for (id, name) in &categories {
            text.push_str(&format!("{id}\t{name}\n"));
        }
        text.push_str("%\n");
        for (word, ids) in &entries {
            text.push_str(word);
            for id in ids {
                text.push_str(&format!("\t{id}"));
            }
            text.push('\n');
        }
        Lexicon::parse(&text)
    }

    /// Declared categories in header order. Feature vectors are indexed by
    /// position in this list, not by raw id.
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn feature_count(&self) -> usize {
        self.categories.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    /// Position of a category id in the declaration order.
    pub fn index_of(&self, id: CategoryId) -> Option<usize> {
        self.categories.iter().position(|c| c.id == id)
    }

    pub fn exact_entry_count(&self) -> usize {
        self.exact.len()
    }

    pub fn stem_entry_count(&self) -> usize {
        self.stems.len
    }

    /// Categories matched by a token: exact entries, the longest matching
    /// stem, and the token's punctuation class.
    pub fn match_token(&self, token: &Token) -> BTreeSet<CategoryId> {
        let mut out = BTreeSet::new();
        match token.kind {
            TokenKind::Punctuation(class) => {
                if let Some(ids) = self.punctuation.get(&class) {
                    out.extend(ids.iter().copied());
                }
            }
            TokenKind::Word | TokenKind::Numeral => {
                if let Some(ids) = self.exact.get(&token.surface) {
                    out.extend(ids.iter().copied());
                }
                if let Some(ids) = self.stems.longest_match(&token.surface) {
                    out.extend(ids.iter().copied());
                }
            }
        }
        out
    }

    /// All word-like entries: exact words plus stem roots (wildcard removed).
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut vocab: BTreeSet<String> = self.exact.keys().cloned().collect();
        for (stem, _) in self.stems.iter() {
            vocab.insert(stem);
        }
        vocab
    }

    /// Exact words and stem roots assigned to the category at `index`.
    pub fn words_in_category(&self, index: usize) -> Vec<String> {
        let Some(cat) = self.categories.get(index) else {
            return Vec::new();
        };
        let mut words: Vec<String> = self
            .exact
            .iter()
            .filter(|(_, ids)| ids.contains(&cat.id))
            .map(|(w, _)| w.clone())
            .collect();
        for (stem, ids) in self.stems.iter() {
            if ids.contains(&cat.id) {
                words.push(stem);
            }
        }
        words.sort();
        words.dedup();
        words
    }

    /// Remove the given categories and every entry reference to them.
    /// Entries left without categories are dropped.
    pub fn filter_categories(
        &self,
        excluded: &BTreeSet<CategoryId>,
    ) -> Result<Lexicon, LexiconError> {
        let declared: BTreeSet<CategoryId> = self.categories.iter().map(|c| c.id).collect();
        for id in excluded {
            if !declared.contains(id) {
                return Err(LexiconError::UnknownCategory { id: *id });
            }
        }
        let categories: Vec<Category> = self
            .categories
            .iter()
            .filter(|c| !excluded.contains(&c.id))
            .cloned()
            .collect();
        let mut exact = HashMap::new();
        for (word, ids) in &self.exact {
            let kept: BTreeSet<CategoryId> =
                ids.iter().copied().filter(|i| !excluded.contains(i)).collect();
            if !kept.is_empty() {
                exact.insert(word.clone(), kept);
            }
        }
        let mut stems = StemTrie::default();
        for (stem, ids) in self.stems.iter() {
            let kept: Vec<CategoryId> =
                ids.iter().copied().filter(|i| !excluded.contains(i)).collect();
            if !kept.is_empty() {
                stems.insert(&stem, kept);
            }
        }
        let mut punctuation: BTreeMap<PunctClass, BTreeSet<CategoryId>> = BTreeMap::new();
        for (class, ids) in &self.punctuation {
            let kept: BTreeSet<CategoryId> =
                ids.iter().copied().filter(|i| !excluded.contains(i)).collect();
            if !kept.is_empty() {
                punctuation.insert(*class, kept);
            }
        }
        Ok(Lexicon {
            categories,
            exact,
            stems,
            punctuation,
        })
    }
}

/// Raw per-category hit counts over a batch of texts, before any
/// normalization. A token matching k categories increments k counters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureCounts {
    /// One counter per category, in header order.
    pub counts: Vec<u64>,
    /// Total number of word tokens.
    pub word_count: u64,
    /// Number of texts counted.
    pub message_count: u64,
}

impl FeatureCounts {
    pub fn zeros(feature_count: usize) -> FeatureCounts {
        FeatureCounts {
            counts: vec![0; feature_count],
            word_count: 0,
            message_count: 0,
        }
    }

    pub fn merge(&mut self, other: &FeatureCounts) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.word_count += other.word_count;
        self.message_count += other.message_count;
    }
}

/// Count category hits and word totals over all texts of one user.
pub fn count_features<S: AsRef<str>>(lexicon: &Lexicon, texts: &[S]) -> FeatureCounts {
    let mut acc = FeatureCounts::zeros(lexicon.feature_count());
    let index_of: HashMap<CategoryId, usize> = lexicon
        .categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id, i))
        .collect();
    for text in texts {
        acc.message_count += 1;
        for token in tokenize(text.as_ref()) {
            if token.is_word() {
                acc.word_count += 1;
            }
            for id in lexicon.match_token(&token) {
                if let Some(&idx) = index_of.get(&id) {
                    acc.counts[idx] += 1;
                }
            }
        }
    }
    acc
}

/// Sign of a word's correlation with some trait, for overlap diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationSign {
    Positive,
    Negative,
}

/// Vocabulary comparison between two word sets, with an optional
/// risk-versus-correlation disagreement rate over the shared words.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub only_in_a: usize,
    pub only_in_b: usize,
    pub in_both: usize,
    pub shared_tokens: BTreeSet<String>,
    /// Share of annotated shared tokens whose safe/risky tag conflicts with
    /// the correlation sign. `None` unless both annotations were supplied.
    pub disagreement_fraction: Option<f64>,
    pub warnings: Vec<String>,
}

/// Compare two vocabularies. When both `risk_tags` (word -> level 0..7) and
/// `correlation_signs` are given, also measure how often the two annotation
/// systems disagree on shared words: a conflict is a safe-tagged (0-3) word
/// with a positive sign or a risky-tagged (5-7) word with a negative sign.
/// Level-4 tags are uninformative and skipped.
pub fn lexicon_overlap(
    a: &BTreeSet<String>,
    b: &BTreeSet<String>,
    risk_tags: Option<&BTreeMap<String, u8>>,
    correlation_signs: Option<&BTreeMap<String, CorrelationSign>>,
) -> OverlapReport {
    let shared_tokens: BTreeSet<String> = a.intersection(b).cloned().collect();
    let only_in_a = a.len() - shared_tokens.len();
    let only_in_b = b.len() - shared_tokens.len();

    let mut warnings = Vec::new();
    let disagreement_fraction = match (risk_tags, correlation_signs) {
        (Some(tags), Some(signs)) => {
            for word in tags.keys() {
                if !shared_tokens.contains(word) {
                    warnings.push(format!("risk tag for {word:?} is not a shared token"));
                }
            }
            for word in signs.keys() {
                if !shared_tokens.contains(word) {
                    warnings.push(format!(
                        "correlation sign for {word:?} is not a shared token"
                    ));
                }
            }
            let mut annotated = 0usize;
            let mut conflicts = 0usize;
            for word in &shared_tokens {
                let (Some(&level), Some(&sign)) = (tags.get(word), signs.get(word)) else {
                    continue;
                };
                let safe = level <= 3;
                let risky = (5..=7).contains(&level);
                if !safe && !risky {
                    continue;
                }
                annotated += 1;
                let conflict = (safe && sign == CorrelationSign::Positive)
                    || (risky && sign == CorrelationSign::Negative);
                if conflict {
                    conflicts += 1;
                }
            }
            if annotated > 0 {
                Some(conflicts as f64 / annotated as f64)
            } else {
                None
            }
        }
        _ => None,
    };

    OverlapReport {
        only_in_a,
        only_in_b,
        in_both: shared_tokens.len(),
        shared_tokens,
        disagreement_fraction,
        warnings,
    }
}
