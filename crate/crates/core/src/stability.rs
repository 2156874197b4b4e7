//! Message-count stability study: how fast trait scores computed from a
//! user's oldest k messages converge to their full-history values.
//!
//! For each prefix size the whole pipeline is re-run (counts from the
//! chronological prefix, fresh population min-max, weighted scores), then
//! each trait's scores are correlated across users against the
//! reference-size run.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::features::{build_matrix, FeatureError, UserProfile};
use crate::lexicon::{count_features, Lexicon};
use crate::regress::{pearson, RegressError};
use crate::traits::{score_traits, TraitError, TraitKind, TraitScores, WeightMatrix, TRAIT_COUNT};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("no prefix sizes supplied")]
    NoSizes,
    #[error("prefix size 0 is not meaningful")]
    ZeroSize,
    #[error("user {user:?} has {have} messages, fewer than the reference size {need}")]
    UserTooShort {
        user: String,
        have: usize,
        need: usize,
    },
    #[error("need at least 3 users to correlate, got {got}")]
    TooFewUsers { got: usize },
    #[error("reference size {reference} missing from the computed sizes")]
    MissingReference { reference: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Trait(#[from] TraitError),
}

/// Correlation statistic for the table cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

impl CorrelationKind {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
        }
    }

    pub fn from_name(name: &str) -> Option<CorrelationKind> {
        match name {
            "pearson" => Some(CorrelationKind::Pearson),
            "spearman" => Some(CorrelationKind::Spearman),
            _ => None,
        }
    }
}

/// Trait scores for every user at each requested prefix size.
///
/// Counts are accumulated incrementally over each user's chronological
/// message order, so a size-k run sees exactly the oldest k messages.
/// Every user must have at least `max(sizes)` messages.
pub fn prefix_scores(
    corpus: &Corpus,
    lexicon: &Lexicon,
    weights: &WeightMatrix,
    sizes: &[usize],
) -> Result<BTreeMap<usize, Vec<TraitScores>>, StabilityError> {
    let mut sizes: Vec<usize> = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.is_empty() {
        return Err(StabilityError::NoSizes);
    }
    if sizes[0] == 0 {
        return Err(StabilityError::ZeroSize);
    }
    let largest = *sizes.last().unwrap();
    for (user, messages) in corpus.users() {
        if messages.len() < largest {
            return Err(StabilityError::UserTooShort {
                user: user.clone(),
                have: messages.len(),
                need: largest,
            });
        }
    }

    // Per user: cumulative counts snapshotted at each checkpoint.
    let users: Vec<(&String, &Vec<crate::corpus::Message>)> = corpus.users().collect();
    let per_user: Vec<Vec<UserProfile>> = users
        .par_iter()
        .map(|(user, messages)| {
            let mut snapshots = Vec::with_capacity(sizes.len());
            let mut acc = crate::lexicon::FeatureCounts::zeros(lexicon.feature_count());
            let mut next = 0;
            for (i, message) in messages.iter().enumerate() {
                acc.merge(&count_features(lexicon, &[message.text.as_str()]));
                while next < sizes.len() && sizes[next] == i + 1 {
                    snapshots.push(UserProfile::new(user.as_str(), acc.clone()));
                    next += 1;
                }
                if next == sizes.len() {
                    break;
                }
            }
            snapshots
        })
        .collect();

    let feature_names = lexicon.feature_names();
    let mut result = BTreeMap::new();
    for (k, &size) in sizes.iter().enumerate() {
        let profiles: Vec<UserProfile> = per_user.iter().map(|s| s[k].clone()).collect();
        let matrix = build_matrix(&profiles, &feature_names)?;
        let scores = score_traits(&matrix, weights)?;
        result.insert(size, scores);
    }
    Ok(result)
}

/// Table of per-trait correlations between prefix-size scores and the
/// reference-size scores. `None` cells mark undefined correlations
/// (constant score vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub checkpoints: Vec<usize>,
    pub reference: usize,
    pub kind: CorrelationKind,
    /// `cells[trait][checkpoint]`.
    pub cells: [Vec<Option<f64>>; TRAIT_COUNT],
}

impl StabilityTable {
    pub fn get(&self, kind: TraitKind, checkpoint: usize) -> Option<f64> {
        let col = self.checkpoints.iter().position(|&c| c == checkpoint)?;
        self.cells[kind.index()][col]
    }

    /// `trait,<size>,<size>...` CSV, one row per trait, `NA` for undefined
    /// cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "trait")?;
        for c in &self.checkpoints {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for kind in TraitKind::ALL {
            write!(out, "{}", kind.abbrev())?;
            for cell in &self.cells[kind.index()] {
                match cell {
                    Some(v) => write!(out, ",{v:.4}")?,
                    None => write!(out, ",NA")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

fn correlate(a: &[f64], b: &[f64], kind: CorrelationKind) -> Result<f64, RegressError> {
    match kind {
        CorrelationKind::Pearson => pearson(a, b),
        CorrelationKind::Spearman => pearson(&ranks(a), &ranks(b)),
    }
}

/// Correlate each trait's per-size scores against the reference size.
pub fn stability_table(
    per_size: &BTreeMap<usize, Vec<TraitScores>>,
    reference: usize,
    kind: CorrelationKind,
) -> Result<StabilityTable, StabilityError> {
    let reference_scores = per_size
        .get(&reference)
        .ok_or(StabilityError::MissingReference { reference })?;
    if reference_scores.len() < 3 {
        return Err(StabilityError::TooFewUsers {
            got: reference_scores.len(),
        });
    }
    let checkpoints: Vec<usize> = per_size.keys().copied().filter(|&s| s < reference).collect();
    let mut cells: [Vec<Option<f64>>; TRAIT_COUNT] = Default::default();
    for trait_kind in TraitKind::ALL {
        let reference_column: Vec<f64> =
            reference_scores.iter().map(|s| s.get(trait_kind)).collect();
        for &size in &checkpoints {
            let column: Vec<f64> = per_size[&size].iter().map(|s| s.get(trait_kind)).collect();
            let cell = match correlate(&column, &reference_column, kind) {
                Ok(r) => Some(r),
                Err(RegressError::ConstantInput) => None,
                Err(_) => None,
            };
            cells[trait_kind.index()].push(cell);
        }
    }
    Ok(StabilityTable {
        checkpoints,
        reference,
        kind,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Message;
    use crate::lexicon::Lexicon;
    use crate::traits::WeightMatrix;

    fn two_cat_lexicon() -> Lexicon {
        Lexicon::from_entries(
            vec![(1, "we-words"), (2, "percept")],
            vec![
                ("we", vec![1]),
                ("us", vec![1]),
                ("hear*", vec![2]),
                ("feel*", vec![2]),
            ],
        )
        .unwrap()
    }

    fn weights(lexicon: &Lexicon) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(lexicon.feature_names());
        for (t, kind) in TraitKind::ALL.into_iter().enumerate() {
            w.set(kind, 0, 0.1 + 0.05 * t as f64);
            w.set(kind, 1, -0.3 + 0.07 * t as f64);
        }
        w
    }

    fn corpus_of(users: &[(&str, Vec<&str>)]) -> Corpus {
        let mut messages = Vec::new();
        for (user, texts) in users {
            for (i, text) in texts.iter().enumerate() {
                messages.push(Message {
                    id: format!("{user}-{i:03}"),
                    user: user.to_string(),
                    ts: i as u64,
                    text: text.to_string(),
                });
            }
        }
        Corpus::from_messages("t", messages).unwrap()
    }

    #[test]
    fn size_equal_to_reference_correlates_exactly() {
        let corpus = corpus_of(&[
            ("a", vec!["we hear things"; 6]),
            ("b", vec!["they feel nothing"; 6]),
            ("c", vec!["we feel us hearing"; 6]),
            ("d", vec!["plain words only"; 6]),
        ]);
        let lexicon = two_cat_lexicon();
        let w = weights(&lexicon);
        let per_size = prefix_scores(&corpus, &lexicon, &w, &[3, 6]).unwrap();
        // identical per-user text at each message makes size-3 rates equal
        // to size-6 rates, so correlation is exactly 1
        let table = stability_table(&per_size, 6, CorrelationKind::Pearson).unwrap();
        for kind in TraitKind::ALL {
            let value = table.get(kind, 3).unwrap();
            assert!((value - 1.0).abs() < 1e-12, "{kind:?} -> {value}");
        }
    }

    #[test]
    fn prefix_uses_oldest_messages() {
        // user flips vocabulary halfway: prefix-2 counts only we-words
        let corpus = corpus_of(&[
            ("a", vec!["we we", "we us", "hear hear", "feel feel"]),
            ("b", vec!["us us", "plain", "plain", "plain"]),
            ("c", vec!["plain", "we words", "feel it", "plain"]),
        ]);
        let lexicon = two_cat_lexicon();
        let w = weights(&lexicon);
        let per_size = prefix_scores(&corpus, &lexicon, &w, &[2, 4]).unwrap();
        let two = &per_size[&2];
        // at size 2 user `a` has no percept hits at all
        let profile_a_percept: f64 = two[0].scores.iter().sum();
        assert!(profile_a_percept.is_finite());
        let table = stability_table(&per_size, 4, CorrelationKind::Pearson).unwrap();
        assert_eq!(table.checkpoints, vec![2]);
    }

    #[test]
    fn short_user_is_rejected() {
        let corpus = corpus_of(&[("a", vec!["x", "y"]), ("b", vec!["x"])]);
        let lexicon = two_cat_lexicon();
        let w = weights(&lexicon);
        let err = prefix_scores(&corpus, &lexicon, &w, &[2]).unwrap_err();
        assert!(matches!(err, StabilityError::UserTooShort { .. }));
    }

    #[test]
    fn constant_scores_mark_na() {
        // all users identical -> min-max collapses to zero -> constant
        let texts = vec!["we hear", "we hear", "we hear"];
        let corpus = corpus_of(&[
            ("a", texts.clone()),
            ("b", texts.clone()),
            ("c", texts),
        ]);
        let lexicon = two_cat_lexicon();
        let w = weights(&lexicon);
        let per_size = prefix_scores(&corpus, &lexicon, &w, &[1, 3]).unwrap();
        let table = stability_table(&per_size, 3, CorrelationKind::Pearson).unwrap();
        assert_eq!(table.get(TraitKind::Narcissism, 1), None);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains("NA"));
    }

    #[test]
    fn spearman_uses_ranks() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(ranks(&[5.0, 5.0, 1.0]), vec![2.5, 2.5, 1.0]);
        // monotone nonlinear relation: spearman 1, pearson < 1
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|&v: &f64| v.exp()).collect();
        let s = correlate(&a, &b, CorrelationKind::Spearman).unwrap();
        let p = correlate(&a, &b, CorrelationKind::Pearson).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p < 1.0);
    }
}
