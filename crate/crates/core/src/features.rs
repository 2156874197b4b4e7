//! Per-user feature rates and the doubly normalized feature matrix.
//!
//! Raw category counts are first divided by the user's total word count
//! (rate normalization), then each feature's rates are min-max rescaled to
//! [0, 1] across the user population:
//!
//! ```text
//! norm(x) = (x - min_x) / (max_x - min_x)
//! ```
//!
//! Min-max parameters are population-relative: adding an extreme user moves
//! everyone else's normalized values. Tests therefore pin ordering, not
//! absolute values, under population changes.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::lexicon::{count_features, FeatureCounts, Lexicon};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no user profiles supplied")]
    EmptyProfiles,
    #[error("no values supplied")]
    EmptyValues,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate user id {id:?}")]
    DuplicateUser { id: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw per-user counts: one counter per lexicon feature plus word totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub counts: Vec<u64>,
    pub word_count: u64,
    pub message_count: u64,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>, counts: FeatureCounts) -> UserProfile {
        UserProfile {
            user_id: user_id.into(),
            counts: counts.counts,
            word_count: counts.word_count,
            message_count: counts.message_count,
        }
    }

    /// Counts divided by the user's total word count. A user with no words
    /// rates zero everywhere rather than failing, so downstream reports
    /// never abort on empty accounts.
    pub fn rates(&self) -> Vec<f64> {
        if self.word_count == 0 {
            return vec![0.0; self.counts.len()];
        }
        let nw = self.word_count as f64;
        self.counts.iter().map(|&c| c as f64 / nw).collect()
    }
}

/// Count features for every user of a corpus, in sorted user-id order.
pub fn profiles(lexicon: &Lexicon, corpus: &Corpus) -> Vec<UserProfile> {
    let users: Vec<(&String, &Vec<crate::corpus::Message>)> = corpus.users().collect();
    users
        .par_iter()
        .map(|(user_id, messages)| {
            let texts: Vec<&str> = messages.iter().map(|m| m.text.as_str()).collect();
            UserProfile::new(user_id.as_str(), count_features(lexicon, &texts))
        })
        .collect()
}

/// Min-max rescale one feature's per-user values to [0, 1].
///
/// Returns the rescaled values together with the observed `(min, max)`.
/// A constant feature maps to all zeros: it carries no between-user signal,
/// and zero contributes nothing to the weighted trait sums.
pub fn minmax(values: &[f64]) -> Result<(Vec<f64>, (f64, f64)), FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyValues);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled = if max > min {
        values.iter().map(|&v| (v - min) / (max - min)).collect()
    } else {
        vec![0.0; values.len()]
    };
    Ok((scaled, (min, max)))
}

/// Users x features matrix of normalized values in [0, 1], with the
/// normalization parameters retained for scoring held-out users.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub user_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major, `user_ids.len()` rows by `feature_names.len()` columns.
    pub values: Vec<Vec<f64>>,
    /// Per-feature observed `(min, max)` of the underlying rates.
    pub params: Vec<(f64, f64)>,
}

impl FeatureMatrix {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn user_count(&self) -> usize {
        self.user_ids.len()
    }

    pub fn row_of(&self, user_id: &str) -> Option<&[f64]> {
        self.user_ids
            .iter()
            .position(|u| u == user_id)
            .map(|i| self.values[i].as_slice())
    }

    /// Write `user,<feature names...>` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FeatureError> {
        write!(out, "user")?;
        for name in &self.feature_names {
            write!(out, ",{}", csv_field(name))?;
        }
        writeln!(out)?;
        for (user, row) in self.user_ids.iter().zip(&self.values) {
            write!(out, "{}", csv_field(user))?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Build the normalized matrix from raw profiles. Rows come out in sorted
/// user-id order regardless of input order; all profiles must share the
/// lexicon's feature dimension.
pub fn build_matrix(
    profiles: &[UserProfile],
    feature_names: &[String],
) -> Result<FeatureMatrix, FeatureError> {
    if profiles.is_empty() {
        return Err(FeatureError::EmptyProfiles);
    }
    let f = feature_names.len();
    for p in profiles {
        if p.counts.len() != f {
            return Err(FeatureError::DimensionMismatch {
                expected: f,
                got: p.counts.len(),
            });
        }
    }
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| profiles[a].user_id.cmp(&profiles[b].user_id));
    let mut seen = BTreeSet::new();
    for &i in &order {
        if !seen.insert(&profiles[i].user_id) {
            return Err(FeatureError::DuplicateUser {
                id: profiles[i].user_id.clone(),
            });
        }
    }

    let rates: Vec<Vec<f64>> = order.iter().map(|&i| profiles[i].rates()).collect();
    let mut values = vec![vec![0.0; f]; rates.len()];
    let mut params = Vec::with_capacity(f);
    for j in 0..f {
        let column: Vec<f64> = rates.iter().map(|r| r[j]).collect();
        let (scaled, p) = minmax(&column)?;
        for (u, v) in scaled.into_iter().enumerate() {
            values[u][j] = v;
        }
        params.push(p);
    }

    Ok(FeatureMatrix {
        user_ids: order
            .iter()
            .map(|&i| profiles[i].user_id.clone())
            .collect(),
        feature_names: feature_names.to_vec(),
        values,
        params,
    })
}

/// Score a held-out user against frozen normalization parameters. Rates
/// outside the recorded range clamp into [0, 1]; constant features map to 0.
pub fn apply_params(
    profile: &UserProfile,
    params: &[(f64, f64)],
) -> Result<Vec<f64>, FeatureError> {
    if profile.counts.len() != params.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: params.len(),
            got: profile.counts.len(),
        });
    }
    let rates = profile.rates();
    Ok(rates
        .iter()
        .zip(params)
        .map(|(&rate, &(min, max))| {
            if max > min {
                ((rate - min) / (max - min)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, counts: Vec<u64>, nw: u64) -> UserProfile {
        UserProfile {
            user_id: id.to_string(),
            counts,
            word_count: nw,
            message_count: 1,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn rates_divide_by_word_count() {
        let p = profile("u", vec![2, 1], 5);
        assert_eq!(p.rates(), vec![0.4, 0.2]);
    }

    #[test]
    fn rates_zero_counts() {
        let p = profile("u", vec![0, 0], 5);
        assert_eq!(p.rates(), vec![0.0, 0.0]);
    }

    #[test]
    fn rates_zero_words() {
        let p = profile("u", vec![3, 1], 0);
        assert_eq!(p.rates(), vec![0.0, 0.0]);
    }

    #[test]
    fn minmax_endpoints_and_midpoint() {
        let (scaled, (min, max)) = minmax(&[1.0, 3.0, 5.0]).unwrap();
        assert_eq!(scaled, vec![0.0, 0.5, 1.0]);
        assert_eq!((min, max), (1.0, 5.0));
    }

    #[test]
    fn minmax_constant_maps_to_zero() {
        let (scaled, (min, max)) = minmax(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(scaled, vec![0.0, 0.0, 0.0]);
        assert_eq!((min, max), (7.0, 7.0));
    }

    #[test]
    fn minmax_empty_errors() {
        assert!(minmax(&[]).is_err());
    }

    #[test]
    fn build_matrix_normalizes_per_column() {
        let profiles = vec![
            profile("a", vec![4, 2], 10),
            profile("b", vec![0, 2], 10),
        ];
        let m = build_matrix(&profiles, &names(2)).unwrap();
        assert_eq!(m.values, vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(m.params[0], (0.0, 0.4));
    }

    #[test]
    fn build_matrix_single_user_is_all_zero() {
        let m = build_matrix(&[profile("a", vec![4, 2], 10)], &names(2)).unwrap();
        assert_eq!(m.values, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn build_matrix_scale_invariance() {
        let base = vec![
            profile("a", vec![4, 2], 10),
            profile("b", vec![1, 2], 10),
        ];
        let doubled = vec![
            profile("a", vec![8, 4], 20),
            profile("b", vec![1, 2], 10),
        ];
        let m1 = build_matrix(&base, &names(2)).unwrap();
        let m2 = build_matrix(&doubled, &names(2)).unwrap();
        assert_eq!(m1.values, m2.values);
    }

    #[test]
    fn build_matrix_sorts_users() {
        let profiles = vec![
            profile("zeta", vec![1], 1),
            profile("alpha", vec![0], 1),
        ];
        let m = build_matrix(&profiles, &names(1)).unwrap();
        assert_eq!(m.user_ids, vec!["alpha", "zeta"]);
        assert_eq!(m.values, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn build_matrix_rejects_duplicates() {
        let profiles = vec![profile("a", vec![1], 1), profile("a", vec![2], 2)];
        assert!(matches!(
            build_matrix(&profiles, &names(1)),
            Err(FeatureError::DuplicateUser { .. })
        ));
    }

    #[test]
    fn build_matrix_rejects_empty() {
        assert!(matches!(
            build_matrix(&[], &names(1)),
            Err(FeatureError::EmptyProfiles)
        ));
    }

    #[test]
    fn apply_params_endpoint_and_clamping() {
        let params = vec![(0.1, 0.5)];
        let at_max = profile("u", vec![5], 10); // rate 0.5
        assert_eq!(apply_params(&at_max, &params).unwrap(), vec![1.0]);
        let above = profile("u", vec![9], 10); // rate 0.9
        assert_eq!(apply_params(&above, &params).unwrap(), vec![1.0]);
        let below = profile("u", vec![0], 10); // rate 0.0
        assert_eq!(apply_params(&below, &params).unwrap(), vec![0.0]);
    }

    #[test]
    fn apply_params_constant_feature_is_zero() {
        let params = vec![(0.3, 0.3)];
        let p = profile("u", vec![3], 10);
        assert_eq!(apply_params(&p, &params).unwrap(), vec![0.0]);
    }

    #[test]
    fn apply_params_dimension_mismatch() {
        let p = profile("u", vec![1, 2], 10);
        assert!(matches!(
            apply_params(&p, &[(0.0, 1.0)]),
            Err(FeatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_output_shape() {
        let m = build_matrix(
            &[profile("a", vec![4, 2], 10), profile("b", vec![0, 0], 10)],
            &names(2),
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "user,f0,f1");
        assert!(lines[1].starts_with("a,1"));
    }
}
