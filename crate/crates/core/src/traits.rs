//! Trait scores, boxplot outlier partitions, and harm-ratio tables.
//!
//! A user's score for trait i is the correlation-weighted sum of their
//! normalized features:
//!
//! ```text
//! P[i, u] = sum_f w[i, f] * m[u, f]
//! ```
//!
//! Per trait, the population splits into lower outliers, in-box users, and
//! upper outliers by Tukey fences at 1.5 IQR, and each group's messages are
//! cross-tabulated into safe (levels 0-3) and unsafe (levels 5-7) shares.
//! Scores measure behavioral similarity to other users' writing styles,
//! nothing more; they are not psychological assessments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::corpus::{Corpus, RiskLabel};
use crate::features::{csv_field, FeatureMatrix};

#[derive(Debug, Error)]
pub enum TraitError {
    #[error("line {line}: malformed weights row: {reason}")]
    MalformedWeights { line: usize, reason: String },
    #[error("line {line}: unknown feature name {name:?}")]
    UnknownFeature { line: usize, name: String },
    #[error("line {line}: weight {value} for {name:?} outside [-1, 1]")]
    WeightOutOfRange {
        line: usize,
        name: String,
        value: f64,
    },
    #[error("weights header is missing trait column {name:?}")]
    MissingTraitColumn { name: String },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no values supplied")]
    EmptyValues,
}

/// The eight scored traits: the Dark Triad plus the Big Five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraitKind {
    Narcissism,
    Machiavellianism,
    Psychopathy,
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

pub const TRAIT_COUNT: usize = 8;

impl TraitKind {
    pub const ALL: [TraitKind; TRAIT_COUNT] = [
        TraitKind::Narcissism,
        TraitKind::Machiavellianism,
        TraitKind::Psychopathy,
        TraitKind::Openness,
        TraitKind::Conscientiousness,
        TraitKind::Extraversion,
        TraitKind::Agreeableness,
        TraitKind::Neuroticism,
    ];

    /// Short column label (Na, Ma, Ps, Op, Co, Ex, Ag, Ne).
    pub fn abbrev(self) -> &'static str {
        match self {
            TraitKind::Narcissism => "Na",
            TraitKind::Machiavellianism => "Ma",
            TraitKind::Psychopathy => "Ps",
            TraitKind::Openness => "Op",
            TraitKind::Conscientiousness => "Co",
            TraitKind::Extraversion => "Ex",
            TraitKind::Agreeableness => "Ag",
            TraitKind::Neuroticism => "Ne",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_dark_triad(self) -> bool {
        matches!(
            self,
            TraitKind::Narcissism | TraitKind::Machiavellianism | TraitKind::Psychopathy
        )
    }
}

/// Correlation weights, 8 traits by F features, each entry in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub feature_names: Vec<String>,
    /// `rows[f][t]` = weight of feature f for trait t.
    rows: Vec<[f64; TRAIT_COUNT]>,
}

impl WeightMatrix {
    /// All-zero weights over the given features.
    pub fn zeros(feature_names: Vec<String>) -> WeightMatrix {
        let rows = vec![[0.0; TRAIT_COUNT]; feature_names.len()];
        WeightMatrix {
            feature_names,
            rows,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn get(&self, trait_kind: TraitKind, feature: usize) -> f64 {
        self.rows[feature][trait_kind.index()]
    }

    pub fn set(&mut self, trait_kind: TraitKind, feature: usize, value: f64) {
        self.rows[feature][trait_kind.index()] = value;
    }
}

/// Parse the weights CSV (`feature,Na,Ma,Ps,Op,Co,Ex,Ag,Ne`), aligning rows
/// to the lexicon's feature order. Features absent from the file weigh zero;
/// unknown feature names are errors. `#` comment lines are skipped.
pub fn load_weights(content: &str, feature_names: &[String]) -> Result<WeightMatrix, TraitError> {
    let index_of: BTreeMap<&str, usize> = feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut weights = WeightMatrix::zeros(feature_names.to_vec());

    let mut lines = content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (header_line, header) = lines.next().ok_or(TraitError::MalformedWeights {
        line: 1,
        reason: "empty file".to_string(),
    })?;
    let columns: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    if columns.first() != Some(&"feature") {
        return Err(TraitError::MalformedWeights {
            line: header_line + 1,
            reason: "first column must be `feature`".to_string(),
        });
    }
    let mut trait_cols = [usize::MAX; TRAIT_COUNT];
    for kind in TraitKind::ALL {
        match columns.iter().position(|c| *c == kind.abbrev()) {
            Some(pos) => trait_cols[kind.index()] = pos,
            None => {
                return Err(TraitError::MissingTraitColumn {
                    name: kind.abbrev().to_string(),
                })
            }
        }
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        let name = fields
            .first()
            .copied()
            .unwrap_or("")
            .to_lowercase();
        if name.is_empty() {
            return Err(TraitError::MalformedWeights {
                line: line_no,
                reason: "missing feature name".to_string(),
            });
        }
        let feature = *index_of
            .get(name.as_str())
            .ok_or_else(|| TraitError::UnknownFeature {
                line: line_no,
                name: name.clone(),
            })?;
        for kind in TraitKind::ALL {
            let col = trait_cols[kind.index()];
            let value: f64 = fields
                .get(col)
                .copied()
                .unwrap_or("")
                .parse()
                .map_err(|_| TraitError::MalformedWeights {
                    line: line_no,
                    reason: format!("column {} is not a number", kind.abbrev()),
                })?;
            if !(-1.0..=1.0).contains(&value) {
                return Err(TraitError::WeightOutOfRange {
                    line: line_no,
                    name: name.clone(),
                    value,
                });
            }
            weights.set(kind, feature, value);
        }
    }
    Ok(weights)
}

/// One user's eight trait scores, ordered per [`TraitKind::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraitScores {
    pub user_id: String,
    pub scores: [f64; TRAIT_COUNT],
}

impl TraitScores {
    pub fn get(&self, kind: TraitKind) -> f64 {
        self.scores[kind.index()]
    }
}

/// Weighted trait sums for every matrix row.
pub fn score_traits(
    matrix: &FeatureMatrix,
    weights: &WeightMatrix,
) -> Result<Vec<TraitScores>, TraitError> {
    if matrix.feature_count() != weights.feature_count() {
        return Err(TraitError::DimensionMismatch {
            expected: weights.feature_count(),
            got: matrix.feature_count(),
        });
    }
    Ok(matrix
        .user_ids
        .iter()
        .zip(&matrix.values)
        .map(|(user, row)| {
            let mut scores = [0.0; TRAIT_COUNT];
            for kind in TraitKind::ALL {
                let mut sum = 0.0;
                for (f, &value) in row.iter().enumerate() {
                    sum += weights.get(kind, f) * value;
                }
                scores[kind.index()] = sum;
            }
            TraitScores {
                user_id: user.clone(),
                scores,
            }
        })
        .collect())
}

/// Quartiles and Tukey fences for one trait's score distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoxplotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

/// Linear-interpolation quantile over sorted data: rank `h = (n-1) q`,
/// interpolate between the flanking order statistics.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Boxplot statistics with interpolated quartiles and 1.5 IQR fences.
pub fn boxplot(values: &[f64]) -> Result<BoxplotStats, TraitError> {
    if values.is_empty() {
        return Err(TraitError::EmptyValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = interpolated_quantile(&sorted, 0.25);
    let median = interpolated_quantile(&sorted, 0.5);
    let q3 = interpolated_quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(BoxplotStats {
        q1,
        median,
        q3,
        iqr,
        lower_fence: q1 - 1.5 * iqr,
        upper_fence: q3 + 1.5 * iqr,
    })
}

/// Position of a user relative to one trait's boxplot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutlierGroup {
    Upper,
    Box,
    Lower,
}

impl OutlierGroup {
    pub const ALL: [OutlierGroup; 3] = [OutlierGroup::Upper, OutlierGroup::Box, OutlierGroup::Lower];

    pub fn label(self) -> &'static str {
        match self {
            OutlierGroup::Upper => "Upper outliers",
            OutlierGroup::Box => "Boxplot",
            OutlierGroup::Lower => "Lower outliers",
        }
    }
}

/// For each trait, the disjoint {lower, box, upper} user sets.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierPartition {
    pub stats: [BoxplotStats; TRAIT_COUNT],
    groups: [[Vec<String>; 3]; TRAIT_COUNT],
}

impl OutlierPartition {
    pub fn members(&self, kind: TraitKind, group: OutlierGroup) -> &[String] {
        let g = match group {
            OutlierGroup::Upper => 0,
            OutlierGroup::Box => 1,
            OutlierGroup::Lower => 2,
        };
        &self.groups[kind.index()][g]
    }

    pub fn group_of(&self, kind: TraitKind, user_id: &str) -> Option<OutlierGroup> {
        OutlierGroup::ALL.into_iter().find(|&group| {
            self.members(kind, group)
                .binary_search_by(|u| u.as_str().cmp(user_id))
                .is_ok()
        })
    }

    pub fn is_upper(&self, kind: TraitKind, user_id: &str) -> bool {
        self.group_of(kind, user_id) == Some(OutlierGroup::Upper)
    }

    /// Users above the upper fence of at least one Dark Triad trait.
    pub fn dark_triad_upper(&self) -> Vec<String> {
        let mut out: Vec<String> = TraitKind::ALL
            .into_iter()
            .filter(|k| k.is_dark_triad())
            .flat_map(|k| self.members(k, OutlierGroup::Upper).to_vec())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Split users into below-fence / in-box / above-fence sets per trait.
pub fn partition_outliers(scores: &[TraitScores]) -> Result<OutlierPartition, TraitError> {
    if scores.is_empty() {
        return Err(TraitError::EmptyValues);
    }
    let mut stats = [BoxplotStats {
        q1: 0.0,
        median: 0.0,
        q3: 0.0,
        iqr: 0.0,
        lower_fence: 0.0,
        upper_fence: 0.0,
    }; TRAIT_COUNT];
    let mut groups: [[Vec<String>; 3]; TRAIT_COUNT] = Default::default();
    for kind in TraitKind::ALL {
        let values: Vec<f64> = scores.iter().map(|s| s.get(kind)).collect();
        let bp = boxplot(&values)?;
        stats[kind.index()] = bp;
        for s in scores {
            let v = s.get(kind);
            let slot = if v > bp.upper_fence {
                0
            } else if v < bp.lower_fence {
                2
            } else {
                1
            };
            groups[kind.index()][slot].push(s.user_id.clone());
        }
        for slot in &mut groups[kind.index()] {
            slot.sort();
        }
    }
    Ok(OutlierPartition { stats, groups })
}

/// Safe/unsafe message shares for one outlier group. `None` when the group
/// is empty or has no ratable messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRatio {
    /// Percentage of ratable messages at levels 0-3.
    pub safe_pct: f64,
    /// Percentage of ratable messages at levels 5-7.
    pub unsafe_pct: f64,
    /// Number of ratable (non level 4) messages in the group.
    pub analyzable: usize,
}

/// The safe/harmful cross-tabulation: per trait, the three outlier groups'
/// message shares.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmRatioTable {
    pub cells: [[Option<GroupRatio>; 3]; TRAIT_COUNT],
    pub warnings: Vec<String>,
}

/// Cross-tabulate outlier groups against message risk labels.
///
/// A message's level is the maximum across the five harm types; level-4
/// (unratable) messages are excluded from the denominator. Messages without
/// a label are skipped and reported in `warnings`.
pub fn harm_ratio_table(
    partition: &OutlierPartition,
    labels: &BTreeMap<String, RiskLabel>,
    corpus: &Corpus,
) -> HarmRatioTable {
    // Pre-compute per-user safe/unsafe counts once, then aggregate per group.
    let mut per_user: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut unlabeled = 0usize;
    for (user, messages) in corpus.users() {
        let mut safe = 0usize;
        let mut risky = 0usize;
        for m in messages {
            match labels.get(&m.id) {
                Some(label) => {
                    let level = label.max_level();
                    if level <= 3 {
                        safe += 1;
                    } else if level >= 5 {
                        risky += 1;
                    }
                }
                None => unlabeled += 1,
            }
        }
        per_user.insert(user.as_str(), (safe, risky));
    }

    let mut warnings = Vec::new();
    if unlabeled > 0 {
        warnings.push(format!("{unlabeled} message(s) had no label and were skipped"));
    }

    let mut cells: [[Option<GroupRatio>; 3]; TRAIT_COUNT] = Default::default();
    for kind in TraitKind::ALL {
        for (g, group) in OutlierGroup::ALL.into_iter().enumerate() {
            let mut safe = 0usize;
            let mut risky = 0usize;
            let mut member_count = 0usize;
            for user in partition.members(kind, group) {
                member_count += 1;
                if let Some(&(s, r)) = per_user.get(user.as_str()) {
                    safe += s;
                    risky += r;
                }
            }
            let analyzable = safe + risky;
            cells[kind.index()][g] = if member_count == 0 || analyzable == 0 {
                None
            } else {
                Some(GroupRatio {
                    safe_pct: 100.0 * safe as f64 / analyzable as f64,
                    unsafe_pct: 100.0 * risky as f64 / analyzable as f64,
                    analyzable,
                })
            };
        }
    }
    HarmRatioTable { cells, warnings }
}

impl HarmRatioTable {
    pub fn get(&self, kind: TraitKind, group: OutlierGroup) -> Option<GroupRatio> {
        let g = OutlierGroup::ALL.iter().position(|&x| x == group).unwrap();
        self.cells[kind.index()][g]
    }

    /// CSV rows `trait,group,safe_pct,unsafe_pct,analyzable`; empty groups
    /// render as `None`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trait,group,safe_pct,unsafe_pct,analyzable")?;
        for kind in TraitKind::ALL {
            for group in OutlierGroup::ALL {
                match self.get(kind, group) {
                    Some(r) => writeln!(
                        out,
                        "{},{},{:.1},{:.1},{}",
                        kind.abbrev(),
                        group.label(),
                        r.safe_pct,
                        r.unsafe_pct,
                        r.analyzable
                    )?,
                    None => writeln!(
                        out,
                        "{},{},None,None,0",
                        kind.abbrev(),
                        group.label()
                    )?,
                }
            }
        }
        Ok(())
    }

    /// Aligned markdown table in the published layout: one row per
    /// trait/group with `0 to 3` and `5 to 7` percentage columns.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| Personality | Box distribution | 0 to 3 | 5 to 7 |\n");
        s.push_str("|---|---|---|---|\n");
        for kind in TraitKind::ALL {
            for group in OutlierGroup::ALL {
                let (safe, risky) = match self.get(kind, group) {
                    Some(r) => (format!("{:.1}%", r.safe_pct), format!("{:.1}%", r.unsafe_pct)),
                    None => ("None".to_string(), "None".to_string()),
                };
                let name = if group == OutlierGroup::Box {
                    kind.abbrev()
                } else {
                    ""
                };
                let _ = writeln!(s, "| {} | {} | {} | {} |", name, group.label(), safe, risky);
            }
        }
        s.push_str(
            "\nTrait groups are behavioral similarity scores derived from writing \
             style, not psychological assessments.\n",
        );
        s
    }
}

/// Write per-user scores as `user,Na,Ma,Ps,Op,Co,Ex,Ag,Ne` CSV.
pub fn write_scores_csv<W: Write>(scores: &[TraitScores], mut out: W) -> std::io::Result<()> {
    write!(out, "user")?;
    for kind in TraitKind::ALL {
        write!(out, ",{}", kind.abbrev())?;
    }
    writeln!(out)?;
    for s in scores {
        write!(out, "{}", csv_field(&s.user_id))?;
        for v in s.scores {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, HarmType, Message};

    fn matrix(user_rows: Vec<(&str, Vec<f64>)>, names: Vec<&str>) -> FeatureMatrix {
        FeatureMatrix {
            user_ids: user_rows.iter().map(|(u, _)| u.to_string()).collect(),
            feature_names: names.iter().map(|n| n.to_string()).collect(),
            params: vec![(0.0, 1.0); names.len()],
            values: user_rows.into_iter().map(|(_, r)| r).collect(),
        }
    }

    fn table1_weights(names: &[String]) -> WeightMatrix {
        let csv = "\
feature,Na,Ma,Ps,Op,Co,Ex,Ag,Ne
1st-person-plural,0.036,-0.070,-0.071,-0.006,0.052,0.063,0.068,0.044
perceptual-process,-0.052,-0.040,-0.092,-0.015,-0.020,-0.031,0.070,-0.089
";
        load_weights(csv, names).unwrap()
    }

    #[test]
    fn load_weights_parses_published_rows() {
        let names = vec![
            "1st-person-plural".to_string(),
            "perceptual-process".to_string(),
            "other".to_string(),
        ];
        let w = table1_weights(&names);
        assert_eq!(w.get(TraitKind::Agreeableness, 0), 0.068);
        assert_eq!(w.get(TraitKind::Psychopathy, 0), -0.071);
        assert_eq!(w.get(TraitKind::Narcissism, 0), 0.036);
        assert_eq!(w.get(TraitKind::Neuroticism, 1), -0.089);
        // unlisted feature weighs zero
        assert_eq!(w.get(TraitKind::Narcissism, 2), 0.0);
    }

    #[test]
    fn load_weights_rejects_out_of_range() {
        let names = vec!["f".to_string()];
        let err = load_weights("feature,Na,Ma,Ps,Op,Co,Ex,Ag,Ne\nf,1.5,0,0,0,0,0,0,0\n", &names)
            .unwrap_err();
        assert!(matches!(err, TraitError::WeightOutOfRange { .. }));
    }

    #[test]
    fn load_weights_rejects_unknown_feature() {
        let names = vec!["f".to_string()];
        let err = load_weights("feature,Na,Ma,Ps,Op,Co,Ex,Ag,Ne\ng,0,0,0,0,0,0,0,0\n", &names)
            .unwrap_err();
        assert!(matches!(err, TraitError::UnknownFeature { .. }));
    }

    #[test]
    fn load_weights_requires_all_trait_columns() {
        let err = load_weights("feature,Na,Ma\nf,0,0\n", &["f".to_string()]).unwrap_err();
        assert!(matches!(err, TraitError::MissingTraitColumn { .. }));
    }

    #[test]
    fn score_single_active_feature_reads_off_weights() {
        let names = vec![
            "1st-person-plural".to_string(),
            "perceptual-process".to_string(),
        ];
        let w = table1_weights(&names);
        let m = matrix(
            vec![("u", vec![1.0, 0.0])],
            vec!["1st-person-plural", "perceptual-process"],
        );
        let scores = score_traits(&m, &w).unwrap();
        let s = &scores[0];
        assert!((s.get(TraitKind::Agreeableness) - 0.068).abs() < 1e-15);
        assert!((s.get(TraitKind::Psychopathy) + 0.071).abs() < 1e-15);
        assert!((s.get(TraitKind::Narcissism) - 0.036).abs() < 1e-15);
    }

    #[test]
    fn score_zero_row_is_zero() {
        let names = vec!["a".to_string(), "b".to_string()];
        let w = WeightMatrix::zeros(names.clone());
        let m = matrix(vec![("u", vec![0.0, 0.0])], vec!["a", "b"]);
        let scores = score_traits(&m, &w).unwrap();
        assert_eq!(scores[0].scores, [0.0; TRAIT_COUNT]);
    }

    #[test]
    fn score_dimension_mismatch() {
        let w = WeightMatrix::zeros(vec!["a".to_string()]);
        let m = matrix(vec![("u", vec![0.0, 0.0])], vec!["a", "b"]);
        assert!(matches!(
            score_traits(&m, &w),
            Err(TraitError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn boxplot_interpolated_quartiles() {
        let values: Vec<f64> = (1..=9).map(|v| v as f64).chain([100.0]).collect();
        let bp = boxplot(&values).unwrap();
        assert!((bp.q1 - 3.25).abs() < 1e-12);
        assert!((bp.q3 - 7.75).abs() < 1e-12);
        assert!((bp.iqr - 4.5).abs() < 1e-12);
        assert!(100.0 > bp.upper_fence);
        assert!(values.iter().filter(|&&v| v > bp.upper_fence).count() == 1);
    }

    #[test]
    fn boxplot_constant_values() {
        let bp = boxplot(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(bp.iqr, 0.0);
        assert_eq!(bp.lower_fence, 4.0);
        assert_eq!(bp.upper_fence, 4.0);
    }

    #[test]
    fn boxplot_empty_errors() {
        assert!(boxplot(&[]).is_err());
    }

    fn scores_from(values: &[f64]) -> Vec<TraitScores> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| TraitScores {
                user_id: format!("u{i:02}"),
                scores: [v; TRAIT_COUNT],
            })
            .collect()
    }

    #[test]
    fn partition_isolates_single_upper_outlier() {
        let values: Vec<f64> = (1..=9).map(|v| v as f64).chain([100.0]).collect();
        let p = partition_outliers(&scores_from(&values)).unwrap();
        for kind in TraitKind::ALL {
            assert_eq!(p.members(kind, OutlierGroup::Upper), ["u09".to_string()]);
            assert_eq!(p.members(kind, OutlierGroup::Lower).len(), 0);
            assert_eq!(p.members(kind, OutlierGroup::Box).len(), 9);
        }
    }

    #[test]
    fn partition_constant_scores_all_in_box() {
        let p = partition_outliers(&scores_from(&[2.0, 2.0, 2.0])).unwrap();
        for kind in TraitKind::ALL {
            assert_eq!(p.members(kind, OutlierGroup::Box).len(), 3);
        }
    }

    #[test]
    fn group_lookup() {
        let values: Vec<f64> = (1..=9).map(|v| v as f64).chain([100.0]).collect();
        let p = partition_outliers(&scores_from(&values)).unwrap();
        assert_eq!(
            p.group_of(TraitKind::Narcissism, "u09"),
            Some(OutlierGroup::Upper)
        );
        assert_eq!(
            p.group_of(TraitKind::Narcissism, "u00"),
            Some(OutlierGroup::Box)
        );
        assert!(p.is_upper(TraitKind::Psychopathy, "u09"));
        assert_eq!(p.dark_triad_upper(), vec!["u09".to_string()]);
    }

    #[test]
    fn harm_ratio_counts_levels_and_drops_level_4() {
        // One user in the (trivially computed) box group with message levels
        // [0, 1, 5, 4, 7]: level 4 drops from the denominator.
        let messages: Vec<Message> = (0..5)
            .map(|i| Message {
                id: format!("m{i}"),
                user: "u00".to_string(),
                ts: i,
                text: String::new(),
            })
            .collect();
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let mut labels = BTreeMap::new();
        for (i, level) in [0u8, 1, 5, 4, 7].iter().enumerate() {
            let mut label = RiskLabel::safe();
            label.set(HarmType::General, *level);
            labels.insert(format!("m{i}"), label);
        }
        let p = partition_outliers(&scores_from(&[1.0])).unwrap();
        let table = harm_ratio_table(&p, &labels, &corpus);
        let cell = table.get(TraitKind::Narcissism, OutlierGroup::Box).unwrap();
        assert_eq!(cell.analyzable, 4);
        assert!((cell.safe_pct - 50.0).abs() < 1e-12);
        assert!((cell.unsafe_pct - 50.0).abs() < 1e-12);
    }

    #[test]
    fn harm_ratio_all_safe_group() {
        let messages: Vec<Message> = (0..3)
            .map(|i| Message {
                id: format!("m{i}"),
                user: "u00".to_string(),
                ts: i,
                text: String::new(),
            })
            .collect();
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let labels: BTreeMap<String, RiskLabel> = (0..3)
            .map(|i| (format!("m{i}"), RiskLabel::safe()))
            .collect();
        let p = partition_outliers(&scores_from(&[1.0])).unwrap();
        let table = harm_ratio_table(&p, &labels, &corpus);
        let cell = table.get(TraitKind::Openness, OutlierGroup::Box).unwrap();
        assert_eq!(cell.safe_pct, 100.0);
        assert_eq!(cell.unsafe_pct, 0.0);
    }

    #[test]
    fn harm_ratio_empty_group_renders_none() {
        let messages = vec![Message {
            id: "m0".to_string(),
            user: "u00".to_string(),
            ts: 0,
            text: String::new(),
        }];
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let labels: BTreeMap<String, RiskLabel> =
            [("m0".to_string(), RiskLabel::safe())].into();
        let p = partition_outliers(&scores_from(&[1.0])).unwrap();
        let table = harm_ratio_table(&p, &labels, &corpus);
        assert!(table.get(TraitKind::Narcissism, OutlierGroup::Upper).is_none());
        let md = table.to_markdown();
        assert!(md.contains("| None | None |"));
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains("None,None"));
    }

    #[test]
    fn harm_ratio_warns_on_unlabeled() {
        let messages = vec![Message {
            id: "m0".to_string(),
            user: "u00".to_string(),
            ts: 0,
            text: String::new(),
        }];
        let corpus = Corpus::from_messages("t", messages).unwrap();
        let p = partition_outliers(&scores_from(&[1.0])).unwrap();
        let table = harm_ratio_table(&p, &BTreeMap::new(), &corpus);
        assert_eq!(table.warnings.len(), 1);
    }
}
