//! Polynomial harm regression: design expansion, five linear fitters,
//! metrics, zero-ablation contributions, and the percentile overlay.
//!
//! Targets live in the logit domain (see [`crate::harm`]); predictions can
//! be mapped back to [0, 1] with `expit`. Expanded columns are standardized
//! (constant column excluded) for conditioning; coefficients are stored in
//! standardized space with a raw-space view available.

mod solvers;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harm::HarmRanking;
use crate::traits::{OutlierPartition, TraitKind};

pub use solvers::FitOptions;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("polynomial degree {degree} outside 1..=3")]
    BadDegree { degree: usize },
    #[error("design has no rows")]
    EmptyDesign,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("non-finite value in design or targets")]
    NonFinite,
    #[error("singular system: unregularized fit on a rank-deficient design")]
    Singular,
    #[error("sgd requires an explicit seed")]
    MissingSeed,
    #[error("pearson correlation is undefined for constant input")]
    ConstantInput,
    #[error("ablation cohort is empty: no row has all base features > 0")]
    EmptyCohort,
    #[error("cannot split {users} users into {groups} groups")]
    GroupsExceedUsers { groups: usize, users: usize },
    #[error("ranking and partition cover different user sets")]
    UserSetMismatch,
    #[error("design was built with different normalization than the model")]
    StandardizationMismatch,
    #[error("unsupported model format version {version}")]
    BadModelVersion { version: u32 },
    #[error("malformed model file: {0}")]
    MalformedModel(String),
}

/// Monomial: sorted `(base feature, exponent)` pairs; empty = constant term.
pub type Term = Vec<(usize, u32)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    /// Every monomial of total degree <= degree (dimension C(F+d, d)).
    Full,
    /// Constant plus per-feature powers only (dimension 1 + F*d).
    Univariate,
}

/// Enumerate expansion terms in graded order: the constant term first, then
/// all terms of degree 1, then 2, then 3.
pub fn enumerate_terms(features: usize, degree: usize, mode: ExpansionMode) -> Vec<Term> {
    let mut terms: Vec<Term> = vec![Vec::new()];
    match mode {
        ExpansionMode::Univariate => {
            for d in 1..=degree {
                for f in 0..features {
                    terms.push(vec![(f, d as u32)]);
                }
            }
        }
        ExpansionMode::Full => {
            // Combinations with repetition of each size, lexicographic.
            for d in 1..=degree {
                let mut combo = vec![0usize; d];
                loop {
                    terms.push(compress(&combo));
                    // next multiset
                    let mut i = d;
                    loop {
                        if i == 0 {
                            break;
                        }
                        i -= 1;
                        if combo[i] + 1 < features {
                            combo[i] += 1;
                            for j in i + 1..d {
                                combo[j] = combo[i];
                            }
                            break;
                        }
                        if i == 0 {
                            combo.clear();
                            break;
                        }
                    }
                    if combo.is_empty() {
                        break;
                    }
                }
                if features == 0 {
                    break;
                }
            }
        }
    }
    terms
}

fn compress(combo: &[usize]) -> Term {
    let mut term: Term = Vec::new();
    for &f in combo {
        match term.last_mut() {
            Some((feat, exp)) if *feat == f => *exp += 1,
            _ => term.push((f, 1)),
        }
    }
    term
}

fn eval_term(term: &Term, row: &[f64]) -> f64 {
    term.iter()
        .map(|&(f, e)| row[f].powi(e as i32))
        .product()
}

/// A standardized polynomial design: base rows, expanded columns, and the
/// per-column `(mean, scale)` used to standardize them.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub base: Vec<Vec<f64>>,
    pub terms: Vec<Term>,
    pub degree: usize,
    pub mode: ExpansionMode,
    /// Column 0 (the constant) is pinned to `(0, 1)`; constant non-intercept
    /// columns get scale 1 and standardize to zero.
    pub standardization: Vec<(f64, f64)>,
    /// n x D standardized expansion.
    pub expanded: DMatrix<f64>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.expanded.nrows()
    }

    pub fn dim(&self) -> usize {
        self.expanded.ncols()
    }

    pub fn feature_count(&self) -> usize {
        self.base.first().map_or(0, |r| r.len())
    }
}

fn check_base(base: &[Vec<f64>], degree: usize) -> Result<usize, RegressError> {
    if !(1..=3).contains(&degree) {
        return Err(RegressError::BadDegree { degree });
    }
    let Some(first) = base.first() else {
        return Err(RegressError::EmptyDesign);
    };
    let f = first.len();
    for row in base {
        if row.len() != f {
            return Err(RegressError::DimensionMismatch {
                expected: f,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite);
        }
    }
    Ok(f)
}

fn raw_expansion(base: &[Vec<f64>], terms: &[Term]) -> DMatrix<f64> {
    DMatrix::from_fn(base.len(), terms.len(), |i, j| eval_term(&terms[j], &base[i]))
}

/// Expand a base matrix, standardizing columns from this data.
pub fn expand(base: &[Vec<f64>], degree: usize, mode: ExpansionMode) -> Result<Design, RegressError> {
    let f = check_base(base, degree)?;
    let terms = enumerate_terms(f, degree, mode);
    let mut expanded = raw_expansion(base, &terms);
    let n = expanded.nrows();
    let mut standardization = Vec::with_capacity(terms.len());
    standardization.push((0.0, 1.0));
    for j in 1..terms.len() {
        let mut mean = 0.0;
        for i in 0..n {
            mean += expanded[(i, j)];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let d = expanded[(i, j)] - mean;
            var += d * d;
        }
        let std = (var / n as f64).sqrt();
        let scale = if std > 0.0 { std } else { 1.0 };
        for i in 0..n {
            expanded[(i, j)] = (expanded[(i, j)] - mean) / scale;
        }
        standardization.push((mean, scale));
    }
    Ok(Design {
        base: base.to_vec(),
        terms,
        degree,
        mode,
        standardization,
        expanded,
    })
}

/// Expand held-out rows against frozen standardization parameters (for
/// evaluating a trained model on new data).
pub fn expand_with(
    base: &[Vec<f64>],
    degree: usize,
    mode: ExpansionMode,
    standardization: &[(f64, f64)],
) -> Result<Design, RegressError> {
    let f = check_base(base, degree)?;
    let terms = enumerate_terms(f, degree, mode);
    if terms.len() != standardization.len() {
        return Err(RegressError::DimensionMismatch {
            expected: standardization.len(),
            got: terms.len(),
        });
    }
    let mut expanded = raw_expansion(base, &terms);
    for j in 1..terms.len() {
        let (mean, scale) = standardization[j];
        for i in 0..expanded.nrows() {
            expanded[(i, j)] = (expanded[(i, j)] - mean) / scale;
        }
    }
    Ok(Design {
        base: base.to_vec(),
        terms,
        degree,
        mode,
        standardization: standardization.to_vec(),
        expanded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ridge,
    RidgeCv,
    BayesianRidge,
    Sgd,
    Huber,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ridge,
        Method::RidgeCv,
        Method::BayesianRidge,
        Method::Sgd,
        Method::Huber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ridge => "ridge",
            Method::RidgeCv => "ridge-cv",
            Method::BayesianRidge => "bayesian-ridge",
            Method::Sgd => "sgd",
            Method::Huber => "huber",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        match name {
            "ridge" => Some(Method::Ridge),
            "ridge-cv" | "ridgecv" => Some(Method::RidgeCv),
            "bayesian-ridge" | "bayes" => Some(Method::BayesianRidge),
            "sgd" => Some(Method::Sgd),
            "huber" => Some(Method::Huber),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Regularization strength actually used (cross-validated for ridge-cv,
    /// final precision ratio for bayesian-ridge).
    pub chosen_alpha: Option<f64>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted polynomial regressor. Coefficients apply to the standardized
/// expansion; [`RegressionModel::raw_coefficients`] converts to raw
/// monomial space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub version: u32,
    pub method: Method,
    pub degree: usize,
    pub mode: ExpansionMode,
    pub terms: Vec<Term>,
    pub standardization: Vec<(f64, f64)>,
    pub coefficients: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl RegressionModel {
    /// Expand new base rows with this model's degree, mode, and frozen
    /// standardization.
    pub fn expand_base(&self, base: &[Vec<f64>]) -> Result<Design, RegressError> {
        expand_with(base, self.degree, self.mode, &self.standardization)
    }

    /// Predict a single raw base row.
    pub fn predict_row(&self, base_row: &[f64]) -> f64 {
        let mut sum = self.coefficients[0];
        for j in 1..self.terms.len() {
            let (mean, scale) = self.standardization[j];
            let z = (eval_term(&self.terms[j], base_row) - mean) / scale;
            sum += self.coefficients[j] * z;
        }
        sum
    }

    /// Coefficients in raw monomial space (intercept first), obtained by
    /// unfolding the standardization.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let mut raw = vec![0.0; self.coefficients.len()];
        let mut intercept = self.coefficients[0];
        let unfolded = self.coefficients.iter().zip(&self.standardization);
        for (j, (&c, &(mean, scale))) in unfolded.enumerate().skip(1) {
            raw[j] = c / scale;
            intercept -= c * mean / scale;
        }
        raw[0] = intercept;
        raw
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<RegressionModel, RegressError> {
        let model: RegressionModel =
            serde_json::from_str(text).map_err(|e| RegressError::MalformedModel(e.to_string()))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(RegressError::BadModelVersion {
                version: model.version,
            });
        }
        if model.coefficients.len() != model.terms.len()
            || model.standardization.len() != model.terms.len()
        {
            return Err(RegressError::MalformedModel(
                "coefficient/term/standardization lengths disagree".to_string(),
            ));
        }
        Ok(model)
    }
}

/// Fit a regression model on a design and logit-domain targets.
pub fn fit(
    design: &Design,
    y: &[f64],
    method: Method,
    options: &FitOptions,
) -> Result<RegressionModel, RegressError> {
    if y.len() != design.rows() {
        return Err(RegressError::DimensionMismatch {
            expected: design.rows(),
            got: y.len(),
        });
    }
    if design.rows() < 2 {
        return Err(RegressError::TooFewRows {
            need: 2,
            got: design.rows(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let (coefficients, diagnostics) = match method {
        Method::Ridge => solvers::fit_ridge(design, y, options)?,
        Method::RidgeCv => solvers::fit_ridge_cv(design, y, options)?,
        Method::BayesianRidge => solvers::fit_bayesian_ridge(design, y, options)?,
        Method::Sgd => solvers::fit_sgd(design, y, options)?,
        Method::Huber => solvers::fit_huber(design, y, options)?,
    };
    Ok(RegressionModel {
        version: MODEL_FORMAT_VERSION,
        method,
        degree: design.degree,
        mode: design.mode,
        terms: design.terms.clone(),
        standardization: design.standardization.clone(),
        coefficients,
        diagnostics,
    })
}

/// Predict every design row (logit domain). The design must carry the same
/// standardization the model was trained with.
pub fn predict(model: &RegressionModel, design: &Design) -> Result<Vec<f64>, RegressError> {
    if design.dim() != model.coefficients.len() {
        return Err(RegressError::DimensionMismatch {
            expected: model.coefficients.len(),
            got: design.dim(),
        });
    }
    if design.standardization != model.standardization {
        return Err(RegressError::StandardizationMismatch);
    }
    let mut out = Vec::with_capacity(design.rows());
    for i in 0..design.rows() {
        let mut sum = 0.0;
        for j in 0..design.dim() {
            sum += design.expanded[(i, j)] * model.coefficients[j];
        }
        out.push(sum);
    }
    Ok(out)
}

/// Product-moment correlation of two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, RegressError> {
    if a.len() != b.len() {
        return Err(RegressError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(RegressError::TooFewRows {
            need: 2,
            got: a.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(RegressError::ConstantInput);
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Mean squared error between two equal-length vectors.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, RegressError> {
    if a.len() != b.len() {
        return Err(RegressError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(RegressError::TooFewRows { need: 1, got: 0 });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
}

/// Average per-unit feature contributions measured by zero-ablation over
/// the all-features-positive cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionReport {
    /// Mean contribution per base feature over the cohort.
    pub contributions: Vec<f64>,
    /// Per cohort row, per feature.
    pub per_user: Vec<Vec<f64>>,
    /// Design row indices forming the cohort.
    pub cohort_rows: Vec<usize>,
}

impl ContributionReport {
    pub fn cohort_size(&self) -> usize {
        self.cohort_rows.len()
    }
}

/// Measure each base feature's contribution to predicted harm: zero the
/// feature, re-expand (so interaction and power terms vanish with it),
/// re-predict, and divide the change by the feature's original value.
/// Only rows with every base feature strictly positive participate.
pub fn ablate(model: &RegressionModel, design: &Design) -> Result<ContributionReport, RegressError> {
    if design.dim() != model.coefficients.len() {
        return Err(RegressError::DimensionMismatch {
            expected: model.coefficients.len(),
            got: design.dim(),
        });
    }
    if design.standardization != model.standardization {
        return Err(RegressError::StandardizationMismatch);
    }
    let cohort_rows: Vec<usize> = (0..design.base.len())
        .filter(|&i| design.base[i].iter().all(|&v| v > 0.0))
        .collect();
    if cohort_rows.is_empty() {
        return Err(RegressError::EmptyCohort);
    }
    let features = design.feature_count();
    let mut per_user = Vec::with_capacity(cohort_rows.len());
    for &row in &cohort_rows {
        let base_row = &design.base[row];
        let original = model.predict_row(base_row);
        let mut contributions = Vec::with_capacity(features);
        let mut zeroed = base_row.clone();
        for f in 0..features {
            let saved = zeroed[f];
            zeroed[f] = 0.0;
            let ablated = model.predict_row(&zeroed);
            contributions.push((original - ablated) / saved);
            zeroed[f] = saved;
        }
        per_user.push(contributions);
    }
    let mut contributions = vec![0.0; features];
    for row in &per_user {
        for (acc, v) in contributions.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for acc in &mut contributions {
        *acc /= per_user.len() as f64;
    }
    Ok(ContributionReport {
        contributions,
        per_user,
        cohort_rows,
    })
}

/// Color class of a ranked user in the overlay charts. Psychopathy takes
/// precedence (covering Ps-and-Ma users), then Machiavellianism, then
/// Narcissism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankClass {
    Psychopathy,
    Machiavellianism,
    Narcissism,
    None,
}

/// Fraction of Dark-Triad upper outliers within each harm-ranking bucket,
/// plus the colored ranking itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileOverlay {
    pub bucket_sizes: Vec<usize>,
    /// Per bucket, the fraction of members with at least one upper-outlier
    /// Dark Triad trait; bucket 0 holds the highest-harm users.
    pub fractions: Vec<f64>,
    /// One class per ranked user, in ranking order.
    pub classes: Vec<RankClass>,
}

/// Split a harm ranking into contiguous buckets (remainder rows go to the
/// last bucket) and measure Dark-Triad upper-outlier density per bucket.
pub fn overlay(
    ranking: &HarmRanking,
    partition: &OutlierPartition,
    groups: usize,
) -> Result<PercentileOverlay, RegressError> {
    let n = ranking.len();
    if groups == 0 || groups > n {
        return Err(RegressError::GroupsExceedUsers { groups, users: n });
    }
    let ranked: BTreeSet<&str> = ranking.entries.iter().map(|e| e.user_id.as_str()).collect();
    let mut partition_users: BTreeSet<&str> = BTreeSet::new();
    for group in crate::traits::OutlierGroup::ALL {
        for user in partition.members(TraitKind::Narcissism, group) {
            partition_users.insert(user.as_str());
        }
    }
    if ranked != partition_users || ranked.len() != n {
        return Err(RegressError::UserSetMismatch);
    }

    let dark: BTreeSet<String> = partition.dark_triad_upper().into_iter().collect();
    let classes: Vec<RankClass> = ranking
        .entries
        .iter()
        .map(|e| {
            if partition.is_upper(TraitKind::Psychopathy, &e.user_id) {
                RankClass::Psychopathy
            } else if partition.is_upper(TraitKind::Machiavellianism, &e.user_id) {
                RankClass::Machiavellianism
            } else if partition.is_upper(TraitKind::Narcissism, &e.user_id) {
                RankClass::Narcissism
            } else {
                RankClass::None
            }
        })
        .collect();

    let base = n / groups;
    let mut bucket_sizes = vec![base; groups];
    bucket_sizes[groups - 1] = n - base * (groups - 1);
    let mut fractions = Vec::with_capacity(groups);
    let mut start = 0;
    for &size in &bucket_sizes {
        let members = &ranking.entries[start..start + size];
        let hits = members.iter().filter(|e| dark.contains(&e.user_id)).count();
        fractions.push(hits as f64 / size as f64);
        start += size;
    }
    Ok(PercentileOverlay {
        bucket_sizes,
        fractions,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harm::{rank_users, HarmScore};
    use crate::traits::{partition_outliers, TraitScores, TRAIT_COUNT};

    #[test]
    fn enumerate_full_degree_2() {
        let terms = enumerate_terms(2, 2, ExpansionMode::Full);
        assert_eq!(
            terms,
            vec![
                vec![],
                vec![(0, 1)],
                vec![(1, 1)],
                vec![(0, 2)],
                vec![(0, 1), (1, 1)],
                vec![(1, 2)],
            ]
        );
    }

    #[test]
    fn enumerate_degree_1_is_linear() {
        let terms = enumerate_terms(5, 1, ExpansionMode::Full);
        assert_eq!(terms.len(), 6);
        let uni = enumerate_terms(5, 1, ExpansionMode::Univariate);
        assert_eq!(terms, uni);
    }

    #[test]
    fn full_degree_3_dimension_is_binomial() {
        let terms = enumerate_terms(46, 3, ExpansionMode::Full);
        assert_eq!(terms.len(), 18_424); // C(49, 3)
    }

    #[test]
    fn univariate_dimension() {
        let terms = enumerate_terms(46, 3, ExpansionMode::Univariate);
        assert_eq!(terms.len(), 1 + 46 * 3);
    }

    #[test]
    fn expand_rejects_bad_degree() {
        assert!(matches!(
            expand(&[vec![1.0]], 0, ExpansionMode::Full),
            Err(RegressError::BadDegree { degree: 0 })
        ));
        assert!(matches!(
            expand(&[vec![1.0]], 4, ExpansionMode::Full),
            Err(RegressError::BadDegree { degree: 4 })
        ));
    }

    #[test]
    fn expand_standardizes_columns() {
        let base = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let d = expand(&base, 1, ExpansionMode::Full).unwrap();
        // column 1 has mean 0 and unit population variance
        let col: Vec<f64> = (0..4).map(|i| d.expanded[(i, 1)]).collect();
        let mean: f64 = col.iter().sum::<f64>() / 4.0;
        let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        // constant column untouched
        assert_eq!(d.expanded[(0, 0)], 1.0);
    }

    #[test]
    fn expand_with_reuses_parameters() {
        let train = vec![vec![0.0], vec![2.0]];
        let d = expand(&train, 2, ExpansionMode::Full).unwrap();
        let held = expand_with(&[vec![1.0]], 2, ExpansionMode::Full, &d.standardization).unwrap();
        // x=1 is the training mean, so the standardized linear column is 0
        assert!(held.expanded[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn pearson_perfect_and_inverse() {
        let a = vec![1.0, 2.0, 3.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn pearson_constant_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(RegressError::ConstantInput)
        ));
    }

    #[test]
    fn predict_matches_dot_product_oracle() {
        // fuzz a few designs and coefficient vectors; predict must equal an
        // explicit dot product over the standardized expansion
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let rows = 3 + (next() * 10.0) as usize;
            let cols = 1 + (next() * 4.0) as usize;
            let base: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| next()).collect())
                .collect();
            let design = expand(&base, 2, ExpansionMode::Full).unwrap();
            let coefficients: Vec<f64> = (0..design.dim()).map(|_| next() * 2.0 - 1.0).collect();
            let model = RegressionModel {
                version: MODEL_FORMAT_VERSION,
                method: Method::Ridge,
                degree: 2,
                mode: ExpansionMode::Full,
                terms: design.terms.clone(),
                standardization: design.standardization.clone(),
                coefficients: coefficients.clone(),
                diagnostics: Diagnostics {
                    iterations: 0,
                    converged: true,
                    chosen_alpha: None,
                },
            };
            let got = predict(&model, &design).unwrap();
            for i in 0..rows {
                let mut expected = 0.0;
                for j in 0..design.dim() {
                    expected += design.expanded[(i, j)] * coefficients[j];
                }
                assert!((got[i] - expected).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let base = vec![vec![0.1, 0.2], vec![0.9, 0.4], vec![0.5, 0.8]];
        let d = expand(&base, 2, ExpansionMode::Full).unwrap();
        let y = vec![0.0, 1.0, 0.5];
        let model = fit(&d, &y, Method::Ridge, &FitOptions::default()).unwrap();
        let text = model.to_json();
        let back = RegressionModel::from_json(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn model_json_rejects_bad_version() {
        let base = vec![vec![0.1], vec![0.9]];
        let d = expand(&base, 1, ExpansionMode::Full).unwrap();
        let mut model = fit(&d, &[0.0, 1.0], Method::Ridge, &FitOptions::default()).unwrap();
        model.version = 99;
        let err = RegressionModel::from_json(&model.to_json()).unwrap_err();
        assert!(matches!(err, RegressError::BadModelVersion { version: 99 }));
    }

    fn ranking_of(n: usize) -> HarmRanking {
        rank_users((0..n).map(|i| HarmScore {
            user_id: format!("u{i:02}"),
            raw: 0.5,
            transformed: -(i as f64), // u00 ranks first
            total: 1,
            m5: 0,
            m6: 0,
            m7: 0,
        }))
    }

    fn partition_with_upper(
        n: usize,
        na: &[usize],
        ma: &[usize],
        ps: &[usize],
    ) -> OutlierPartition {
        // Each dark trait gets its own few extreme users; the rest spread
        // inside the box so the fences stay tight.
        let scores: Vec<TraitScores> = (0..n)
            .map(|i| {
                let mut s = [0.0; TRAIT_COUNT];
                for (kind, upper) in [
                    (TraitKind::Narcissism, na),
                    (TraitKind::Machiavellianism, ma),
                    (TraitKind::Psychopathy, ps),
                ] {
                    s[kind.index()] = if upper.contains(&i) {
                        100.0
                    } else {
                        (i % 3) as f64 * 0.01
                    };
                }
                TraitScores {
                    user_id: format!("u{i:02}"),
                    scores: s,
                }
            })
            .collect();
        partition_outliers(&scores).unwrap()
    }

    #[test]
    fn overlay_top_heavy() {
        // all five Dark-Triad outliers sit in the top half of the ranking
        let ranking = ranking_of(10);
        let partition = partition_with_upper(10, &[0, 1], &[2, 3], &[4]);
        let result = overlay(&ranking, &partition, 2).unwrap();
        assert_eq!(result.bucket_sizes, vec![5, 5]);
        assert_eq!(result.fractions, vec![1.0, 0.0]);
        assert_eq!(result.classes[0], RankClass::Narcissism);
        assert_eq!(result.classes[2], RankClass::Machiavellianism);
        assert_eq!(result.classes[4], RankClass::Psychopathy);
        assert_eq!(result.classes[9], RankClass::None);
    }

    #[test]
    fn psychopathy_class_covers_ps_and_ma_users() {
        let ranking = ranking_of(12);
        // user 3 is upper on both Ma and Ps: colored as Ps
        let partition = partition_with_upper(12, &[], &[3], &[3]);
        let result = overlay(&ranking, &partition, 2).unwrap();
        assert_eq!(result.classes[3], RankClass::Psychopathy);
    }

    #[test]
    fn overlay_no_outliers() {
        let ranking = ranking_of(9);
        let partition = partition_with_upper(9, &[], &[], &[]);
        let result = overlay(&ranking, &partition, 3).unwrap();
        assert_eq!(result.fractions, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn overlay_remainder_goes_to_last_bucket() {
        let ranking = ranking_of(10);
        let partition = partition_with_upper(10, &[], &[], &[]);
        let result = overlay(&ranking, &partition, 3).unwrap();
        assert_eq!(result.bucket_sizes, vec![3, 3, 4]);
    }

    #[test]
    fn overlay_rejects_too_many_groups() {
        let ranking = ranking_of(3);
        let partition = partition_with_upper(3, &[], &[], &[]);
        assert!(matches!(
            overlay(&ranking, &partition, 4),
            Err(RegressError::GroupsExceedUsers { .. })
        ));
    }

    #[test]
    fn overlay_rejects_mismatched_users() {
        let ranking = ranking_of(4);
        let partition = partition_with_upper(5, &[], &[], &[]);
        assert!(matches!(
            overlay(&ranking, &partition, 2),
            Err(RegressError::UserSetMismatch)
        ));
    }
}
