//! Seeded synthetic corpora with planted per-user word-emission rates and
//! planted polynomial harm functions.
//!
//! The real study corpora are private, so every end-to-end check runs on
//! generated populations where the ground truth is known. Determinism is
//! strict: every random stream derives from an explicit master seed and a
//! stream/user index, so parallel generation and re-runs produce identical
//! bytes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::corpus::{Corpus, HarmType, Message, RiskLabel};
use crate::features::FeatureMatrix;
use crate::harm::expit;
use crate::regress::{enumerate_terms, ExpansionMode, Term};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
    #[error("coefficient length mismatch: expansion has {expected} terms, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("user {user:?} from the feature matrix is missing from the corpus")]
    UnknownUser { user: String },
}

/// Derive a ChaCha seed from a master seed, a stream tag, and an index.
/// Splitmix64 steps keep the derivation platform-independent.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> [u8; 32] {
    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    let mut state = master ^ stream.wrapping_mul(0xA24BAED4963EE407) ^ index.wrapping_mul(0x9FB21C651E98DF25);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_seed(master, stream, index))
}

/// One synthetic word category: its vocabulary, the population base rate,
/// and the half-width of the per-user rate perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySpec {
    pub name: String,
    pub words: Vec<String>,
    pub base_rate: f64,
    pub jitter: f64,
}

/// Parameters of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub user_count: usize,
    pub messages_per_user: usize,
    /// Mean and half-spread of per-message word counts.
    pub words_per_message: (f64, f64),
    pub categories: Vec<CategorySpec>,
    /// Out-of-lexicon words absorbing the remaining rate mass.
    pub filler_words: Vec<String>,
    pub seed: u64,
}

/// Ground-truth emission rates for one generated user; rates align with
/// `PopulationSpec::categories` and sum with `filler_rate` to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRates {
    pub user_id: String,
    pub rates: Vec<f64>,
    pub filler_rate: f64,
}

impl PopulationSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.user_count == 0 {
            return Err(SynthError::InvalidSpec("user_count must be positive".into()));
        }
        if self.messages_per_user == 0 {
            return Err(SynthError::InvalidSpec(
                "messages_per_user must be positive".into(),
            ));
        }
        let (mean, spread) = self.words_per_message;
        if mean < 1.0 || spread < 0.0 || !mean.is_finite() || !spread.is_finite() {
            return Err(SynthError::InvalidSpec(
                "words_per_message mean must be >= 1 with non-negative spread".into(),
            ));
        }
        let mut max_total = 0.0;
        let mut min_total = 0.0;
        for c in &self.categories {
            if c.words.is_empty() {
                return Err(SynthError::InvalidSpec(format!(
                    "category {:?} has an empty vocabulary",
                    c.name
                )));
            }
            if !(0.0..=1.0).contains(&c.base_rate) || c.jitter < 0.0 {
                return Err(SynthError::InvalidSpec(format!(
                    "category {:?} rate/jitter out of range",
                    c.name
                )));
            }
            max_total += (c.base_rate + c.jitter).min(1.0);
            min_total += (c.base_rate - c.jitter).max(0.0);
        }
        if max_total > 1.0 + 1e-12 {
            return Err(SynthError::InvalidSpec(format!(
                "category rates can sum to {max_total:.3} > 1"
            )));
        }
        if min_total < 1.0 - 1e-12 && self.filler_words.is_empty() {
            return Err(SynthError::InvalidSpec(
                "filler vocabulary required when category rates can sum below 1".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a corpus with planted per-user categorical word rates.
/// Deterministic for a fixed seed; ground-truth rates are returned for
/// oracle checks.
pub fn gen_corpus(spec: &PopulationSpec) -> Result<(Corpus, Vec<UserRates>), SynthError> {
    spec.validate()?;
    let mut messages = Vec::with_capacity(spec.user_count * spec.messages_per_user);
    let mut truths = Vec::with_capacity(spec.user_count);
    for u in 0..spec.user_count {
        let user_id = format!("user{u:05}");
        let mut rng = rng_for(spec.seed, 0, u as u64);
        let rates: Vec<f64> = spec
            .categories
            .iter()
            .map(|c| {
                let jitter = if c.jitter > 0.0 {
                    rng.random_range(-c.jitter..=c.jitter)
                } else {
                    0.0
                };
                (c.base_rate + jitter).clamp(0.0, 1.0)
            })
            .collect();
        let filler_rate = (1.0 - rates.iter().sum::<f64>()).max(0.0);

        let (mean, spread) = spec.words_per_message;
        for m in 0..spec.messages_per_user {
            let jitter = if spread > 0.0 {
                rng.random_range(-spread..=spread)
            } else {
                0.0
            };
            let word_count = (mean + jitter).round().max(1.0) as usize;
            let mut words = Vec::with_capacity(word_count);
            for _ in 0..word_count {
                let draw: f64 = rng.random_range(0.0..1.0);
                let mut acc = 0.0;
                let mut chosen: Option<&CategorySpec> = None;
                for (c, &rate) in spec.categories.iter().zip(&rates) {
                    acc += rate;
                    if draw < acc {
                        chosen = Some(c);
                        break;
                    }
                }
                let word = match chosen {
                    Some(c) => &c.words[rng.random_range(0..c.words.len())],
                    None => &spec.filler_words[rng.random_range(0..spec.filler_words.len())],
                };
                words.push(word.as_str());
            }
            messages.push(Message {
                id: format!("{user_id}-m{m:05}"),
                user: user_id.clone(),
                ts: m as u64,
                text: words.join(" "),
            });
        }
        truths.push(UserRates {
            user_id,
            rates,
            filler_rate,
        });
    }
    let corpus = Corpus::from_messages("synthetic", messages)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok((corpus, truths))
}

/// A planted polynomial harm function over raw (unstandardized) expansion
/// terms, plus Gaussian noise in the logit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedHarm {
    pub degree: usize,
    pub mode: ExpansionMode,
    /// One coefficient per expansion term (constant term first).
    pub coefficients: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl PlantedHarm {
    pub fn terms(&self, features: usize) -> Vec<Term> {
        enumerate_terms(features, self.degree, self.mode)
    }
}

/// Draw sparse random coefficients for a planted model: `nonzero` distinct
/// terms get values uniform in `[-scale, scale]`.
pub fn random_coefficients(dim: usize, nonzero: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 3, 0);
    let mut coefficients = vec![0.0; dim];
    let mut indices: Vec<usize> = (0..dim).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    for &idx in indices.iter().take(nonzero.min(dim)) {
        coefficients[idx] = rng.random_range(-scale..=scale);
    }
    coefficients
}

/// Targets plus label files generated from a planted harm function.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthHarm {
    /// Logit-domain target per matrix row.
    pub targets: Vec<f64>,
    /// Per-message labels whose per-user high-risk ratio reproduces
    /// `expit(target)` up to binomial noise.
    pub labels: BTreeMap<String, RiskLabel>,
}

/// Evaluate the planted polynomial on each user's feature row, add seeded
/// Gaussian noise, and emit message labels consistent with the resulting
/// harm probabilities.
pub fn gen_harm(
    matrix: &FeatureMatrix,
    planted: &PlantedHarm,
    corpus: &Corpus,
) -> Result<SynthHarm, SynthError> {
    let terms = planted.terms(matrix.feature_count());
    if terms.len() != planted.coefficients.len() {
        return Err(SynthError::DimensionMismatch {
            expected: terms.len(),
            got: planted.coefficients.len(),
        });
    }
    let noise = if planted.noise > 0.0 {
        Some(Normal::new(0.0, planted.noise).map_err(|e| SynthError::InvalidSpec(e.to_string()))?)
    } else {
        None
    };

    let mut targets = Vec::with_capacity(matrix.user_count());
    let mut labels = BTreeMap::new();
    for (u, (user_id, row)) in matrix.user_ids.iter().zip(&matrix.values).enumerate() {
        let mut target = 0.0;
        for (term, &coefficient) in terms.iter().zip(&planted.coefficients) {
            if coefficient != 0.0 {
                let value: f64 = term.iter().map(|&(f, e)| row[f].powi(e as i32)).product();
                target += coefficient * value;
            }
        }
        if let Some(normal) = &noise {
            let mut rng = rng_for(planted.seed, 1, u as u64);
            target += normal.sample(&mut rng);
        }
        targets.push(target);

        let messages = corpus
            .messages_of(user_id)
            .ok_or_else(|| SynthError::UnknownUser {
                user: user_id.clone(),
            })?;
        let probability = expit(target);
        let mut rng = rng_for(planted.seed, 2, u as u64);
        for message in messages {
            let mut label = RiskLabel::safe();
            let level = if rng.random_bool(probability) {
                5 + rng.random_range(0..3u8)
            } else {
                rng.random_range(0..4u8)
            };
            label.set(HarmType::General, level);
            labels.insert(message.id.clone(), label);
        }
    }
    Ok(SynthHarm { targets, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_matrix, profiles};
    use crate::lexicon::Lexicon;

    fn small_spec(seed: u64) -> PopulationSpec {
        PopulationSpec {
            user_count: 4,
            messages_per_user: 10,
            words_per_message: (8.0, 3.0),
            categories: vec![
                CategorySpec {
                    name: "we-words".to_string(),
                    words: vec!["we".into(), "us".into(), "our".into()],
                    base_rate: 0.2,
                    jitter: 0.1,
                },
                CategorySpec {
                    name: "percept".to_string(),
                    words: vec!["hear".into(), "feel".into()],
                    base_rate: 0.1,
                    jitter: 0.05,
                },
            ],
            filler_words: vec!["lorem".into(), "ipsum".into(), "dolor".into()],
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec(42);
        let (c1, t1) = gen_corpus(&spec).unwrap();
        let (c2, t2) = gen_corpus(&spec).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(t1, t2);
        let (c3, _) = gen_corpus(&small_spec(43)).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn pure_category_user_emits_only_its_words() {
        let spec = PopulationSpec {
            user_count: 1,
            messages_per_user: 5,
            words_per_message: (6.0, 0.0),
            categories: vec![CategorySpec {
                name: "we-words".to_string(),
                words: vec!["we".into(), "us".into()],
                base_rate: 1.0,
                jitter: 0.0,
            }],
            filler_words: vec![],
            seed: 1,
        };
        let (corpus, truths) = gen_corpus(&spec).unwrap();
        assert_eq!(truths[0].rates, vec![1.0]);
        for message in corpus.all_messages() {
            for word in message.text.split(' ') {
                assert!(word == "we" || word == "us");
            }
        }
    }

    #[test]
    fn empirical_rates_match_planted_within_3_se() {
        let spec = PopulationSpec {
            user_count: 3,
            messages_per_user: 100,
            words_per_message: (100.0, 0.0),
            categories: vec![CategorySpec {
                name: "we-words".to_string(),
                words: vec!["we".into()],
                base_rate: 0.3,
                jitter: 0.1,
            }],
            filler_words: vec!["filler".into()],
            seed: 9,
        };
        let (corpus, truths) = gen_corpus(&spec).unwrap();
        for truth in &truths {
            let rate = truth.rates[0];
            let mut hits = 0usize;
            let mut total = 0usize;
            for message in corpus.messages_of(&truth.user_id).unwrap() {
                for word in message.text.split(' ') {
                    total += 1;
                    if word == "we" {
                        hits += 1;
                    }
                }
            }
            let empirical = hits as f64 / total as f64;
            let se = (rate * (1.0 - rate) / total as f64).sqrt();
            assert!(
                (empirical - rate).abs() <= 3.0 * se.max(1e-9),
                "user {}: empirical {empirical:.4} vs planted {rate:.4} (se {se:.5})",
                truth.user_id
            );
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec(1);
        spec.user_count = 0;
        assert!(gen_corpus(&spec).is_err());

        let mut spec = small_spec(1);
        spec.categories[0].base_rate = 0.9;
        spec.categories[1].base_rate = 0.3;
        assert!(gen_corpus(&spec).is_err());

        let mut spec = small_spec(1);
        spec.filler_words.clear();
        assert!(gen_corpus(&spec).is_err());
    }

    fn matrix_and_corpus() -> (FeatureMatrix, Corpus) {
        let spec = small_spec(11);
        let (corpus, _) = gen_corpus(&spec).unwrap();
        let lexicon = Lexicon::from_entries(
            vec![(1, "we-words"), (2, "percept")],
            vec![
                ("we", vec![1]),
                ("us", vec![1]),
                ("our", vec![1]),
                ("hear", vec![2]),
                ("feel", vec![2]),
            ],
        )
        .unwrap();
        let p = profiles(&lexicon, &corpus);
        (build_matrix(&p, &lexicon.feature_names()).unwrap(), corpus)
    }

    #[test]
    fn zero_coefficients_give_zero_targets() {
        let (matrix, corpus) = matrix_and_corpus();
        let planted = PlantedHarm {
            degree: 2,
            mode: ExpansionMode::Full,
            coefficients: vec![0.0; 6],
            noise: 0.0,
            seed: 5,
        };
        let harm = gen_harm(&matrix, &planted, &corpus).unwrap();
        assert!(harm.targets.iter().all(|&t| t == 0.0));
        assert!(harm.targets.iter().all(|&t| expit(t) == 0.5));
        assert_eq!(harm.labels.len(), corpus.message_count());
    }

    #[test]
    fn coefficient_length_is_checked() {
        let (matrix, corpus) = matrix_and_corpus();
        let planted = PlantedHarm {
            degree: 2,
            mode: ExpansionMode::Full,
            coefficients: vec![0.0; 5],
            noise: 0.0,
            seed: 5,
        };
        assert!(matches!(
            gen_harm(&matrix, &planted, &corpus),
            Err(SynthError::DimensionMismatch { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn noiseless_targets_are_recoverable_by_ridge() {
        let (matrix, corpus) = matrix_and_corpus();
        let planted = PlantedHarm {
            degree: 2,
            mode: ExpansionMode::Full,
            coefficients: vec![0.1, 0.8, -0.5, 0.3, -0.2, 0.4],
            noise: 0.0,
            seed: 5,
        };
        let harm = gen_harm(&matrix, &planted, &corpus).unwrap();
        let design = crate::regress::expand(&matrix.values, 2, ExpansionMode::Full).unwrap();
        let options = crate::regress::FitOptions {
            ridge_alpha: 1e-10,
            ..Default::default()
        };
        let model =
            crate::regress::fit(&design, &harm.targets, crate::regress::Method::Ridge, &options)
                .unwrap();
        let predictions = crate::regress::predict(&model, &design).unwrap();
        for (p, t) in predictions.iter().zip(&harm.targets) {
            assert!((p - t).abs() <= 1e-6, "{p} vs {t}");
        }
    }

    #[test]
    fn emitted_labels_reproduce_planted_harm_levels() {
        // 200 messages per user keeps binomial error small enough for a
        // strong correlation between measured and planted harm
        let spec = PopulationSpec {
            user_count: 25,
            messages_per_user: 200,
            words_per_message: (10.0, 2.0),
            categories: vec![CategorySpec {
                name: "we-words".to_string(),
                words: vec!["we".into(), "us".into()],
                base_rate: 0.3,
                jitter: 0.25,
            }],
            filler_words: vec!["filler".into(), "noise".into()],
            seed: 31,
        };
        let (corpus, _) = gen_corpus(&spec).unwrap();
        let lexicon = Lexicon::from_entries(
            vec![(1, "we-words")],
            vec![("we", vec![1]), ("us", vec![1])],
        )
        .unwrap();
        let p = profiles(&lexicon, &corpus);
        let matrix = build_matrix(&p, &lexicon.feature_names()).unwrap();
        let planted = PlantedHarm {
            degree: 1,
            mode: ExpansionMode::Univariate,
            coefficients: vec![-1.5, 3.0],
            noise: 0.0,
            seed: 77,
        };
        let harm = gen_harm(&matrix, &planted, &corpus).unwrap();

        let mut measured = Vec::new();
        let mut planted_probability = Vec::new();
        for (user, target) in matrix.user_ids.iter().zip(&harm.targets) {
            let labels: Vec<RiskLabel> = corpus
                .messages_of(user)
                .unwrap()
                .iter()
                .map(|m| harm.labels[&m.id])
                .collect();
            let score = crate::harm::harm_level(user.clone(), &labels).unwrap();
            measured.push(score.raw);
            planted_probability.push(expit(*target));
        }
        let r = crate::regress::pearson(&measured, &planted_probability).unwrap();
        assert!(r >= 0.9, "label round-trip correlation {r:.3}");
    }

    #[test]
    fn random_coefficients_are_sparse_and_seeded() {
        let a = random_coefficients(20, 5, 1.5, 7);
        let b = random_coefficients(20, 5, 1.5, 7);
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|&&c| c != 0.0).count(), 5);
        assert!(a.iter().all(|c| c.abs() <= 1.5));
    }
}
