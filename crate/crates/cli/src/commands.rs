//! The nine pipeline subcommands. Each one validates its inputs, runs the
//! corresponding library stages, and writes CSV/markdown/plot-data files
//! under the output directory. Identical inputs and configuration produce
//! byte-identical outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;

use serde::Serialize;

use inkling_core::corpus::Corpus;
use inkling_core::features::{apply_params, FeatureMatrix};
use inkling_core::harm::{expit, rank_users, HarmRanking, HarmScore};
use inkling_core::lexicon::{lexicon_overlap, CorrelationSign, Lexicon};
use inkling_core::regress::{
    ablate, expand, fit, overlay, predict, ExpansionMode, FitOptions, Method, RegressionModel,
};
use inkling_core::stability::{prefix_scores, stability_table, CorrelationKind};
use inkling_core::synth::{
    gen_corpus, gen_harm, random_coefficients, CategorySpec, PlantedHarm, PopulationSpec,
};
use inkling_core::traits::{
    boxplot, harm_ratio_table, partition_outliers, score_traits, write_scores_csv, BoxplotStats,
    OutlierGroup, OutlierPartition, TraitKind, TraitScores,
};

use crate::config::{CliError, CliResult, RunConfig};
use crate::pipeline::{
    feature_matrix, harm_scores, load_corpus, load_labels, load_lexicon, load_main_corpus,
    load_weight_matrix, read_feature_params, write_feature_params, OutDir,
};

#[derive(Serialize)]
struct TraitDistribution {
    #[serde(rename = "trait")]
    trait_name: String,
    sorted_scores: Vec<f64>,
    stats: BoxplotStats,
}

fn boxplot_stats_csv(scores: &[TraitScores]) -> CliResult<(String, Vec<TraitDistribution>)> {
    let mut csv = String::from("trait,q1,median,q3,iqr,lower_fence,upper_fence\n");
    let mut plots = Vec::new();
    for kind in TraitKind::ALL {
        let mut values: Vec<f64> = scores.iter().map(|s| s.get(kind)).collect();
        let stats = boxplot(&values).map_err(CliError::runtime)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            kind.abbrev(),
            stats.q1,
            stats.median,
            stats.q3,
            stats.iqr,
            stats.lower_fence,
            stats.upper_fence
        );
        values.sort_by(f64::total_cmp);
        plots.push(TraitDistribution {
            trait_name: kind.abbrev().to_string(),
            sorted_scores: values,
            stats,
        });
    }
    Ok((csv, plots))
}

fn outliers_csv(partition: &OutlierPartition) -> String {
    let mut csv = String::from("trait,group,user\n");
    for kind in TraitKind::ALL {
        for group in OutlierGroup::ALL {
            for user in partition.members(kind, group) {
                let _ = writeln!(csv, "{},{},{user}", kind.abbrev(), group.label());
            }
        }
    }
    csv
}

struct ScoredCorpus {
    corpus: Corpus,
    matrix: FeatureMatrix,
    scores: Vec<TraitScores>,
    partition: OutlierPartition,
}

fn score_corpus(config: &RunConfig, lexicon: &Lexicon, corpus: Corpus) -> CliResult<ScoredCorpus> {
    let weights = load_weight_matrix(config, lexicon)?;
    let (_, matrix) = feature_matrix(lexicon, &corpus)?;
    let scores = score_traits(&matrix, &weights).map_err(CliError::runtime)?;
    let partition = partition_outliers(&scores).map_err(CliError::runtime)?;
    Ok(ScoredCorpus {
        corpus,
        matrix,
        scores,
        partition,
    })
}

fn write_score_outputs(out: &OutDir, scored: &ScoredCorpus, suffix: &str) -> CliResult<()> {
    let mut scores_csv = Vec::new();
    write_scores_csv(&scored.scores, &mut scores_csv).map_err(CliError::runtime)?;
    out.write(&format!("trait_scores{suffix}.csv"), scores_csv)?;

    let (stats_csv, plots) = boxplot_stats_csv(&scored.scores)?;
    out.write(&format!("boxplot_stats{suffix}.csv"), stats_csv)?;
    out.write_json(&format!("plot/score_distributions{suffix}.json"), &plots)?;
    out.write(&format!("outliers{suffix}.csv"), outliers_csv(&scored.partition))?;

    let mut features_csv = Vec::new();
    scored
        .matrix
        .write_csv(&mut features_csv)
        .map_err(CliError::runtime)?;
    out.write(&format!("features{suffix}.csv"), features_csv)?;
    out.write(
        &format!("feature_params{suffix}.csv"),
        write_feature_params(&scored.matrix),
    )?;
    Ok(())
}

pub fn cmd_score(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let lexicon = load_lexicon(config)?;
    let scored = score_corpus(config, &lexicon, load_main_corpus(config)?)?;
    write_score_outputs(&out, &scored, "")?;

    if let Some(path_b) = &config.messages_b {
        let corpus_b = load_corpus(config, path_b)?;
        let scored_b = score_corpus(config, &lexicon, corpus_b)?;
        write_score_outputs(&out, &scored_b, "_b")?;

        #[derive(Serialize)]
        struct PairedBoxplot {
            #[serde(rename = "trait")]
            trait_name: String,
            a: BoxplotStats,
            b: BoxplotStats,
        }
        let pairs: Vec<PairedBoxplot> = TraitKind::ALL
            .into_iter()
            .map(|kind| PairedBoxplot {
                trait_name: kind.abbrev().to_string(),
                a: scored.partition.stats[kind.index()],
                b: scored_b.partition.stats[kind.index()],
            })
            .collect();
        out.write_json("plot/boxplot_pairs.json", &pairs)?;
    }
    println!(
        "scored {} users on {} features (behavioral similarity scores, not a psychological test)",
        scored.matrix.user_count(),
        scored.matrix.feature_count()
    );
    Ok(())
}

pub fn cmd_tables(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let lexicon = load_lexicon(config)?;
    let scored = score_corpus(config, &lexicon, load_main_corpus(config)?)?;
    let labels = load_labels(config, &scored.corpus)?;
    let table = harm_ratio_table(&scored.partition, &labels, &scored.corpus);
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(CliError::runtime)?;
    out.write("harm_ratio.csv", csv)?;
    out.write("harm_ratio.md", table.to_markdown())?;
    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    println!("wrote safe/unsafe ratio tables for 8 traits");
    Ok(())
}

fn harm_curve_json(ranking: &HarmRanking) -> impl Serialize {
    #[derive(Serialize)]
    struct Curve {
        users: Vec<String>,
        raw: Vec<f64>,
        transformed: Vec<f64>,
    }
    Curve {
        users: ranking.entries.iter().map(|e| e.user_id.clone()).collect(),
        raw: ranking.entries.iter().map(|e| e.raw).collect(),
        transformed: ranking.entries.iter().map(|e| e.transformed).collect(),
    }
}

pub fn cmd_harm(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let corpus = load_main_corpus(config)?;
    let labels = load_labels(config, &corpus)?;
    let (scores, unlabeled) = harm_scores(&corpus, &labels);
    if scores.is_empty() {
        return Err(CliError::validation("no user has ratable labeled messages"));
    }
    let mut csv = String::from("user,total,m5,m6,m7,raw,transformed\n");
    for s in &scores {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.user_id, s.total, s.m5, s.m6, s.m7, s.raw, s.transformed
        );
    }
    out.write("harm_scores.csv", csv)?;
    let ranking = rank_users(scores);
    let mut ranking_csv = Vec::new();
    ranking.write_csv(&mut ranking_csv).map_err(CliError::runtime)?;
    out.write("ranking.csv", ranking_csv)?;
    out.write_json("plot/harm_curve.json", &harm_curve_json(&ranking))?;
    if !unlabeled.is_empty() {
        out.write("unlabeled_users.txt", unlabeled.join("\n") + "\n")?;
        eprintln!(
            "warning: {} user(s) had no ratable messages and were excluded",
            unlabeled.len()
        );
    }
    println!("ranked {} users by harm level", ranking.len());
    Ok(())
}

fn parse_methods(config: &RunConfig) -> CliResult<Vec<Method>> {
    match config.method.as_deref().unwrap_or("all") {
        "all" => Ok(Method::ALL.to_vec()),
        name => Method::from_name(name)
            .map(|m| vec![m])
            .ok_or_else(|| CliError::validation(format!("unknown method {name:?}"))),
    }
}

fn fit_options(config: &RunConfig, need_seed: bool) -> CliResult<FitOptions> {
    let mut options = FitOptions::default();
    if let Some(alpha) = config.alpha {
        options.ridge_alpha = alpha;
    }
    if let Some(epochs) = config.epochs {
        options.sgd_epochs = epochs;
    }
    options.seed = config.seed;
    if need_seed && options.seed.is_none() {
        return Err(CliError::validation("sgd requires --seed"));
    }
    Ok(options)
}

fn expansion_settings(config: &RunConfig) -> (usize, ExpansionMode) {
    let degree = config.degree.unwrap_or(3);
    let mode = if config.univariate_expansion.unwrap_or(false) {
        ExpansionMode::Univariate
    } else {
        ExpansionMode::Full
    };
    (degree, mode)
}

/// Rows of the matrix restricted to users present in `targets`, aligned
/// with the target values.
fn aligned_rows(
    matrix: &FeatureMatrix,
    targets: &BTreeMap<String, f64>,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut users = Vec::new();
    for (user, row) in matrix.user_ids.iter().zip(&matrix.values) {
        if let Some(&t) = targets.get(user) {
            rows.push(row.clone());
            y.push(t);
            users.push(user.clone());
        }
    }
    (rows, y, users)
}

fn targets_of(scores: &[HarmScore]) -> BTreeMap<String, f64> {
    scores
        .iter()
        .map(|s| (s.user_id.clone(), s.transformed))
        .collect()
}

pub fn cmd_regress(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let lexicon = load_lexicon(config)?;
    let corpus = load_main_corpus(config)?;
    let labels = load_labels(config, &corpus)?;
    let (_, matrix) = feature_matrix(&lexicon, &corpus)?;
    let (scores, _) = harm_scores(&corpus, &labels);
    let targets = targets_of(&scores);
    let (rows, y, _) = aligned_rows(&matrix, &targets);
    if rows.len() < 2 {
        return Err(CliError::validation(
            "fewer than 2 labeled users to train on",
        ));
    }

    let methods = parse_methods(config)?;
    let options = fit_options(config, methods.contains(&Method::Sgd))?;
    let (degree, mode) = expansion_settings(config);
    let design = expand(&rows, degree, mode).map_err(CliError::runtime)?;
    out.write("feature_params.csv", write_feature_params(&matrix))?;

    // evaluation set: held-out corpus when given, else the training set
    let eval: Option<(Vec<Vec<f64>>, Vec<f64>, Vec<String>)> = match &config.test_messages {
        Some(path) => {
            let test_corpus = load_corpus(config, path)?;
            let test_config = RunConfig {
                labels: config.test_labels.clone(),
                labeler: config.labeler.clone(),
                ..RunConfig::default()
            };
            let test_labels = load_labels(&test_config, &test_corpus)?;
            let (test_scores, _) = harm_scores(&test_corpus, &test_labels);
            let test_targets = targets_of(&test_scores);
            let test_matrix = if config.frozen_normalization.unwrap_or(false) {
                // score held-out users against the training normalization
                let test_profiles = inkling_core::features::profiles(&lexicon, &test_corpus);
                let values: Result<Vec<Vec<f64>>, _> = test_profiles
                    .iter()
                    .map(|p| apply_params(p, &matrix.params))
                    .collect();
                FeatureMatrix {
                    user_ids: test_profiles.iter().map(|p| p.user_id.clone()).collect(),
                    feature_names: matrix.feature_names.clone(),
                    values: values.map_err(CliError::runtime)?,
                    params: matrix.params.clone(),
                }
            } else {
                feature_matrix(&lexicon, &test_corpus)?.1
            };
            let (test_rows, test_y, test_users) = aligned_rows(&test_matrix, &test_targets);
            if test_rows.len() < 2 {
                return Err(CliError::validation(
                    "fewer than 2 labeled users in the test corpus",
                ));
            }
            Some((test_rows, test_y, test_users))
        }
        None => None,
    };

    let mut metrics = String::from("method,pearson,mse_logit,mse_expit\n");
    for method in methods {
        let model = fit(&design, &y, method, &options).map_err(CliError::runtime)?;
        out.write(
            &format!("models/model_{}.json", method.name()),
            model.to_json() + "\n",
        )?;

        let (eval_rows, eval_y, eval_users) = match &eval {
            Some((r, t, u)) => (r.clone(), t.clone(), u.clone()),
            None => {
                let (r, t, u) = aligned_rows(&matrix, &targets);
                (r, t, u)
            }
        };
        let eval_design = model.expand_base(&eval_rows).map_err(CliError::runtime)?;
        let predictions = predict(&model, &eval_design).map_err(CliError::runtime)?;
        let pearson_r = inkling_core::regress::pearson(&predictions, &eval_y)
            .map_err(CliError::runtime)?;
        let mse_logit =
            inkling_core::regress::mse(&predictions, &eval_y).map_err(CliError::runtime)?;
        let pred_harm: Vec<f64> = predictions.iter().map(|&p| expit(p)).collect();
        let true_harm: Vec<f64> = eval_y.iter().map(|&t| expit(t)).collect();
        let mse_expit =
            inkling_core::regress::mse(&pred_harm, &true_harm).map_err(CliError::runtime)?;
        let _ = writeln!(metrics, "{},{pearson_r:.4},{mse_logit:.6},{mse_expit:.6}", method.name());

        let mut predictions_csv = String::from("user,target_logit,predicted_logit,predicted_harm\n");
        for ((user, target), prediction) in eval_users.iter().zip(&eval_y).zip(&predictions) {
            let _ = writeln!(
                predictions_csv,
                "{user},{target},{prediction},{}",
                expit(*prediction)
            );
        }
        out.write(&format!("predictions_{}.csv", method.name()), predictions_csv)?;
        println!(
            "{}: pearson {:.4}, mse(logit) {:.6}, converged {}",
            method.name(),
            pearson_r,
            mse_logit,
            model.diagnostics.converged
        );
    }
    out.write("metrics.csv", metrics)?;
    if eval.is_none() {
        eprintln!("note: no test corpus given; metrics are on the training set");
    }
    Ok(())
}

pub fn cmd_ablate(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let model_path = config.require(config.model.as_ref(), "model", "--model")?;
    let model_text = fs::read_to_string(&model_path).map_err(CliError::runtime)?;
    let model = RegressionModel::from_json(&model_text)
        .map_err(|e| CliError::runtime(format!("{}: {e}", model_path.display())))?;

    let lexicon = load_lexicon(config)?;
    let corpus = load_main_corpus(config)?;
    let (user_profiles, own_matrix) = feature_matrix(&lexicon, &corpus)?;
    let rows: Vec<Vec<f64>> = match &config.feature_params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::runtime)?;
            let params = read_feature_params(&text, &own_matrix.feature_names)?;
            let mut sorted = user_profiles.clone();
            sorted.sort_by(|a, b| a.user_id.cmp(&b.user_id));
            sorted
                .iter()
                .map(|p| apply_params(p, &params))
                .collect::<Result<_, _>>()
                .map_err(CliError::runtime)?
        }
        None => own_matrix.values.clone(),
    };

    let design = model.expand_base(&rows).map_err(CliError::runtime)?;
    let report = ablate(&model, &design).map_err(CliError::runtime)?;

    let mut csv = String::from("feature,mean_contribution\n");
    for (name, value) in own_matrix.feature_names.iter().zip(&report.contributions) {
        let _ = writeln!(csv, "{name},{value}");
    }
    out.write("contributions.csv", csv)?;

    // positive contributors descending, negative ascending
    let mut positive: Vec<(String, f64)> = Vec::new();
    let mut negative: Vec<(String, f64)> = Vec::new();
    for (name, &value) in own_matrix.feature_names.iter().zip(&report.contributions) {
        if value > 0.0 {
            positive.push((name.clone(), value));
        } else if value < 0.0 {
            negative.push((name.clone(), value));
        }
    }
    positive.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    negative.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    #[derive(Serialize)]
    struct Contributions {
        cohort_size: usize,
        positive: Vec<(String, f64)>,
        negative: Vec<(String, f64)>,
    }
    out.write_json(
        "contributions.json",
        &Contributions {
            cohort_size: report.cohort_size(),
            positive,
            negative,
        },
    )?;
    println!(
        "ablated {} features over a cohort of {} users",
        own_matrix.feature_count(),
        report.cohort_size()
    );
    Ok(())
}

pub fn cmd_overlay(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let lexicon = load_lexicon(config)?;
    let scored = score_corpus(config, &lexicon, load_main_corpus(config)?)?;
    let groups = config.groups.unwrap_or(10);

    let ranking = match &config.model {
        Some(path) => {
            // rank by the model's predicted harm instead of the measured one
            let text = fs::read_to_string(path).map_err(CliError::runtime)?;
            let model = RegressionModel::from_json(&text).map_err(CliError::runtime)?;
            let design = model
                .expand_base(&scored.matrix.values)
                .map_err(CliError::runtime)?;
            let predictions = predict(&model, &design).map_err(CliError::runtime)?;
            rank_users(scored.matrix.user_ids.iter().zip(&predictions).map(
                |(user, &p)| HarmScore {
                    user_id: user.clone(),
                    raw: expit(p),
                    transformed: p,
                    total: 0,
                    m5: 0,
                    m6: 0,
                    m7: 0,
                },
            ))
        }
        None => {
            let labels = load_labels(config, &scored.corpus)?;
            let (scores, unlabeled) = harm_scores(&scored.corpus, &labels);
            if !unlabeled.is_empty() {
                eprintln!(
                    "warning: {} user(s) without ratable messages excluded from the overlay",
                    unlabeled.len()
                );
            }
            rank_users(scores)
        }
    };

    // the partition must cover exactly the ranked users
    let ranked: BTreeSet<&str> = ranking.entries.iter().map(|e| e.user_id.as_str()).collect();
    let kept_scores: Vec<TraitScores> = scored
        .scores
        .iter()
        .filter(|s| ranked.contains(s.user_id.as_str()))
        .cloned()
        .collect();
    let partition = partition_outliers(&kept_scores).map_err(CliError::runtime)?;
    let result = overlay(&ranking, &partition, groups).map_err(|e| match e {
        inkling_core::regress::RegressError::GroupsExceedUsers { .. } => {
            CliError::validation(e.to_string())
        }
        other => CliError::runtime(other),
    })?;

    let mut csv = String::from("bucket,size,dark_triad_fraction\n");
    for (i, (size, fraction)) in result
        .bucket_sizes
        .iter()
        .zip(&result.fractions)
        .enumerate()
    {
        let _ = writeln!(csv, "{},{size},{fraction}", i + 1);
    }
    out.write("overlay.csv", csv)?;

    let mut colored = String::from("rank,user,transformed,class\n");
    for (i, (entry, class)) in ranking.entries.iter().zip(&result.classes).enumerate() {
        let _ = writeln!(
            colored,
            "{},{},{},{:?}",
            i + 1,
            entry.user_id,
            entry.transformed,
            class
        );
    }
    out.write("colored_ranking.csv", colored)?;
    out.write_json("plot/overlay.json", &result)?;
    println!(
        "overlay over {} users in {} buckets",
        ranking.len(),
        groups
    );
    Ok(())
}

pub fn cmd_stability(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let lexicon = load_lexicon(config)?;
    let weights = load_weight_matrix(config, &lexicon)?;
    let corpus = load_main_corpus(config)?;

    let reference = config.reference.unwrap_or(400);
    let checkpoints = config
        .checkpoints
        .clone()
        .unwrap_or_else(|| vec![1, 5, 10, 25, 50, 75, 100, 200, 300]);
    if let Some(&bad) = checkpoints.iter().find(|&&c| c >= reference) {
        return Err(CliError::validation(format!(
            "checkpoint {bad} is not below the reference size {reference}"
        )));
    }
    let correlation = match config.correlation.as_deref() {
        None => CorrelationKind::Pearson,
        Some(name) => CorrelationKind::from_name(name)
            .ok_or_else(|| CliError::validation(format!("unknown correlation {name:?}")))?,
    };

    let before = corpus.user_count();
    let corpus = corpus
        .filter_users(reference, None)
        .map_err(CliError::runtime)?;
    if corpus.user_count() < 3 {
        return Err(CliError::validation(format!(
            "only {} user(s) have {reference}+ messages; need at least 3",
            corpus.user_count()
        )));
    }
    if corpus.user_count() < before {
        eprintln!(
            "note: dropped {} user(s) with fewer than {reference} messages",
            before - corpus.user_count()
        );
    }

    let mut sizes = checkpoints.clone();
    sizes.push(reference);
    let per_size =
        prefix_scores(&corpus, &lexicon, &weights, &sizes).map_err(CliError::runtime)?;
    let table =
        stability_table(&per_size, reference, correlation).map_err(CliError::runtime)?;

    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(CliError::runtime)?;
    out.write("stability.csv", csv)?;

    #[derive(Serialize)]
    struct StabilityPlot {
        checkpoints: Vec<usize>,
        reference: usize,
        correlation: String,
        traits: BTreeMap<String, Vec<Option<f64>>>,
    }
    let traits: BTreeMap<String, Vec<Option<f64>>> = TraitKind::ALL
        .into_iter()
        .map(|k| (k.abbrev().to_string(), table.cells[k.index()].clone()))
        .collect();
    out.write_json(
        "plot/stability.json",
        &StabilityPlot {
            checkpoints: table.checkpoints.clone(),
            reference,
            correlation: correlation.name().to_string(),
            traits,
        },
    )?;
    println!(
        "stability table over {} users, {} checkpoints",
        corpus.user_count(),
        table.checkpoints.len()
    );
    Ok(())
}

fn load_vocabulary(path: &std::path::Path) -> CliResult<BTreeSet<String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('%') {
        let lexicon = Lexicon::parse(&text)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        Ok(lexicon.vocabulary())
    } else {
        Ok(text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect())
    }
}

pub fn cmd_overlap(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let path_a = config.require(config.vocab_a.as_ref(), "vocab_a", "--vocab-a")?;
    let path_b = config.require(config.vocab_b.as_ref(), "vocab_b", "--vocab-b")?;
    let vocab_a = load_vocabulary(&path_a)?;
    let vocab_b = load_vocabulary(&path_b)?;

    let risk_tags = match &config.risk_words {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::runtime)?;
            let map = inkling_core::corpus::read_word_risk(&text).map_err(CliError::runtime)?;
            Some(map.into_iter().collect::<BTreeMap<String, u8>>())
        }
        None => None,
    };
    let signs = match &config.signs {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(CliError::runtime)?;
            let mut map = BTreeMap::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let parts: Vec<&str> = line.split(',').map(|p| p.trim()).collect();
                if parts.len() != 2 {
                    return Err(CliError::runtime(format!(
                        "{}: line {}: expected `word,sign`",
                        path.display(),
                        i + 1
                    )));
                }
                let sign = match parts[1] {
                    "+" | "pos" | "positive" => CorrelationSign::Positive,
                    "-" | "neg" | "negative" => CorrelationSign::Negative,
                    other => {
                        return Err(CliError::runtime(format!(
                            "{}: line {}: unknown sign {other:?}",
                            path.display(),
                            i + 1
                        )))
                    }
                };
                map.insert(parts[0].to_lowercase(), sign);
            }
            Some(map)
        }
        None => None,
    };

    let report = lexicon_overlap(&vocab_a, &vocab_b, risk_tags.as_ref(), signs.as_ref());
    #[derive(Serialize)]
    struct OverlapJson {
        only_in_a: usize,
        only_in_b: usize,
        in_both: usize,
        disagreement_fraction: Option<f64>,
        shared_tokens: Vec<String>,
        warnings: Vec<String>,
    }
    out.write_json(
        "overlap.json",
        &OverlapJson {
            only_in_a: report.only_in_a,
            only_in_b: report.only_in_b,
            in_both: report.in_both,
            disagreement_fraction: report.disagreement_fraction,
            shared_tokens: report.shared_tokens.iter().cloned().collect(),
            warnings: report.warnings.clone(),
        },
    )?;
    let mut summary = format!(
        "vocabulary a: {} tokens\nvocabulary b: {} tokens\nshared: {}\nonly in a: {}\nonly in b: {}\n",
        report.only_in_a + report.in_both,
        report.only_in_b + report.in_both,
        report.in_both,
        report.only_in_a,
        report.only_in_b,
    );
    if let Some(fraction) = report.disagreement_fraction {
        let _ = writeln!(
            summary,
            "risk/correlation disagreement over shared tokens: {:.1}%",
            100.0 * fraction
        );
    }
    out.write("overlap.txt", &summary)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    print!("{summary}");
    Ok(())
}

pub fn cmd_synth(config: &RunConfig) -> CliResult<()> {
    let out = OutDir::create(config)?;
    let synth = config
        .synth
        .as_ref()
        .ok_or_else(|| CliError::validation("synth requires a [synth] config section"))?;
    let seed = config
        .seed
        .ok_or_else(|| CliError::validation("synth requires --seed"))?;
    let lexicon = load_lexicon(config)?;

    let mut categories = Vec::new();
    for c in &synth.categories {
        let index = lexicon
            .feature_names()
            .iter()
            .position(|n| *n == c.name)
            .ok_or_else(|| {
                CliError::validation(format!("synth category {:?} not in the lexicon", c.name))
            })?;
        let words = lexicon.words_in_category(index);
        if words.is_empty() {
            return Err(CliError::validation(format!(
                "synth category {:?} has no vocabulary",
                c.name
            )));
        }
        categories.push(CategorySpec {
            name: c.name.clone(),
            words,
            base_rate: c.base_rate,
            jitter: c.jitter,
        });
    }
    let filler_words = if synth.filler_words.is_empty() {
        ["vel", "aliqua", "tempor", "laborum", "cupidatat", "pariatur"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        synth.filler_words.clone()
    };

    let spec = PopulationSpec {
        user_count: synth.users,
        messages_per_user: synth.messages_per_user,
        words_per_message: (synth.words_mean, synth.words_spread),
        categories,
        filler_words,
        seed,
    };
    let (corpus, truths) = gen_corpus(&spec).map_err(|e| CliError::validation(e.to_string()))?;

    let (_, matrix) = feature_matrix(&lexicon, &corpus)?;
    let mode = match synth.harm_mode.as_str() {
        "full" => ExpansionMode::Full,
        "univariate" => ExpansionMode::Univariate,
        other => {
            return Err(CliError::validation(format!(
                "unknown harm mode {other:?} (full|univariate)"
            )))
        }
    };
    let term_count =
        inkling_core::regress::enumerate_terms(matrix.feature_count(), synth.harm_degree, mode)
            .len();
    let coefficients = match &synth.harm_coefficients {
        Some(c) => c.clone(),
        None => random_coefficients(term_count, synth.harm_nonzero, synth.harm_scale, seed),
    };
    let planted = PlantedHarm {
        degree: synth.harm_degree,
        mode,
        coefficients,
        noise: synth.harm_noise,
        seed,
    };
    let harm = gen_harm(&matrix, &planted, &corpus).map_err(|e| CliError::validation(e.to_string()))?;

    let mut messages = Vec::new();
    corpus.write_jsonl(&mut messages).map_err(CliError::runtime)?;
    out.write("messages.jsonl", messages)?;
    let mut labels = Vec::new();
    inkling_core::corpus::write_labels(&harm.labels, &mut labels).map_err(CliError::runtime)?;
    out.write("labels.jsonl", labels)?;

    let mut rates = String::from("user,filler");
    for c in &spec.categories {
        let _ = write!(rates, ",{}", c.name);
    }
    rates.push('\n');
    for truth in &truths {
        let _ = write!(rates, "{},{}", truth.user_id, truth.filler_rate);
        for r in &truth.rates {
            let _ = write!(rates, ",{r}");
        }
        rates.push('\n');
    }
    out.write("truth_rates.csv", rates)?;

    let mut targets = String::from("user,target_logit,target_harm\n");
    for (user, &t) in matrix.user_ids.iter().zip(&harm.targets) {
        let _ = writeln!(targets, "{user},{t},{}", expit(t));
    }
    out.write("truth_targets.csv", targets)?;

    #[derive(Serialize)]
    struct PlantedJson<'a> {
        degree: usize,
        mode: &'a str,
        noise: f64,
        coefficients: &'a [f64],
    }
    out.write_json(
        "planted.json",
        &PlantedJson {
            degree: planted.degree,
            mode: synth.harm_mode.as_str(),
            noise: planted.noise,
            coefficients: &planted.coefficients,
        },
    )?;
    println!(
        "generated {} users x {} messages into {}",
        spec.user_count,
        spec.messages_per_user,
        out.path("").display()
    );
    Ok(())
}
