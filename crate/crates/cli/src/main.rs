//! `inkling` — lexicon-based trait scoring and harm prediction pipeline.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "inkling",
    version,
    about = "Score writing-style traits, cross-tabulate outliers against harm labels,\nand predict per-user harm levels from linguistic features."
)]
struct Cli {
    /// Declarative TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-user stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct InputArgs {
    /// Category dictionary (.dic layout).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Trait weights CSV (feature,Na,Ma,Ps,Op,Co,Ex,Ag,Ne).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Message file (JSON lines: id, user, ts, text).
    #[arg(long)]
    messages: Option<PathBuf>,
    /// Risk-label file (JSON lines: id, levels).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Keyword-labeler CSV used instead of a label file.
    #[arg(long)]
    labeler: Option<PathBuf>,
    /// Keep only users with at least this many messages.
    #[arg(long)]
    min_messages: Option<usize>,
    /// Truncate users to their oldest N messages.
    #[arg(long)]
    max_messages: Option<usize>,
    /// Word-risk CSV (word,level) for the vocabulary-filter experiment.
    #[arg(long)]
    risk_words: Option<PathBuf>,
    /// Risk levels whose words to keep (with --risk-words; default 0,1,4).
    #[arg(long, value_delimiter = ',')]
    keep_levels: Option<Vec<u8>>,
    /// Category ids to remove from the lexicon before scoring.
    #[arg(long, value_delimiter = ',')]
    exclude_categories: Option<Vec<u32>>,
}

impl InputArgs {
    fn apply(self, config: &mut RunConfig) {
        merge(&mut config.lexicon, self.lexicon);
        merge(&mut config.weights, self.weights);
        merge(&mut config.messages, self.messages);
        merge(&mut config.labels, self.labels);
        merge(&mut config.labeler, self.labeler);
        merge(&mut config.min_messages, self.min_messages);
        merge(&mut config.max_messages, self.max_messages);
        merge(&mut config.risk_words, self.risk_words);
        merge(&mut config.keep_levels, self.keep_levels);
        merge(&mut config.exclude_categories, self.exclude_categories);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-user trait scores, boxplot statistics, and outlier partitions.
    Score {
        #[command(flatten)]
        inputs: InputArgs,
        /// Second corpus for side-by-side boxplot data.
        #[arg(long)]
        messages_b: Option<PathBuf>,
    },
    /// Safe/unsafe message ratio tables per trait and outlier group.
    Tables {
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Per-user harm levels and the sorted harm ranking.
    Harm {
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Fit harm-prediction regressors on polynomial feature expansions.
    Regress {
        #[command(flatten)]
        inputs: InputArgs,
        /// Held-out corpus for evaluation.
        #[arg(long)]
        test_messages: Option<PathBuf>,
        /// Labels for the held-out corpus.
        #[arg(long)]
        test_labels: Option<PathBuf>,
        /// ridge | ridge-cv | bayesian-ridge | sgd | huber | all.
        #[arg(long)]
        method: Option<String>,
        /// Polynomial degree (1..=3, default 3).
        #[arg(long)]
        degree: Option<usize>,
        /// Ridge penalty strength.
        #[arg(long)]
        alpha: Option<f64>,
        /// SGD epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Per-feature powers only instead of the full interaction expansion.
        #[arg(long)]
        univariate: bool,
        /// Score the test corpus against the training min-max parameters.
        #[arg(long)]
        frozen_normalization: bool,
    },
    /// Zero-ablation feature contributions of a fitted model.
    Ablate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Fitted model JSON (from `regress`).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Frozen feature min/max CSV (from `regress`/`score`).
        #[arg(long)]
        feature_params: Option<PathBuf>,
    },
    /// Dark-Triad outlier share per harm-ranking percentile bucket.
    Overlay {
        #[command(flatten)]
        inputs: InputArgs,
        /// Number of percentile buckets (default 10).
        #[arg(long)]
        groups: Option<usize>,
        /// Rank by this model's predictions instead of measured harm.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Prefix-size trait-score stability table.
    Stability {
        #[command(flatten)]
        inputs: InputArgs,
        /// Prefix sizes to evaluate (default 1,5,10,25,50,75,100,200,300).
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
        /// Reference history size (default 400).
        #[arg(long)]
        reference: Option<usize>,
        /// pearson | spearman.
        #[arg(long)]
        correlation: Option<String>,
    },
    /// Vocabulary overlap between two word lists or dictionaries.
    Overlap {
        /// First vocabulary: a .dic dictionary or one token per line.
        #[arg(long)]
        vocab_a: Option<PathBuf>,
        /// Second vocabulary.
        #[arg(long)]
        vocab_b: Option<PathBuf>,
        /// Word-risk CSV (word,level) annotating shared tokens.
        #[arg(long)]
        risk_words: Option<PathBuf>,
        /// Correlation-sign CSV (word,+|-) annotating shared tokens.
        #[arg(long)]
        signs: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with planted rates and harm labels.
    Synth {
        /// Category dictionary supplying the vocabulary.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

fn merge<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    merge(&mut config.out, cli.out);
    merge(&mut config.seed, cli.seed);
    merge(&mut config.threads, cli.threads);

    if let Some(threads) = config.threads {
        if threads == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(CliError::runtime)?;
    }

    match cli.command {
        Command::Score { inputs, messages_b } => {
            inputs.apply(&mut config);
            merge(&mut config.messages_b, messages_b);
            commands::cmd_score(&config)
        }
        Command::Tables { inputs } => {
            inputs.apply(&mut config);
            commands::cmd_tables(&config)
        }
        Command::Harm { inputs } => {
            inputs.apply(&mut config);
            commands::cmd_harm(&config)
        }
        Command::Regress {
            inputs,
            test_messages,
            test_labels,
            method,
            degree,
            alpha,
            epochs,
            univariate,
            frozen_normalization,
        } => {
            inputs.apply(&mut config);
            merge(&mut config.test_messages, test_messages);
            merge(&mut config.test_labels, test_labels);
            merge(&mut config.method, method);
            merge(&mut config.degree, degree);
            merge(&mut config.alpha, alpha);
            merge(&mut config.epochs, epochs);
            if univariate {
                config.univariate_expansion = Some(true);
            }
            if frozen_normalization {
                config.frozen_normalization = Some(true);
            }
            commands::cmd_regress(&config)
        }
        Command::Ablate {
            inputs,
            model,
            feature_params,
        } => {
            inputs.apply(&mut config);
            merge(&mut config.model, model);
            merge(&mut config.feature_params, feature_params);
            commands::cmd_ablate(&config)
        }
        Command::Overlay {
            inputs,
            groups,
            model,
        } => {
            inputs.apply(&mut config);
            merge(&mut config.groups, groups);
            merge(&mut config.model, model);
            commands::cmd_overlay(&config)
        }
        Command::Stability {
            inputs,
            checkpoints,
            reference,
            correlation,
        } => {
            inputs.apply(&mut config);
            merge(&mut config.checkpoints, checkpoints);
            merge(&mut config.reference, reference);
            merge(&mut config.correlation, correlation);
            commands::cmd_stability(&config)
        }
        Command::Overlap {
            vocab_a,
            vocab_b,
            risk_words,
            signs,
        } => {
            merge(&mut config.vocab_a, vocab_a);
            merge(&mut config.vocab_b, vocab_b);
            merge(&mut config.risk_words, risk_words);
            merge(&mut config.signs, signs);
            commands::cmd_overlap(&config)
        }
        Command::Synth { lexicon } => {
            merge(&mut config.lexicon, lexicon);
            commands::cmd_synth(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
