//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{EncoderSource, RunConfig, Task, Tokenizer};
use crate::error::Result;
use crate::pipeline::{self, Encoder, Report};

#[derive(Debug, Parser)]
#[command(name = "w2c", version, about = "Word-context-coupled semantic space pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Run configuration: a JSON file plus per-field overrides. Flags win.
#[derive(Debug, Default, Clone, Args)]
pub struct ConfigArgs {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub task: Option<Task>,
    #[arg(long, global = true, value_enum)]
    pub tokenizer: Option<Tokenizer>,
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    /// AKN shrink rate
    #[arg(long, global = true)]
    pub sr: Option<f64>,
    #[arg(long = "encoder-source", global = true, value_enum)]
    pub encoder_source: Option<EncoderSource>,
    /// Toy encoder hidden size
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    /// Coordinate size of the semantic space
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Number of contexts
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub encoder_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub encoder_lr: Option<f64>,
    #[arg(long, global = true)]
    pub mapper_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub mapper_lr: Option<f64>,
    /// Downstream epochs
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Downstream learning rate
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub max_elements: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(
            seed => seed, task => task, tokenizer => tokenizer, min_count => min_count,
            sr => shrink_rate, encoder_source => encoder, hidden => hidden, n => n,
            encoder_epochs => encoder_epochs, encoder_lr => encoder_lr,
            mapper_epochs => mapper_epochs, mapper_lr => mapper_lr, lr => downstream_lr,
            max_iter => kmeans_max_iter, restarts => kmeans_restarts, max_elements => kmeans_max_elements,
        );
        if self.k.is_some() {
            c.k = self.k;
        }
        if self.epochs.is_some() {
            c.downstream_epochs = self.epochs;
        }
        c.resolved()
    }
}

/// Feature inputs for one dataset.
#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Toy encoder checkpoint
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// W2CE features aligned with the dataset
    #[arg(long)]
    pub features: Option<PathBuf>,
}

impl FeatureArgs {
    fn pick(&self, cfg: &RunConfig) -> Result<Encoder> {
        Encoder::pick(cfg, self.encoder.as_deref(), self.features.as_deref())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and the association network from a corpus
    BuildAkn {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary output (default: OUT with extension .vocab)
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Labeled datasets whose texts also enter the vocabulary
        #[arg(long)]
        vocab_from: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fine-tune the toy encoder (or read features) and train the mapping network
    TrainMapper {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        akn: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Labeled data for toy encoder fine-tuning
        #[arg(long)]
        train: Option<PathBuf>,
        /// Where the fine-tuned toy encoder is written
        #[arg(long)]
        encoder_out: Option<PathBuf>,
        /// W2CE features aligned with the corpus
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Cluster word elements into contexts
    Cluster {
        /// Space checkpoint to write
        #[arg(long)]
        space: PathBuf,
        /// Cluster these points (one per line) instead of mapped word elements
        #[arg(long, conflicts_with_all = ["mapper", "corpus"])]
        elements: Option<PathBuf>,
        #[arg(long, required_unless_present = "elements")]
        mapper: Option<PathBuf>,
        #[arg(long, required_unless_present = "elements")]
        corpus: Option<PathBuf>,
        #[arg(long, required_unless_present = "elements")]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the merge matrix and the task head
    Train {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mapper: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        /// Trained space checkpoint
        #[arg(long)]
        space_out: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a trained model on labeled data
    Eval {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mapper: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rank contexts by sentiment, reverse them and measure the prediction flip
    Interpret {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mapper: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Labeled data used to rank contexts
        #[arg(long)]
        rank_data: PathBuf,
        /// W2CE features aligned with the ranking data
        #[arg(long)]
        rank_features: Option<PathBuf>,
        /// Labeled data the predictions are compared on
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        /// Per-context affinity table
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn finish(report: Report, path: Option<&Path>) -> Result<Report> {
    if let Some(p) = path {
        report.save(p)?;
    }
    Ok(report)
}

/// Runs one command and returns its report.
pub fn run(cli: Cli) -> Result<Report> {
    match cli.command {
        Command::BuildAkn { corpus, out, vocab, vocab_from, report, cfg } => {
            let cfg = cfg.resolve()?;
            let vocab_out = vocab.unwrap_or_else(|| out.with_extension("vocab"));
            let a = pipeline::BuildAkn { corpus: &corpus, out: &out, vocab_out: &vocab_out, vocab_from: &vocab_from };
            finish(pipeline::build_akn(&cfg, &a)?, report.as_deref())
        }
        Command::TrainMapper { corpus, akn, vocab, train, encoder_out, features, out, report, cfg } => {
            let cfg = cfg.resolve()?;
            let a = pipeline::TrainMapper {
                corpus: &corpus,
                akn: &akn,
                vocab: &vocab,
                train: train.as_deref(),
                encoder_out: encoder_out.as_deref(),
                features: features.as_deref(),
                out: &out,
            };
            finish(pipeline::train_mapper(&cfg, &a)?, report.as_deref())
        }
        Command::Cluster { space, elements, mapper, corpus, vocab, features, report, cfg } => {
            let cfg = cfg.resolve()?;
            let r = match (elements, mapper, corpus, vocab) {
                (Some(points), ..) => pipeline::cluster_points(&cfg, &points, &space)?,
                (None, Some(mapper), Some(corpus), Some(vocab)) => {
                    let a = pipeline::Cluster {
                        mapper: &mapper,
                        corpus: &corpus,
                        vocab: &vocab,
                        encoder: features.pick(&cfg)?,
                        out: &space,
                    };
                    pipeline::cluster(&cfg, &a)?
                }
                _ => unreachable!("clap enforces --elements or --mapper/--corpus/--vocab"),
            };
            finish(r, report.as_deref())
        }
        Command::Train { space, mapper, vocab, train, features, space_out, head, report, cfg } => {
            let cfg = cfg.resolve()?;
            let a = pipeline::Train {
                space: &space,
                mapper: &mapper,
                vocab: &vocab,
                train: &train,
                encoder: features.pick(&cfg)?,
                space_out: &space_out,
                head_out: &head,
            };
            finish(pipeline::train(&cfg, &a)?, report.as_deref())
        }
        Command::Eval { space, mapper, head, vocab, data, features, report, cfg } => {
            let cfg = cfg.resolve()?;
            let a = pipeline::Eval {
                space: &space,
                mapper: &mapper,
                head: &head,
                vocab: &vocab,
                data: &data,
                encoder: features.pick(&cfg)?,
            };
            finish(pipeline::eval(&cfg, &a)?, report.as_deref())
        }
        Command::Interpret { space, mapper, head, vocab, rank_data, rank_features, data, features, csv, report, cfg } => {
            let cfg = cfg.resolve()?;
            let rank = FeatureArgs { encoder: features.encoder.clone(), features: rank_features };
            let a = pipeline::Interpret {
                space: &space,
                mapper: &mapper,
                head: &head,
                vocab: &vocab,
                rank_data: &rank_data,
                rank_encoder: rank.pick(&cfg)?,
                data: &data,
                encoder: features.pick(&cfg)?,
                csv: csv.as_deref(),
            };
            finish(pipeline::interpret(&cfg, &a)?, report.as_deref())
        }
    }
}

/// One-line stdout summary of a report.
pub fn summary(report: &Report) -> String {
    let r = &report.results;
    let pick = |keys: &[&str]| {
        keys.iter()
            .filter_map(|k| r.get(*k).map(|v| format!("{k}={v}")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let body = match report.command.as_str() {
        "build-akn" => pick(&["vocab_size", "sentences", "pairs"]),
        "train-mapper" => {
            let last = |key: &str| r["mapper"][key].as_array().and_then(|a| a.last().cloned());
            format!(
                "sentences={} alignment={} reconstruction={}",
                r["mapper"]["sentences"],
                last("epoch_alignment").unwrap_or_default(),
                last("epoch_reconstruction").unwrap_or_default()
            )
        }
        "cluster" => pick(&["elements", "k", "objective", "iterations", "converged"]),
        "train" => format!(
            "examples={} final_loss={}",
            r["examples"],
            r["epoch_losses"].as_array().and_then(|a| a.last().cloned()).unwrap_or_default()
        ),
        "eval" if r.get("accuracy").is_some() => pick(&["examples", "accuracy"]),
        "eval" => format!(
            "examples={} word_correction_f1={} sentence_correction_f1={}",
            r["examples"], r["word"]["correction"]["f1"], r["sentence"]["correction"]["f1"]
        ),
        "interpret" => pick(&["examples", "oa", "ca", "ra"]),
        _ => String::new(),
    };
    format!("{}: {body}", report.command)
}
