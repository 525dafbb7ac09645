use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use domain_bridge::baseline::Weighting;
use domain_bridge::blse::{Init, Optimizer};
use domain_bridge::eval::{DivergenceMode, DivergenceVariant};
use domain_bridge::lexicon::MiTarget;
use domain_bridge::synth::{Rotation, TargetSentiment};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "domain-bridge", version, about = "Cross-domain sentiment transfer through jointly projected embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a projection model on source data, optionally scoring a target test set
    Train(TrainArgs),
    /// Label a corpus with a saved model
    Predict(PredictArgs),
    /// Score a predictions file against a gold corpus
    Eval(EvalArgs),
    /// Pairwise corpus divergence or similarity matrix
    Divergence(DivergenceArgs),
    /// Build a projection lexicon
    Lexicon(LexiconArgs),
    /// Generate the seeded two-domain synthetic benchmark
    Synth(SynthArgs),
    /// Train and score the bag-of-words baseline without adaptation
    Baseline(BaselineArgs),
    /// Collect evaluation reports into a long-format CSV
    PlotData(PlotDataArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Eval(_) => "eval",
            Command::Divergence(_) => "divergence",
            Command::Lexicon(_) => "lexicon",
            Command::Synth(_) => "synth",
            Command::Baseline(_) => "baseline",
            Command::PlotData(_) => "plot-data",
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive_int(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a positive finite number"))
    }
}

fn non_negative_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a non-negative finite number"))
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SeedArg {
    /// Random seed
    #[arg(long, env = "DOMAIN_BRIDGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct HyperArgs {
    /// Weight of the sentiment loss; the projection loss gets 1 - alpha
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20, value_parser = positive_int)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50, value_parser = positive_int)]
    pub batch_size: usize,
    /// Learning rate
    #[arg(long, default_value_t = 1e-3, value_parser = positive_real)]
    pub lr: f64,
    /// glorot | identity
    #[arg(long, default_value = "glorot")]
    pub init: Init,
    /// adam | sgd
    #[arg(long, default_value = "adam")]
    pub optimizer: Optimizer,
    /// Project the target side with the source matrix
    #[arg(long)]
    pub ablate_mprime: bool,
    /// Joint space dimension (defaults to the source dimension)
    #[arg(long, value_parser = positive_int)]
    pub joint_dim: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    pub source_emb: PathBuf,
    #[arg(long)]
    pub target_emb: PathBuf,
    /// Labeled source training corpus
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled source dev corpus for early stopping and tuning
    #[arg(long)]
    pub dev: PathBuf,
    /// Labeled target test corpus
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Projection lexicon, one `source target` pair per line
    #[arg(long)]
    pub lexicon: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Alpha values to search; enables tuning
    #[arg(long, value_delimiter = ',', value_parser = unit_interval)]
    pub alpha_grid: Vec<f64>,
    /// Batch sizes to search; enables tuning
    #[arg(long, value_delimiter = ',', value_parser = positive_int)]
    pub batch_grid: Vec<usize>,
    #[arg(long, default_value = "source")]
    pub source_name: String,
    #[arg(long, default_value = "target")]
    pub target_name: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Embeddings of the corpus domain
    #[arg(long)]
    pub target_emb: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Project with the source matrix instead of the target matrix
    #[arg(long)]
    pub source_side: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// One label per line: pos, neg or unlabeled
    #[arg(long)]
    pub predictions: PathBuf,
    /// Gold corpus aligned line by line with the predictions
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "blse")]
    pub system: String,
    #[arg(long, default_value = "source")]
    pub source_name: String,
    #[arg(long, default_value = "target")]
    pub target_name: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DivergenceArgs {
    /// Corpus as `name=path` or `path`; repeat for each domain
    #[arg(long = "corpus", required = true)]
    #[serde(rename = "corpus")]
    pub corpora: Vec<String>,
    /// Size of the shared top-k vocabulary
    #[arg(long, default_value_t = 10_000, value_parser = positive_int)]
    pub k: usize,
    /// jensen_shannon | symmetrized_kl
    #[arg(long, default_value = "jensen_shannon")]
    pub variant: DivergenceVariant,
    /// divergence | similarity
    #[arg(long, default_value = "divergence")]
    pub mode: DivergenceMode,
    #[arg(long, default_value_t = 1e-6, value_parser = positive_real)]
    pub smoothing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Identity pairs for the most frequent words
    Frequency,
    /// Identity pairs for sentiment words present in every corpus
    Sentiment,
    /// Identity pairs for the highest mutual-information pivots
    Mi,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LexiconArgs {
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Corpora for the frequency and sentiment strategies
    #[arg(long = "corpus")]
    #[serde(rename = "corpus")]
    pub corpora: Vec<PathBuf>,
    /// Lexicon size for the frequency strategy
    #[arg(long, default_value_t = 20_000, value_parser = positive_int)]
    pub k: usize,
    /// Word list, one per line, for the sentiment strategy
    #[arg(long)]
    pub sentiment_words: Option<PathBuf>,
    /// Labeled source corpus for the mi strategy
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub source_unlabeled: Option<PathBuf>,
    #[arg(long)]
    pub target_unlabeled: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = positive_int)]
    pub min_count: usize,
    #[arg(long, default_value_t = 500, value_parser = positive_int)]
    pub top_m: usize,
    /// label | domain
    #[arg(long, default_value = "label")]
    pub mi_target: MiTarget,
    /// With --target-emb, drop pairs missing from either space
    #[arg(long, requires = "target_emb")]
    pub source_emb: Option<PathBuf>,
    #[arg(long, requires = "source_emb")]
    pub target_emb: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub dimension: usize,
    #[arg(long, default_value_t = 300)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0.2, value_parser = unit_interval)]
    pub sentiment_fraction: f64,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    /// random_orthogonal | identity
    #[arg(long, default_value = "random_orthogonal")]
    pub rotation: Rotation,
    #[arg(long, default_value_t = 0.05, value_parser = non_negative_real)]
    pub noise: f64,
    #[arg(long, default_value_t = 8)]
    pub sentence_length: usize,
    #[arg(long, default_value_t = 500)]
    pub train_size: usize,
    #[arg(long, default_value_t = 100)]
    pub dev_size: usize,
    #[arg(long, default_value_t = 200)]
    pub test_size: usize,
    /// shared | disjoint
    #[arg(long, default_value = "shared")]
    pub target_sentiment: TargetSentiment,
    #[arg(long, env = "DOMAIN_BRIDGE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BaselineArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// Labeled test corpus, from either domain
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = positive_int)]
    pub max_n: usize,
    #[arg(long, default_value_t = 2, value_parser = positive_int)]
    pub min_df: usize,
    /// presence | count | tfidf
    #[arg(long, default_value = "presence")]
    pub weighting: Weighting,
    /// Regularization values to search
    #[arg(long, value_delimiter = ',', value_parser = positive_real, default_value = "0.001,0.01,0.1,1,10,100")]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value_t = 30, value_parser = positive_int)]
    pub epochs: usize,
    #[arg(long, default_value = "noad")]
    pub system: String,
    #[arg(long, default_value = "source")]
    pub source_name: String,
    #[arg(long, default_value = "target")]
    pub target_name: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    System,
    Source,
    Target,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlotDataArgs {
    /// Evaluation report JSON written by `eval`, `train` or `baseline`
    #[arg(long = "report")]
    #[serde(rename = "report")]
    pub reports: Vec<PathBuf>,
    /// Stable-sort rows by this key
    #[arg(long, value_enum)]
    pub group_by: Option<GroupBy>,
    #[arg(long)]
    pub out: PathBuf,
}
