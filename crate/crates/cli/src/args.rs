use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "outagecast", version, about = "Outage duration forecasting from onset features and repair logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic corpus (outages, repair logs, hourly weather)
    GenData(GenDataArgs),
    /// Train the onset predictor
    TrainInitial(TrainArgs),
    /// Train the repair-log update model
    TrainRealtime(TrainArgs),
    /// Random hyperparameter search scored by validation NLL
    Search(SearchArgs),
    /// Forecast one outage; repair logs are read from stdin as they arrive
    Predict(PredictArgs),
    /// Score saved models on the test split
    Evaluate(EvalArgs),
    /// Export per-token attention weights for test reports
    Attention(AttentionArgs),
    /// Tabulate the most attended bigrams per head
    Bigrams(BigramArgs),
    /// Compare onset feature sets and the least-squares baseline on the test split
    Report(TrainArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Generator key-value file (n_outages, start, end, cause_prior.<cause>, ...)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// RNG seed (unsigned integer) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the three record files
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of outage records to generate (count)
    #[arg(long, value_name = "COUNT")]
    pub n_outages: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    /// hours still to elapse at each report
    Remaining,
    /// total outage duration in hours
    Total,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Training key-value file (lr, max_epochs, embed, split_spec, search.<key>, ...)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// RNG seed for initialization, shuffling and dropout (unsigned integer) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory holding outages.jsonl, logs.jsonl and weather.jsonl
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Output directory for models, tables and the run manifest
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Split dates as TRAIN_END,VALID_END (YYYY-MM-DD) [default: 2014-03-15,2015-03-15]
    #[arg(long, value_name = "DATES")]
    pub split_spec: Option<String>,
    /// Onset feature set: none, time, weather, time+weather, onset, cause, cause+onset [default: onset]
    #[arg(long, value_name = "SET")]
    pub features: Option<String>,
    /// Add the true-cause one-hot block to the feature set
    #[arg(long)]
    pub include_cause: bool,
    /// Prediction target of the update model [default: remaining]
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Attention heads in the log encoder (1 or 2) [default: 2]
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub heads: Option<u8>,
    /// Adam step size (per update) [default: 0.001]
    #[arg(long, value_name = "RATE")]
    pub lr: Option<f64>,
    /// Upper bound on passes over the training outages (epochs) [default: 30]
    #[arg(long, value_name = "EPOCHS")]
    pub max_epochs: Option<usize>,
    /// Variational dropout probability in [0, 1) [default: 0]
    #[arg(long, value_name = "PROB")]
    pub dropout: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Initial,
    Realtime,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Number of sampled configurations to train (count)
    #[arg(long, default_value_t = 8, value_name = "COUNT")]
    pub trials: usize,
    /// Which model to tune
    #[arg(long, value_enum, default_value_t = ModelKind::Realtime)]
    pub model: ModelKind,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model directory written by train-initial and train-realtime
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    /// Directory holding the corpus that contains the outage
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Outage record id (integer)
    #[arg(long, value_name = "ID")]
    pub outage_id: u64,
    /// Also write predictions.tsv and a manifest here
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Recorded in the manifest; prediction is deterministic (unsigned integer) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model directory written by train-initial and/or train-realtime
    #[arg(long, value_name = "DIR")]
    pub checkpoint: PathBuf,
    /// Directory holding the corpus to score
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Output directory for metric tables and the run manifest
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Split dates as TRAIN_END,VALID_END (YYYY-MM-DD) [default: the split used in training]
    #[arg(long, value_name = "DATES")]
    pub split_spec: Option<String>,
    /// Recorded in the manifest; scoring is deterministic (unsigned integer) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct AttentionArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Export only this outage (integer id, any split) instead of every test outage
    #[arg(long, value_name = "ID")]
    pub outage_id: Option<u64>,
}

#[derive(Args, Debug)]
pub struct BigramArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Rows per head in the table (count)
    #[arg(long, default_value_t = 10, value_name = "COUNT")]
    pub top: usize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::TrainInitial(_) => "train-initial",
            Command::TrainRealtime(_) => "train-realtime",
            Command::Search(_) => "search",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Attention(_) => "attention",
            Command::Bigrams(_) => "bigrams",
            Command::Report(_) => "report",
        }
    }

    /// Directory that receives the manifest, if the command writes one.
    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::GenData(a) => Some(&a.out),
            Command::TrainInitial(a) | Command::TrainRealtime(a) | Command::Report(a) => Some(&a.out),
            Command::Search(a) => Some(&a.train.out),
            Command::Predict(a) => a.out.as_ref(),
            Command::Evaluate(a) => Some(&a.out),
            Command::Attention(a) => Some(&a.eval.out),
            Command::Bigrams(a) => Some(&a.eval.out),
        }
    }
}
