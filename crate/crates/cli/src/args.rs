use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "slade", version, about = "Streaming anomaly detection on dynamic graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a raw dataset into the normalized edge CSV and print its statistics.
    Ingest(IngestArgs),
    /// Generate a community-structured synthetic stream with normal labels.
    Generate(GenerateArgs),
    /// Inject burst anomalies into the final part of a clean stream.
    Inject(InjectArgs),
    /// Train a model on the training split and write a checkpoint.
    Train(TrainArgs),
    /// Score edges with a trained checkpoint.
    Score(ScoreArgs),
    /// Compute AUC and AP for scored edges.
    Eval(EvalArgs),
    /// Time streaming inference over growing prefixes.
    Bench(BenchArgs),
    /// Verify analytic gradients of every component by finite differences.
    Gradcheck(GradcheckArgs),
    /// Split scores by anomaly type for distribution plots.
    ExportDist(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// user,item,timestamp,state_label,features... with a header
    Jodie,
    /// source,target,rating,time without a header
    Signed,
    /// whitespace-separated src dst time
    Emaileu,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw input file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Normalized edge CSV to write; a node-map sidecar is written beside it.
    #[arg(long)]
    pub output: PathBuf,
    /// Signed networks: keep the rater as source (labels are then unset).
    #[arg(long)]
    pub no_reverse: bool,
    /// Email logs: keep every row instead of the default active window.
    #[arg(long)]
    pub no_window: bool,
    /// Email logs: open time window as LO,HI.
    #[arg(long, value_parser = parse_window, conflicts_with = "no_window")]
    pub window: Option<(f64, f64)>,
    /// Also write the statistics JSON here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value_t = 100_000)]
    pub edges: usize,
    #[arg(long, default_value_t = 8)]
    pub communities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hijack,
    New,
}

#[derive(Args, Debug)]
pub struct InjectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Edge CSV to write; tags go to the `.tags.csv` sidecar.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, default_value_t = 10)]
    pub anomalous_nodes: usize,
    #[arg(long, default_value_t = 10)]
    pub burst_destinations: usize,
    #[arg(long, default_value_t = 300.0)]
    pub jitter_seconds: f64,
    #[arg(long, default_value_t = 0.01)]
    pub target_ratio: f64,
    #[arg(long, default_value_t = 0.10)]
    pub eval_region_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Configuration sources shared by commands that build a run config.
/// Precedence: flags, then `SLADE_SEED`, then the file, then defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set lr=0.001`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Normalized edge CSV (overrides the `data` key).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for `model.ckpt`, `losses.csv` and `config.txt`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    /// Final chronological test split, after warming memory on the rest.
    Test,
    /// Every edge, from empty memory.
    All,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Score CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Edges per memory update during inference (defaults to the config).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Also emit unlabeled records for destination endpoints.
    #[arg(long)]
    pub score_destinations: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Existing score CSV; otherwise `--checkpoint` and `--data` are scored first.
    #[arg(long, conflicts_with_all = ["checkpoint", "data"])]
    pub scores: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Directory for `metrics.json` (and `scores.csv` when scoring).
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Prefix fractions of the stream.
    #[arg(long, default_value = "0.2,0.4,0.6,0.8,1.0", value_delimiter = ',')]
    pub prefixes: Vec<f64>,
    /// Timings per prefix; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Latency CSV to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    SignFlip,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report as JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Corrupt analytic gradients to confirm the check can fail.
    #[arg(long, value_enum, hide = true)]
    pub fault: Option<FaultArg>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Tags CSV; every edge is treated as NORMAL when absent.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Directory for `type_scores.csv` and `type_series.csv`.
    #[arg(long)]
    pub output_dir: PathBuf,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err("LO must be below HI".into())
    }
}
