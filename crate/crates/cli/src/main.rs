mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vwp_core::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(
    name = "vwp",
    version,
    about = "Character-grid visual story generation toolkit"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridKind {
    Char,
    Obj,
    Entity,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    Coherence,
    Jaccard,
    Diversity,
    Groundedness,
    Stats,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Anonymize, tokenize and split a raw dataset; build the vocabulary.
    Prepare(PrepareArgs),
    /// Print the character, object or entity grid of one sequence.
    Grid(GridArgs),
    /// Train one model per seed and select epochs by validation METEOR.
    Train(TrainArgs),
    /// Decode stories for every sequence of a dataset.
    Generate(GenerateArgs),
    /// Score hypotheses against references, or aggregate per-seed scores.
    Evaluate(EvaluateArgs),
    /// Corpus coherence, similarity, diversity, groundedness and statistics.
    Analyze(AnalyzeArgs),
    /// Review sample sizes and qualification for crowd workers.
    Plan(PlanArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with header name,male_count,female_count
    #[arg(long)]
    pub genders: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sequences held out for validation
    #[arg(long, default_value_t = 1)]
    pub val: usize,
    /// Sequences held out for test
    #[arg(long, default_value_t = 1)]
    pub test: usize,
    #[arg(long, default_value_t = 1)]
    pub min_freq: usize,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub sequence: String,
    #[arg(long, value_enum, default_value_t = GridKind::Char)]
    pub grid_mode: GridKind,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelOverrides {
    /// key=value file with model, training and decoding settings; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid_mode: Option<String>,
    /// Comma-separated subset of global,char,obj
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_text_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `prepare`
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints and run logs
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelOverrides,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Validation decoding
    #[arg(long)]
    pub decoding: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// vocab.json written by `prepare`
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value = "greedy")]
    pub decoding: String,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_tokens: usize,
    /// JSON {male:[], female:[], locations:[]} used to realize placeholders
    #[arg(long)]
    pub names: Option<PathBuf>,
    /// Generated stories as JSON Lines; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// JSON Lines of {id, hypothesis, references}
    #[arg(long, conflicts_with_all = ["generated", "runs"])]
    pub input: Option<PathBuf>,
    /// Output of `generate`, scored against --dataset
    #[arg(long, requires = "dataset")]
    pub generated: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// JSON {system: [{metric: score}, ...]} to aggregate across seeds
    #[arg(long, requires = "reference")]
    pub runs: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<String>,
    /// Comma-separated metric names to report (B-1..B-4, METEOR, ROUGE-L, CIDEr)
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub what: Analysis,
    /// Annotated corpus JSON Lines
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dataset JSON Lines, for `stats`
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = vwp_core::analytics::DEFAULT_HISTORY)]
    pub history: usize,
    #[arg(long, default_value_t = vwp_core::analytics::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Worker statistics JSON Lines
    #[arg(long, conflicts_with = "n_w", required_unless_present = "n_w")]
    pub workers: Option<PathBuf>,
    /// Stories a worker wrote this batch
    #[arg(long)]
    pub n_w: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

pub fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("VWP_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
