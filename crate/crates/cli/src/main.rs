mod commands;
mod config;
mod fail;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fail::{Fail, R};

#[derive(Debug, Parser)]
#[command(
    name = "blm",
    version,
    about = "Generate, embed, train on and probe Blackbird Language Matrix datasets"
)]
#[command(
    after_help = "BLM_THREADS caps worker threads (default: all processors). Exit status: 0 ok, 1 runtime error, 2 usage error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Instantiate a template into a dataset of BLM instances
    Generate(GenerateArgs),
    /// Build a pattern-balanced sentence bank
    Bank(BankArgs),
    /// Embed the sentences of datasets or banks, or ingest external BLME files
    Embed(EmbedArgs),
    /// Split a dataset or bank into train/dev/test files
    Split(SplitArgs),
    /// Train a solver
    Train {
        #[command(subcommand)]
        solver: TrainCmd,
    },
    /// Score trained models on datasets or banks
    Evaluate(EvaluateArgs),
    /// Latent probes and embedding views
    Probe {
        #[command(subcommand)]
        probe: ProbeCmd,
    },
    /// Summary statistics of dataset files
    Stats(StatsArgs),
    /// Lexicon slot queries and audit application
    Lexicon {
        #[command(subcommand)]
        op: LexiconCmd,
    },
    /// Re-run the command recorded in a manifest and compare output digests
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    #[arg(long)]
    pub task: blm::TaskId,
    #[arg(long = "lang", default_value = "en")]
    pub language: String,
    /// Template file; the shipped template of --task by default
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Lexicon file; the shipped lexicon of --task and --lang by default
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long = "type", default_value = "I")]
    pub variation: blm::Variation,
    /// Number of instances; omit with --exhaustive
    #[arg(long, required_unless_present = "exhaustive", conflicts_with = "exhaustive")]
    pub n: Option<usize>,
    /// Every Type I lexical combination exactly once
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BankArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 4004)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProviderKind {
    /// Deterministic pattern-structured vectors
    Structural,
    /// Vectors read from BLME files given with --from
    Blme,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Dataset or bank files
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "structural")]
    pub provider: ProviderKind,
    #[arg(long = "from")]
    pub from: Vec<PathBuf>,
    /// Seed of the structural embedder
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `{id, text}` lines for external exporters
    #[arg(long)]
    pub texts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 2000)]
    pub train_sample_size: usize,
    /// Keep the whole training portion instead of sampling --train-sample-size
    #[arg(long)]
    pub no_sample: bool,
    /// Banks only: sentences per pattern as train,dev,test
    #[arg(long, value_parser = triple, default_value = "184,45,57")]
    pub per_pattern: [usize; 3],
}

fn triple(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("'{p}' is not a count")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<usize>| format!("expected train,dev,test, got {} values", v.len()))
}

#[derive(Debug, Subcommand)]
pub enum TrainCmd {
    /// Feed-forward baseline on a dataset
    Ffnn(TrainArgs),
    /// Sentence-level VAE on a sentence bank
    VaeSentence(TrainArgs),
    /// Two-level VAE on a dataset
    VaeTwoLevel(TrainArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub emb: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Gradient shards per batch; more than 1 is not bitwise reproducible
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub n_negs: Option<usize>,
    /// Two-level only: start the sentence level from a trained sentence model
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Datasets (ffnn, vae-two-level) or banks (vae-sentence)
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long = "emb", required = true)]
    pub emb: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed for bank triples (sentence models)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum ProbeCmd {
    /// Sweep each latent unit and tabulate predicted patterns
    Traverse(TraverseArgs),
    /// Project latent means to 2-D and measure clustering
    Project(ProjectArgs),
    /// Render one embedding as a 32×24 heatmap
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct TraverseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long = "emb", required = true)]
    pub emb: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sentences to project
    #[arg(long)]
    pub bank: PathBuf,
    /// Training bank for nearest-centroid accuracy
    #[arg(long)]
    pub train_bank: Option<PathBuf>,
    #[arg(long = "emb", required = true)]
    pub emb: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub emb: PathBuf,
    /// Sentence id; the first record by default
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Write the masked slot queries an external fill-mask model should answer
    Slots(LexiconSource),
    /// Add the accepted candidates of an audit file to a lexicon
    ApplyAudit(ApplyAuditArgs),
}

#[derive(Debug, Args)]
pub struct LexiconSource {
    #[arg(long)]
    pub task: blm::TaskId,
    #[arg(long = "lang", default_value = "en")]
    pub language: String,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyAuditArgs {
    #[command(flatten)]
    pub source: LexiconSource,
    #[arg(long)]
    pub audit: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn thread_cap() -> R<Option<usize>> {
    match std::env::var("BLM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Fail::usage(format!(
                "BLM_THREADS must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Parses and runs one invocation; `args` excludes the program name.
pub fn dispatch(args: &[String]) -> R<()> {
    let argv = std::iter::once("blm".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Fail::usage(e.render().to_string()));
        }
    };
    commands::run(cli.cmd, args, thread_cap()?)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let init = thread_cap().and_then(|cap| {
        if let Some(n) = cap {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Fail::runtime("threads", e.to_string()))?;
        }
        Ok(())
    });
    match init.and_then(|_| dispatch(&args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if f.usage && f.message.contains("Usage:") {
                eprint!("{}", f.message);
            }
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code() as u8)
        }
    }
}
