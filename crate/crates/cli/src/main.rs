//! `quanv`: quanvolutional feature extraction, training, evaluation and
//! comparison against a raw-pixel baseline.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unusable input files.
    Input(String),
    /// Failure while producing outputs.
    Runtime(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<quanv_core::Error> for CliError {
    fn from(e: quanv_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "quanv",
    version,
    about = "Quanvolutional vs classical image classification runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the quanvolution over a dataset and write a feature cache.
    Extract(ExtractArgs),
    /// Train the QNN head on a feature cache or the baseline on raw pixels.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare a QNN run history with a baseline run history.
    Compare(CompareArgs),
    /// Print headers of a cache, checkpoint or circuit file.
    Inspect(InspectArgs),
    /// Write the seeded ansatz as circuit JSON.
    Circuit(CircuitArgs),
    /// Generate the separable synthetic dataset as IDX files.
    Synth(SynthArgs),
    /// Convert a label-first CSV dataset to IDX.
    Convert(ConvertArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Qnn,
    Baseline,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// IDX image file, or the CSV file when --format csv.
    #[arg(long)]
    pub images: PathBuf,
    /// IDX label file (unused for CSV).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: Format,
    /// Image height for CSV input.
    #[arg(long, default_value_t = 28)]
    pub height: usize,
    /// Image width for CSV input.
    #[arg(long, default_value_t = 28)]
    pub width: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ansatz seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Random layers in the ansatz; 0 gives the closed-form cos(pi x) features.
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = one per core). Never changes the output.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// QNN mode: training feature cache.
    #[arg(long)]
    pub train_cache: Option<PathBuf>,
    /// QNN mode: validation feature cache.
    #[arg(long)]
    pub val_cache: Option<PathBuf>,
    /// QNN mode: expected ansatz seed; the caches must carry this stamp.
    #[arg(long)]
    pub seed: Option<u64>,
    /// QNN mode: expected ansatz layers.
    #[arg(long)]
    pub layers: Option<u32>,
    /// Baseline mode: training images.
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    /// Baseline mode: validation images.
    #[arg(long)]
    pub val_images: Option<PathBuf>,
    #[arg(long)]
    pub val_labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: Format,
    #[arg(long, default_value_t = 28)]
    pub height: usize,
    #[arg(long, default_value_t = 28)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Training samples drawn from the training split (0 = all).
    #[arg(long, default_value_t = 50)]
    pub train_n: usize,
    /// Validation samples drawn from the validation split (0 = all).
    #[arg(long, default_value_t = 30)]
    pub val_n: usize,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Hidden units in the dense head.
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature cache to score (QNN checkpoints).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Raw images to score (baseline checkpoints).
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: Format,
    #[arg(long, default_value_t = 28)]
    pub height: usize,
    #[arg(long, default_value_t = 28)]
    pub width: usize,
    /// Score a seeded subsample of this size (0 = all).
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Where to write the JSON report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// QNN history.json.
    #[arg(long)]
    pub qnn: PathBuf,
    /// Baseline history.json.
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
    /// Write the feature map at --index as one PGM per channel.
    #[arg(long)]
    pub export_pgm: bool,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Print the gate list (circuit files, or the ansatz a cache is stamped with).
    #[arg(long)]
    pub show_circuit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CircuitArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub qubits: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 28)]
    pub side: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, default_value_t = 28)]
    pub height: usize,
    #[arg(long, default_value_t = 28)]
    pub width: usize,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

pub fn run(cli: Cli, args: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(a) => commands::extract(&a, args),
        Command::Train(a) => commands::train(&a, args),
        Command::Eval(a) => commands::eval(&a, args),
        Command::Compare(a) => commands::compare(&a, args),
        Command::Inspect(a) => commands::inspect(&a, args),
        Command::Circuit(a) => commands::circuit(&a, args),
        Command::Synth(a) => commands::synth(&a, args),
        Command::Convert(a) => commands::convert(&a, args),
        Command::Replay(a) => {
            let m = manifest::RunManifest::read(&a.manifest)?;
            let argv = std::iter::once("quanv".to_string()).chain(m.args.iter().cloned());
            let replayed = Cli::try_parse_from(argv)
                .map_err(|e| CliError::input(format!("manifest arguments do not parse: {e}")))?;
            if matches!(replayed.command, Command::Replay(_)) {
                return Err(CliError::input("refusing to replay a replay"));
            }
            run(replayed, &m.args)
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(cli, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
