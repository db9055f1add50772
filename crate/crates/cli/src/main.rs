//! `hyperstar`: train, inspect and verify hypercomplex StarGANv2 models.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperstar::verify::Scope;

#[derive(Debug, Parser)]
#[command(name = "hyperstar", version, about = "Hypercomplex StarGANv2 training and tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write losses, checkpoints and sample grids.
    Train(TrainArgs),
    /// Translate one image with a trained checkpoint.
    Translate(TranslateArgs),
    /// Print trainable parameter counts and savings against n = 1.
    ReportParams(ReportArgs),
    /// Run the finite-difference gradient suites.
    GradCheck(GradCheckArgs),
    /// Write weight-density histograms of fresh layers as CSV.
    InitHist(InitHistArgs),
    /// Write the synthetic two-domain dataset as a PNG folder.
    SynthData(SynthArgs),
}

/// Where the configuration comes from, plus flag overrides.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset to start from when no config file is given.
    #[arg(long, default_value = "desk")]
    pub preset: String,
    /// Hypercomplex dimension (overrides the config).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Image folder with one subdirectory per domain.
    #[arg(long, conflicts_with = "synthetic", required_unless_present_any = ["synthetic", "resume"])]
    pub data: Option<PathBuf>,
    /// Train on the generated synthetic dataset.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Iterations to run (default: the remaining iterations of the schedule).
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub sample_every: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Continue from a checkpoint; its stored config is used.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("style").required(true).args(["latent", "reference"]))]
pub struct TranslateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Source image; must match the checkpoint's image size.
    #[arg(long)]
    pub source: PathBuf,
    /// Latent-guided: seed of the latent code.
    #[arg(long)]
    pub latent: Option<u64>,
    /// Reference-guided: style image.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Target domain index.
    #[arg(long)]
    pub domain: usize,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Also list every layer.
    #[arg(long)]
    pub layers: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value = "all")]
    pub scope: Scope,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the leaky-ReLU backward rule (detector sanity check).
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct InitHistArgs {
    /// Comma-separated: real_xavier, xavier_A, quat_pattern_A, rand_integer_A.
    #[arg(long, value_delimiter = ',', default_value = "real_xavier,xavier_A,quat_pattern_A,rand_integer_A")]
    pub schemes: Vec<String>,
    /// `OxI` for a dense layer or `OxIxKxK` for a convolution.
    #[arg(long, default_value = "256x256")]
    pub shape: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub domains: usize,
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Translate(a) => commands::translate(a),
        Command::ReportParams(a) => commands::report_params(a),
        Command::GradCheck(a) => commands::grad_check(a),
        Command::InitHist(a) => commands::init_hist(a),
        Command::SynthData(a) => commands::synth_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
