//! `ssmc` command-line driver.
//!
//! Exit codes: 0 on success, 2 when input data is missing or malformed,
//! 3 for invalid parameters (including unknown flags).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ssmc", version, about = "Sparse submodule clustering of image tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster the samples of one input and write labels plus solver diagnostics.
    Cluster(ClusterArgs),
    /// Run the clustering once per lambda_g in a grid; writes JSON and CSV.
    Sweep(SweepArgs),
    /// Generate a synthetic union of submodules, cluster it and time the run.
    Synth(SynthArgs),
    /// Evaluate the sufficient condition for exact recovery, per cluster.
    Check(CheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// Native tensor file (magic TSR1, little-endian dims and f64 values).
    Tsr1,
    /// IDX3 image file; image rows become H and image columns become depth.
    Idx,
    /// Directory of binary PGM (P5) images, loaded in file-name order.
    Pgmdir,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Input file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value_t = Format::Tsr1)]
    pub format: Format,
    /// PGM only: keep every n-th pixel row and column.
    #[arg(long, default_value_t = 1)]
    pub decimate: usize,
    /// PGM only: inclusive 1-based column range A:B kept after decimation.
    #[arg(long, value_name = "A:B")]
    pub crop: Option<String>,
    /// IDX only: use the first N images (and labels).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Ground-truth labels (JSON array, JSON object with "labels", or IDX1).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Weight on the horizontal-slice group norm; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    pub lambda_h: f64,
    /// Restrict coefficients to affine combinations.
    #[arg(long)]
    pub affine: bool,
    /// Scale every sample to unit Frobenius norm before solving.
    #[arg(long)]
    pub normalize_columns: bool,
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// ADMM iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Absolute stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_abs: f64,
    /// Relative stopping tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol_rel: f64,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Weight on the reconstruction error.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_g: f64,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// Seed for k-means.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the N×N affinity as an N×N×1 TSR1 file.
    #[arg(long)]
    pub affinity_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated lambda_g values, e.g. 1e-2,1,1e2.
    #[arg(long)]
    pub grid: String,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// Seed for k-means.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV path; defaults to the JSON path with a .csv extension.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SynthDataArgs {
    /// Rows of every sample.
    #[arg(long, default_value_t = 28)]
    pub h: usize,
    /// Tube length.
    #[arg(long, default_value_t = 28)]
    pub depth: usize,
    /// Number of submodules.
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    /// Submodular dimension of every cluster.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Samples per cluster.
    #[arg(long, default_value_t = 10)]
    pub per_cluster: usize,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Draw each sample as a circular depth shift of a cluster prototype.
    #[arg(long)]
    pub shift_model: bool,
    /// Gaussian jitter on the shift coefficients.
    #[arg(long, default_value_t = 0.0)]
    pub shift_jitter: f64,
    /// Translate every cluster by a random offset.
    #[arg(long)]
    pub affine_data: bool,
    /// Seed for data generation and k-means.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub data: SynthDataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Weight on the reconstruction error.
    #[arg(long, default_value_t = 100.0)]
    pub lambda_g: f64,
    /// Number of clusters to find (defaults to --clusters).
    #[arg(long)]
    pub k: Option<usize>,
    /// Result JSON path; it omits the wall time so reruns are byte-identical.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the generated tensor as TSR1.
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    /// Also write the ground-truth labels as JSON.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// TSR1 input; when omitted a synthetic instance is generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Labels for --input (required with it).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub data: SynthDataArgs,
    /// Check only this cluster index (all clusters when omitted).
    #[arg(long)]
    pub cluster: Option<usize>,
    /// Maximum number of subtensors searched per cluster.
    #[arg(long, default_value_t = ssmc::theory::DEFAULT_SUBTENSOR_BUDGET)]
    pub budget: usize,
    /// Monte-Carlo trials per coherence estimate.
    #[arg(long, default_value_t = ssmc::theory::DEFAULT_COHERENCE_TRIALS)]
    pub trials: usize,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.command {
        Command::Cluster(args) => commands::cluster(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Synth(args) => commands::synth(&args),
        Command::Check(args) => commands::check(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
