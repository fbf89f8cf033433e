//! `lrt`: project, repair and evaluate LiDAR scans from the command line.

mod eval;
mod exit;
mod pipeline;
mod project;
mod tensors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrt_core::losses::selftest::{run_selftest, SelftestConfig};

use exit::{CliError, Code};

#[derive(Parser)]
#[command(name = "lrt", version, about = "LiDAR range-image toolkit")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "LRT_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project scans to NPY range-image tensors.
    Project(ProjectArgs),
    /// Project, repair stripes, estimate normals and extract boundaries.
    Pipeline(PipelineArgs),
    /// Per-class IoU and mIoU of predicted against ground-truth label files.
    Eval(EvalArgs),
    /// Check every loss kernel's gradient and the Lovász oracle.
    LossSelftest(SelftestArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "input")]
struct ScanInput {
    /// A single `.bin` scan.
    #[arg(long)]
    scan: Option<PathBuf>,
    /// Directory of `.bin` scans.
    #[arg(long)]
    scan_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    input: ScanInput,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory of `.label` files named like the scans.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    scan_dir: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Copy the nearest valid label into repaired pixels [config default: true].
    #[arg(long, action = clap::ArgAction::Set)]
    fill_labels: Option<bool>,
    /// Crop every output to this many columns.
    #[arg(long)]
    crop_width: Option<usize>,
    /// Crop offset seed; without one the crop is centred.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Count classes absent from both sides as IoU 0 instead of skipping them.
    #[arg(long)]
    zero_absent: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random evaluation points per kernel.
    #[arg(long, default_value_t = 100)]
    points: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => return report(CliError::new(Code::Config, format!("thread pool: {e}"))),
    };
    let result = pool.install(|| match &cli.command {
        Command::Project(a) => project::run(a),
        Command::Pipeline(a) => pipeline::run(a),
        Command::Eval(a) => eval::run(a),
        Command::LossSelftest(a) => selftest(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("lrt: {}", e.message);
    ExitCode::from(e.code as u8)
}

fn selftest(a: &SelftestArgs) -> Result<(), CliError> {
    let cfg = SelftestConfig {
        seed: a.seed,
        points_per_kernel: a.points,
        ..SelftestConfig::default()
    };
    let report = run_selftest(&cfg).map_err(|e| CliError::new(Code::Partial, e.to_string()))?;
    println!("{}", exit::to_json(&report)?);
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .kernels
            .iter()
            .filter(|k| !k.passed)
            .map(|k| k.name.as_str())
            .chain(report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()))
            .collect();
        Err(CliError::new(Code::Partial, format!("failed checks: {}", failed.join(", "))))
    }
}
