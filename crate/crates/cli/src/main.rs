use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_bm_cli::{execute, CommandName};

#[derive(Parser)]
#[command(
    name = "spectral-bm",
    version,
    about = "Numerical harnesses for spectral Brunn-Minkowski inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest eigenpairs of one instance.
    Eig(RunArgs),
    /// Convexity of the first eigenvalue along a Minkowski interpolation.
    BmVerify(RunArgs),
    /// Classical Brunn-Minkowski on exact volumes.
    VolBm(RunArgs),
    /// Gaussian Brunn-Minkowski by quadrature.
    GaussBm(RunArgs),
    /// Prekopa-Leindler audit, optionally with a marginal check.
    PlCheck(RunArgs),
    /// Log-concavity of the partition function in r.
    Zconc(RunArgs),
    /// Positivity and log-concavity of the ground state.
    Groundstate(RunArgs),
    /// Feynman-Kac Monte Carlo estimate.
    FkEstimate(RunArgs),
    /// Partition function by spectral sum and kernel diagonal.
    Trace(RunArgs),
    /// Golden-Thompson on random matrices.
    GtCheck(RunArgs),
    /// Small-time sup of the kernel diagonal.
    UltraProbe(RunArgs),
    /// Hardy inequality on a 3D grid function.
    Hardy(RunArgs),
}

impl Command {
    fn split(self) -> (CommandName, RunArgs) {
        match self {
            Command::Eig(a) => (CommandName::Eig, a),
            Command::BmVerify(a) => (CommandName::BmVerify, a),
            Command::VolBm(a) => (CommandName::VolBm, a),
            Command::GaussBm(a) => (CommandName::GaussBm, a),
            Command::PlCheck(a) => (CommandName::PlCheck, a),
            Command::Zconc(a) => (CommandName::Zconc, a),
            Command::Groundstate(a) => (CommandName::Groundstate, a),
            Command::FkEstimate(a) => (CommandName::FkEstimate, a),
            Command::Trace(a) => (CommandName::Trace, a),
            Command::GtCheck(a) => (CommandName::GtCheck, a),
            Command::UltraProbe(a) => (CommandName::UltraProbe, a),
            Command::Hardy(a) => (CommandName::Hardy, a),
        }
    }
}

fn main() -> ExitCode {
    let (cmd, args) = Cli::parse().command.split();
    env_logger::Builder::new()
        .filter_level(if args.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("cli error in field `--threads`: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cmd, &args.config, &args.out, args.seed) {
        Ok(status) => {
            log::info!("{} finished: {:?}", cmd.as_str(), status);
            ExitCode::from(status.code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
