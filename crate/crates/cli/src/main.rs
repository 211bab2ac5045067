mod commands;
mod error;
mod schema;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "regret-pricer", version, about = "Min-max regret envy-free pricing")]
struct Cli {
    /// Print the per-iteration log of the robust solver to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random interval instance.
    Gen(GenArgs),
    /// Solve an instance and write the result JSON.
    Solve(SolveArgs),
    /// Re-check a result against its instance.
    Verify(VerifyArgs),
    /// Run the averaged experiment and emit CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 10.0)]
    pub xmin: f64,
    #[arg(long, default_value_t = 500.0)]
    pub xmax: f64,
    #[arg(long, default_value_t = 30.0)]
    pub delta: f64,
    /// Falls back to REGRET_PRICER_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Robust,
    Det,
    Heuristic,
    Oracle,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Robust)]
    pub mode: Mode,
    /// Absolute gap between the regret bounds (robust mode).
    #[arg(long, default_value_t = regret_pricer::robust::DEFAULT_GAP)]
    pub eps: f64,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Valuations used by det and heuristic on interval instances:
    /// `lower`, `upper` or a deterministic instance file.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the (initial) MILP in text form.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
    /// Report zero wall time so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    /// table1-row1 … table1-row4
    #[arg(long, conflicts_with_all = ["xmin", "xmax", "delta"])]
    pub preset: Option<String>,
    #[arg(long, requires_all = ["xmax", "delta"])]
    pub xmin: Option<f64>,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated sizes, e.g. `5,10`.
    #[arg(long, default_value = "5")]
    pub k_list: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = regret_pricer::robust::DEFAULT_GAP)]
    pub eps: f64,
    /// Seconds per instance.
    #[arg(long, default_value_t = regret_pricer::bench::DEFAULT_TIME_LIMIT.as_secs_f64())]
    pub time_limit: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// First seed; repetition r uses seed + r. Falls back to
    /// REGRET_PRICER_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one JSON record per run into this directory.
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| writeln!(buf, "{}", record.args()))
        .init();
    let outcome = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Solve(a) => commands::solve(a),
        Command::Verify(a) => commands::verify(a),
        Command::Bench(a) => commands::bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
