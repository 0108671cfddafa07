//! `qqr` command-line front end: generate problems, synthesize feedback laws,
//! simulate them, and tabulate timings and cross-method disparities.

mod bench;
mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qqr::QqrError;

#[derive(Parser, Debug)]
#[command(
    name = "qqr",
    version,
    about = "Polynomial feedback synthesis for quadratic-quadratic regulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a system file.
    #[command(subcommand)]
    Generate(GenerateKind),
    /// Compute value-function and feedback coefficients.
    Solve(SolveArgs),
    /// Integrate the closed loop and compare the realized cost with the value function.
    Simulate(SimulateArgs),
    /// Generate and solve a range of sizes, writing a timing/disparity table.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum GenerateKind {
    /// Uniform [0, 1) entries in A, B, N with Q = I, R = I.
    Random(RandomArgs),
    /// Finite-element Burgers equation with distributed patch controls.
    Burgers(BurgersArgs),
}

#[derive(Args, Debug)]
struct RandomArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BurgersArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Recursive,
    Full,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    system: PathBuf,
    /// Feedback degree, 1 to 4.
    #[arg(long)]
    degree: usize,
    #[arg(long, value_enum, default_value_t = Method::Recursive)]
    method: Method,
    /// Memory cap in bytes for the dense Kronecker-sum matrix of `--method full`.
    #[arg(long, default_value_t = qqr::kron::DEFAULT_MEMORY_CAP)]
    cap_bytes: u64,
    /// Coefficient file; timings go to the `.run.json` sidecar.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Direction {
    Random,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    coefficients: PathBuf,
    /// Explicit initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with_all = ["scale", "direction"])]
    x0: Option<Vec<f64>>,
    /// Norm of a random initial state.
    #[arg(long, requires = "direction")]
    scale: Option<f64>,
    #[arg(long, value_enum, requires = "scale")]
    direction: Option<Direction>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use only the feedback terms up to this degree.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long = "T", visible_alias = "horizon", default_value_t = 20.0)]
    t_final: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Trajectory CSV.
    #[arg(long)]
    out: PathBuf,
    /// Comparison JSON; defaults to the `.comparison.json` sidecar of `--out`.
    #[arg(long)]
    comparison: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Problem {
    Random,
    Burgers,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Problem::Random)]
    problem: Problem,
    /// Comma-separated state dimensions.
    #[arg(long, value_delimiter = ',', conflicts_with = "range")]
    sizes: Option<Vec<usize>>,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long)]
    degree: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Recursive, Method::Full])]
    methods: Vec<Method>,
    #[arg(long, default_value_t = qqr::kron::DEFAULT_MEMORY_CAP)]
    cap_bytes: u64,
    /// Table CSV; per-row run records go to the `.run.json` sidecar.
    #[arg(long)]
    out: PathBuf,
}

/// Reasons a command stops, each with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core {
        stage: &'static str,
        error: QqrError,
    },
}

impl Failure {
    pub fn core(stage: &'static str) -> impl FnOnce(QqrError) -> Failure {
        move |error| Failure::Core { stage, error }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core { error, .. } => match error {
                QqrError::SizeLimit { .. } => 4,
                e if e.is_numerical() => 3,
                QqrError::Contract { .. } | QqrError::Parse { .. } | QqrError::Json(_) => 2,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Core {
                error: QqrError::SizeLimit { predicted, cap },
                ..
            } => {
                write!(
                    f,
                    "not computed: size (dense storage {predicted} bytes exceeds cap {cap} bytes)"
                )
            }
            Failure::Core { stage, error } => write!(f, "error in {stage}: {error}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core {
            stage: "output",
            error: QqrError::Io(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(GenerateKind::Random(a)) => commands::generate_random(&a),
        Command::Generate(GenerateKind::Burgers(a)) => commands::generate_burgers(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
