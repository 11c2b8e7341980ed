//! The `alecton` command-line harness.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, missing inputs,
//! infeasible step size), 2 for runtime failures and failed demo checks.

mod commands;
pub mod truth_file;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::execute;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] alecton::Error),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "alecton", version, about = "Low-rank PSD recovery with Alecton, plus theory checks")]
pub struct Cli {
    /// Worker threads for trial- and grid-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random spectral ground truth.
    Synth(SynthArgs),
    /// Recover the top-p subspace and write its convergence trace.
    Run(RunArgs),
    /// Recover --p components one at a time by deflation.
    Oaat(RunArgs),
    /// Tabulate the initialization term Z_p over a grid of gamma.
    Zp(ZpArgs),
    /// Run one of the counterexample or lower-bound demonstrations.
    Demo(DemoArgs),
    /// Load a triplet file and report its statistics.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Coherence {
    RandomOrthogonal,
    BasisAligned,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rank: usize,
    /// Comma-separated, positive and descending (default: rank, rank-1, ..., 1).
    #[arg(long, value_delimiter = ',')]
    pub eigenvalues: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Coherence::RandomOrthogonal)]
    pub coherence: Coherence,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Exact,
    Entrywise,
    Rect,
    Trace,
    TraceSym,
    Subspace,
    SubspaceSplit,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Spectral ground-truth file written by `synth`.
    #[arg(long, conflicts_with = "triplets", required_unless_present = "triplets")]
    pub truth: Option<PathBuf>,
    /// Rectangular `row,col,value` file; implies --sampler rect.
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    /// Triplet row count (default: largest row index + 1).
    #[arg(long, requires = "triplets")]
    pub rows: Option<usize>,
    /// Triplet column count (default: largest column index + 1).
    #[arg(long, requires = "triplets")]
    pub cols: Option<usize>,
    /// Sampling model (default: entrywise, or rect for --triplets).
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    /// Revealed coordinates per subspace sample (default: n).
    #[arg(long)]
    pub m_keep: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace CSV (for `oaat`, the per-component CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the recovered factor as whitespace-separated rows.
    #[arg(long)]
    pub factor_out: Option<PathBuf>,
    /// Step size (default: the largest with gamma <= 1; required for --sampler exact).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Angular steps (default: ceil(50 n ln n / epsilon)).
    #[arg(long)]
    pub k_steps: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub l_steps: usize,
    /// Recovered rank; for `oaat`, the number of components.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Target rank (default: p).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_add: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_mul: f64,
    /// Reorthonormalize every this many steps; 0 disables it.
    #[arg(long, default_value_t = 1000)]
    pub renorm_every: usize,
    /// Trace record interval (default: max(1, K/1000)).
    #[arg(long)]
    pub trace_every: Option<usize>,
    /// Skip the radial phase and report the angular iterate only.
    #[arg(long)]
    pub angular_only: bool,
    /// Run even when the step size gives gamma > 1.
    #[arg(long)]
    pub force: bool,
    /// Stop at the first recorded step meeting the success criterion.
    #[arg(long)]
    pub stop_on_success: bool,
}

#[derive(Debug, Args)]
pub struct ZpArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,20")]
    pub p: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    pub gamma: Vec<f64>,
    /// Monte Carlo samples per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(subcommand)]
    pub kind: DemoKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Constant,
    Harmonic,
    Aggressive,
    All,
}

#[derive(Debug, Subcommand)]
pub enum DemoKind {
    /// x <- (1 - alpha x^2) x blows up once x0^2 >= (C + 1)/alpha.
    Diverge {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// Gradient descent on diag(4, 1) started orthogonal to e1 never leaves that plane.
    Stuck {
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        y2: f64,
    },
    /// Mean rho after K steps of a bounded sampler stays above the rate floor.
    Lowerbound {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        k_steps: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        zeta: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::All)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return 1;
        }
        // a second configuration in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
