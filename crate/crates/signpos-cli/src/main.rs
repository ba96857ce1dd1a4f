//! Command-line front end for the sign-structure toolkit: ground-state
//! solves, protocol sweeps, protocol searches, Hamiltonian transforms,
//! entanglement entropies, and reference overlaps, with CSV/JSON/SVG output.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::CommandDefaults;

#[derive(Parser)]
#[command(name = "signpos", version, about = "Sign structure of J1-J2 Heisenberg chain ground states under diagonal rotation and CZ protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize one sector and report energies, degeneracies, and sign
    /// metrics; writes the ground vectors as binary state files.
    Ground(GroundArgs),
    /// Sweep sign metrics over chain lengths and a J2 grid.
    Sweep(SweepArgs),
    /// Search protocol space for the largest transformed sign average.
    Search(SearchArgs),
    /// Print the transformed Hamiltonian for one protocol.
    Transform(TransformArgs),
    /// Entanglement entropies of raw and transformed ground states.
    Entropy(EntropyArgs),
    /// Ground-state overlaps against fixed reference states over a J2 grid.
    Overlap(OverlapArgs),
}

/// Flags shared by every subcommand. Unset values fall back to the JSON
/// config file passed with --config, then to built-in defaults.
#[derive(Args)]
struct SharedArgs {
    /// Chain lengths (comma separated; most commands accept one).
    #[arg(short = 'n', long = "n", value_delimiter = ',', value_name = "N")]
    n: Vec<usize>,

    /// Boundary conditions.
    #[arg(short = 'b', long, value_parser = ["obc", "pbc"])]
    boundary: Option<String>,

    /// Nearest-neighbor coupling.
    #[arg(long, value_name = "J1")]
    j1: Option<f64>,

    /// Single next-nearest-neighbor coupling point.
    #[arg(long, value_name = "J2", conflicts_with = "j2_grid")]
    j2: Option<f64>,

    /// J2 grid: "a,b,c" or "start:end:step".
    #[arg(long, value_name = "GRID")]
    j2_grid: Option<String>,

    /// Protocols: identity, mpr, odd-even, torlai, mpr-cz, or file:<path>.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    protocol: Vec<String>,

    /// Seed for every randomized step (solver restarts, subspace search).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for sweeps and searches.
    #[arg(long)]
    threads: Option<usize>,

    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Output formats (comma separated subset of csv, json, svg).
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    format: Vec<String>,

    /// JSON file supplying defaults for any of the shared flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Eigensolver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Eigensolver iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct GroundArgs {
    #[command(flatten)]
    shared: SharedArgs,

    /// Magnetization sector (up-spin count); defaults to n/2.
    #[arg(long)]
    n_up: Option<usize>,

    /// Number of eigenpairs to report.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: SharedArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    shared: SharedArgs,

    /// Search mode.
    #[arg(long, default_value = "exhaustive", value_parser = ["exhaustive", "template", "mpr-cz"])]
    mode: String,

    /// Repeat period for template mode (1, 2, 4, or 8).
    #[arg(long, default_value_t = 2)]
    period: usize,

    /// How many top candidates to keep.
    #[arg(long, default_value_t = 5)]
    top_k: usize,

    /// First candidate index of a resumable shard (inclusive).
    #[arg(long)]
    shard_start: Option<u128>,

    /// Last candidate index of a resumable shard (exclusive).
    #[arg(long)]
    shard_end: Option<u128>,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    shared: SharedArgs,

    /// Check that the transformed operator keeps every sector spectrum
    /// (dense comparison, n <= 10).
    #[arg(long)]
    verify: bool,

    /// Largest allowed spectral deviation under --verify.
    #[arg(long, default_value_t = 1e-9)]
    verify_tol: f64,
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    shared: SharedArgs,

    /// Subsystem choice: contiguous half, ABBA sublattice, or both.
    #[arg(long, default_value = "both", value_parser = ["half", "abba", "both"])]
    partition: String,
}

#[derive(Args)]
struct OverlapArgs {
    #[command(flatten)]
    shared: SharedArgs,
}

impl Command {
    fn shared(&self) -> &SharedArgs {
        match self {
            Command::Ground(a) => &a.shared,
            Command::Sweep(a) => &a.shared,
            Command::Search(a) => &a.shared,
            Command::Transform(a) => &a.shared,
            Command::Entropy(a) => &a.shared,
            Command::Overlap(a) => &a.shared,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Ground(_) => "ground",
            Command::Sweep(_) => "sweep",
            Command::Search(_) => "search",
            Command::Transform(_) => "transform",
            Command::Entropy(_) => "entropy",
            Command::Overlap(_) => "overlap",
        }
    }

    fn defaults(&self) -> CommandDefaults {
        match self {
            Command::Ground(_) => CommandDefaults {
                protocols: &["identity"],
                formats: &[],
                full_grid: false,
            },
            Command::Sweep(_) => CommandDefaults {
                protocols: &["mpr"],
                formats: &["csv", "svg"],
                full_grid: true,
            },
            Command::Search(_) => CommandDefaults {
                protocols: &[],
                formats: &["json"],
                full_grid: false,
            },
            Command::Transform(_) => CommandDefaults {
                protocols: &["mpr"],
                formats: &[],
                full_grid: false,
            },
            Command::Entropy(_) => CommandDefaults {
                protocols: &["mpr-cz"],
                formats: &["csv"],
                full_grid: true,
            },
            Command::Overlap(_) => CommandDefaults {
                protocols: &[],
                formats: &["csv"],
                full_grid: true,
            },
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let effective = config::resolve(cli.command.shared(), cli.command.name(), &cli.command.defaults())?;
    if let Some(threads) = effective.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("setting up the thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Ground(args) => commands::cmd_ground(&effective, args),
        Command::Sweep(args) => commands::cmd_sweep(&effective, args),
        Command::Search(args) => commands::cmd_search(&effective, args),
        Command::Transform(args) => commands::cmd_transform(&effective, args),
        Command::Entropy(args) => commands::cmd_entropy(&effective, args),
        Command::Overlap(args) => commands::cmd_overlap(&effective, args),
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. piping a listing into
    // head), per Unix convention, instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
