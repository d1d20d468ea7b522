//! Command-line front end: config ingestion, integrator property suites,
//! solver runs, exit profiles, kernel densities, and Fredholm eigenvalues,
//! with JSON manifests sufficient to reproduce every output.

mod commands;
mod manifest;
mod suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pathkernel",
    version,
    about = "Monte Carlo / quadrature toolkit for kernel-based boundary-value solvers"
)]
struct Cli {
    /// Worker threads (default: machine parallelism). Outputs are identical
    /// for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo samples per estimate.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Exit-time mode override: critical, fixed-energy, or baseline.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the integrator property suites and write a JSON report.
    IntegratorSuite {
        /// Restrict to one family: gaussian, dirac, hermite, gamma, dtau.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deliberately fail one check (negative-path test hook).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Solve the Dirichlet problem on evaluation points.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Evaluation points: a count of uniformly spaced interior points
        /// (1-D), or explicit points "x1,x2;y1,y2".
        #[arg(long, default_value = "5")]
        points: String,
    },
    /// Critical exit times, exit points, and residuals per point.
    ExitProfile {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "5")]
        points: String,
    },
    /// Binned kernel density from one start point.
    Kernel {
        #[command(flatten)]
        run: RunArgs,
        /// Start point "x1,x2".
        #[arg(long, default_value = "0.5")]
        start: String,
        #[arg(long, default_value_t = 32)]
        bins: usize,
    },
    /// Nyström eigenvalues of the Dirichlet kernel.
    Eigen {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Kernel source: analytic or estimated.
        #[arg(long, default_value = "analytic")]
        kernel_source: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: failed to size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::IntegratorSuite {
            only,
            out,
            seed,
            inject_fault,
        } => suite::run(only.as_deref(), &out, seed, inject_fault),
        Command::Solve { run, points } => commands::solve(&run, &points),
        Command::ExitProfile { run, points } => commands::exit_profile(&run, &points),
        Command::Kernel { run, start, bins } => commands::kernel(&run, &start, bins),
        Command::Eigen {
            run,
            nodes,
            count,
            kernel_source,
        } => commands::eigen(&run, nodes, count, &kernel_source),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
