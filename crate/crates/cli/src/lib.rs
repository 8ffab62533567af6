//! Command-line front end for cuspforge.
//!
//! Exit codes: 0 when every verdict passes, 2 when a verdict fails,
//! 1 for operational errors (bad arguments, unreadable files, infeasible
//! parameters).

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "CUSPFORGE_OUT";

#[derive(Debug, Parser)]
#[command(name = "cuspforge", version, about = "Cusp closing and doubling with curvature and entropy certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Curvature budget; repeat or comma-separate for `sweep`.
    #[arg(long, global = true, value_name = "F", value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Manifold dimension.
    #[arg(long, global = true, value_name = "N")]
    pub dim: Option<usize>,
    /// Output directory (`CUSPFORGE_OUT` takes precedence).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo samples (oracle samples for `oracle-check`).
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Permit closing cusps of 3-manifolds.
    #[arg(long, global = true)]
    pub allow_dim3: bool,
    /// Use gamma_1 = k alpha_1 + alpha_2, which generates an index-k sublattice.
    #[arg(long, global = true)]
    pub paper_generator_swap: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Cutoff profile grid (CSV + SVG) with its pinching certificate.
    Cutoff,
    /// Assemble a manifold from a config and certify it.
    Assemble,
    /// Run the pipeline for each `--eps` value.
    Sweep,
    /// Entropy certificate for a config, or the model entropy without one.
    Entropy {
        /// Radius for the model ball-volume growth rate.
        #[arg(long, value_name = "R", default_value_t = 30.0)]
        r_max: f64,
    },
    /// Closed-form curvatures against the finite-difference tensor.
    OracleCheck,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
