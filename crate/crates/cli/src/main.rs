//! `entrocon`: contraction constants of finite reversible Markov chains from
//! the command line.

mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entrocon::error::Error;

use crate::source::ChainArgs;

/// Exit codes.
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;
pub const EXIT_RESOURCE_CAP: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "entrocon",
    version,
    about = "Bounds, brackets and certificates for entropy contraction constants"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "ENTROCON_THREADS")]
    pub threads: Option<usize>,
    /// Seed for optimizer starts, random graphs and sampled pairs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Brackets for ρ, α, δ, ρ₀, λ and the contraction coefficients.
    Constants {
        #[command(flatten)]
        chain: ChainArgs,
        /// Comma-separated subset of rho,alpha,delta,rho0,lambda,eta_tv,eta_chi2,eta_kl.
        #[arg(long, value_delimiter = ',')]
        which: Vec<String>,
    },
    /// Sweep one parameter and bracket the ratio of two constants (CSV).
    Separation {
        #[command(flatten)]
        chain: ChainArgs,
        /// Parameter to sweep, e.g. M or n.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Which pair of constants, e.g. delta_vs_alpha (family default otherwise).
        #[arg(long)]
        separation: Option<String>,
    },
    /// Entropy and variance decay along the semigroup or the discrete chain (CSV).
    Trajectory {
        #[command(flatten)]
        chain: ChainArgs,
        /// Start from the point mass at this state.
        #[arg(long, conflicts_with = "nu")]
        start: Option<usize>,
        /// Start from this comma-separated distribution.
        #[arg(long, value_delimiter = ',')]
        nu: Vec<f64>,
        /// Comma-separated times (20 points on [0, 5] by default).
        #[arg(long, value_delimiter = ',', conflicts_with = "steps")]
        times: Vec<f64>,
        /// Discrete chain: steps 0..=STEPS instead of continuous time.
        #[arg(long)]
        steps: Option<u32>,
    },
    /// Run a certificate.
    Certify {
        #[command(subcommand)]
        kind: CertifyKind,
    },
    /// Emit a half-step kernel K with P = KK* and check the product.
    Factorize {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Coupling lower bound on δ from W₁ contraction.
    Coupling {
        #[command(flatten)]
        chain: ChainArgs,
        /// Random non-adjacent pairs checked for W∞ ≤ d.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Write a chain as JSON.
    Emit {
        #[command(flatten)]
        chain: ChainArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum CertifyKind {
    /// η_KL of the lazy walk on K_{n,n} (n = 3).
    Bipartite {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 1e-5)]
        spacing: f64,
        #[arg(long, default_value_t = 0.00078)]
        margin: f64,
        #[arg(long, default_value_t = 0.58)]
        t_star: f64,
        /// Maximum number of lattice points.
        #[arg(long, default_value_t = entrocon::certify::DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 1e-6)]
        corner_spacing: f64,
    },
}

/// Result of a command that ran to completion.
pub enum Outcome {
    Ok,
    /// A check or certificate failed; the message goes to stderr.
    Failed(String),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ResourceCap(_)) => EXIT_RESOURCE_CAP,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match commands::run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
