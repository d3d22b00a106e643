use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gtsvrg::cli;

/// Simulator, rate calculator, and verification suite for decentralized
/// finite-sum optimization with gradient tracking and variance reduction.
#[derive(Parser)]
#[command(name = "gtsvrg", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one method and write trace.csv, summary.json, and the
    /// serialized problem and mixing matrix for replay.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the summary as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Print the rate table: admissible and recommended steps, spectral
    /// radii and their certified bounds, inner-loop length, complexity.
    Theory {
        /// Take sigma and the problem constants from a config instead of
        /// the explicit flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Second largest singular value of the mixing matrix.
        #[arg(long)]
        sigma: Option<f64>,
        /// Strong convexity modulus (default 1).
        #[arg(long)]
        mu: Option<f64>,
        /// Smoothness modulus.
        #[arg(long)]
        ell: Option<f64>,
        /// Norm-equivalence constant in the inner-loop length (>= 1).
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Largest per-node component count for the complexity estimate.
        #[arg(long, default_value_t = 1)]
        m_data: usize,
        /// Target accuracy for the complexity estimate.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run every applicable analysis oracle over a fresh run's recorded
    /// states; one JSON line per check. Exit 1 if any asserted check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte-Carlo replicates for non-enumerable expectations.
        #[arg(long)]
        trials: Option<usize>,
        /// Negative-control mode: corrupt every check and expect failures.
        #[arg(long)]
        corrupt: bool,
    },
    /// Run all configured methods on the identical instance and seed and
    /// write per-method traces plus a merged comparison.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = match args.cmd {
        Cmd::Simulate { config, seed, json } => cli::cmd_simulate(&config, seed, json).map(|()| 0),
        Cmd::Theory {
            config,
            sigma,
            mu,
            ell,
            c,
            m_data,
            epsilon,
            json,
        } => cli::cmd_theory(config.as_deref(), sigma, mu, ell, c, m_data, epsilon, json)
            .map(|()| 0),
        Cmd::Verify {
            config,
            seed,
            trials,
            corrupt,
        } => cli::cmd_verify(&config, seed, trials, corrupt)
            .map(|all_pass| if all_pass { 0 } else { 1 }),
        Cmd::Compare { config, seed } => cli::cmd_compare(&config, seed).map(|()| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
