//! Decentralized finite-sum optimization with gradient tracking and
//! snapshot-based variance reduction, over simulated synchronous networks.
//!
//! The crate has three faces:
//!
//! - a simulator (`gtsvrg`, `baselines`) running the tracked
//!   variance-reduced method and two reference methods on synthetic
//!   problems (`objectives`) and topologies (`topology`), with
//!   reproducible counter-based randomness (`rng`);
//! - the convergence-rate algebra (`theory`): the 3x3 contraction and
//!   perturbation matrices, step-size and inner-loop prescriptions, and
//!   their spectral checks;
//! - verification oracles (`verify`) that check every per-step identity
//!   and inequality of the analysis against realized runs by exact
//!   enumeration or Monte-Carlo sampling.
//!
//! The `gtsvrg` binary exposes all of it behind a flat-file config:
//! `simulate`, `theory`, `verify`, and `compare` subcommands.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod gtsvrg;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod theory;
pub mod topology;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use gtsvrg::{NetworkState, RunConfig};
pub use objectives::Problem;
pub use topology::MixingMatrix;
pub use trace::{Method, Trace};

/// Run any of the three methods with one entry point.
pub fn run_method(
    method: Method,
    problem: &Problem,
    w: &MixingMatrix,
    cfg: &RunConfig,
) -> Result<Trace> {
    match method {
        Method::GtSvrg => gtsvrg::run(problem, w, cfg),
        Method::Gt | Method::Dsgd => baselines::run_baseline(method, problem, w, cfg),
    }
}
