//! Subcommand implementations behind the `gtsvrg` binary: simulate,
//! theory, verify, compare. All outputs are reproducible byte for byte
//! from (config, seed).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{self, Experiment, ExperimentConfig, Resolution};
use crate::error::{Error, Result};
use crate::theory::TheoryReport;
use crate::trace::{comparison_csv, Method, RunSummary, Trace};
use crate::verify::{self, SuiteOptions};
use crate::{baselines, gtsvrg, run_method};

/// Output directory: `GTSVRG_OUT` overrides the config.
fn out_dir(exp: &Experiment) -> PathBuf {
    match std::env::var_os("GTSVRG_OUT") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => exp.out_dir.clone(),
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<Experiment> {
    let cfg = ExperimentConfig::load(config)?;
    config::build(&cfg, seed)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    method: &'static str,
    alpha: &'a Resolution,
    inner_len: &'a Resolution,
    outer_len: usize,
    seed: u64,
    record_every: usize,
    run: &'a RunSummary,
}

fn write_simulation_outputs(exp: &Experiment, method: Method, trace: &Trace) -> Result<PathBuf> {
    let dir = out_dir(exp);
    fs::create_dir_all(&dir)?;
    let mut file = fs::File::create(dir.join("trace.csv"))?;
    trace.write_csv(&mut file)?;
    let summary = SimulateSummary {
        method: method.name(),
        alpha: &exp.alpha_resolution,
        inner_len: &exp.k_resolution,
        outer_len: exp.run.outer_len,
        seed: exp.run.seed,
        record_every: exp.run.record_every,
        run: &trace.summary,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), json + "\n")?;
    fs::write(dir.join("problem.txt"), exp.problem.to_text())?;
    fs::write(dir.join("mixing.txt"), exp.w.to_text())?;
    Ok(dir)
}

/// Run one method and write trace, summary, and the serialized instance
/// for bit-exact replay.
pub fn cmd_simulate(config: &Path, seed: Option<u64>, json: bool) -> Result<()> {
    let exp = load(config, seed)?;
    let method = exp.methods.first().copied().unwrap_or(Method::GtSvrg);
    let trace = run_method(method, &exp.problem, &exp.w, &exp.run)?;
    let dir = write_simulation_outputs(&exp, method, &trace)?;
    if json {
        let text = fs::read_to_string(dir.join("summary.json"))?;
        print!("{text}");
    } else {
        let s = &trace.summary;
        println!(
            "{} | alpha {:.6e} ({}) | K {} ({}) | T {} of {}",
            method.name(),
            exp.run.alpha,
            exp.alpha_resolution.mode,
            exp.run.inner_len,
            exp.k_resolution.mode,
            s.outer_loops_run,
            exp.run.outer_len,
        );
        println!(
            "final mean distance to optimum {:.6e} after {} component gradients",
            s.final_mean_dist_to_opt, s.grad_evals
        );
        if let Some(geo) = s.geometric_mean_ratio {
            println!("geometric mean outer contraction ratio {geo:.6}");
        }
        println!("wrote trace.csv, summary.json, problem.txt, mixing.txt to {}", dir.display());
    }
    Ok(())
}

/// Print the rate table (or JSON) for explicit scalars or for the instance
/// a config resolves to.
#[allow(clippy::too_many_arguments)]
pub fn cmd_theory(
    config: Option<&Path>,
    sigma: Option<f64>,
    mu: Option<f64>,
    ell: Option<f64>,
    c: f64,
    m_data: usize,
    epsilon: f64,
    json: bool,
) -> Result<()> {
    let report: TheoryReport = if let Some(path) = config {
        let exp = load(path, None)?;
        let consts = exp.problem.constants();
        let m = consts.m_max.max(m_data);
        TheoryReport::compute(exp.w.sigma(), consts.mu, consts.ell, c, m, epsilon)?
    } else {
        let sigma = sigma.ok_or_else(|| {
            Error::Config("theory needs --sigma (or --config)".into())
        })?;
        let mu = mu.unwrap_or(1.0);
        let ell = ell.ok_or_else(|| Error::Config("theory needs --ell (or --config)".into()))?;
        TheoryReport::compute(sigma, mu, ell, c, m_data, epsilon)?
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

/// Run the oracle suite over a fresh run's recorded states. Emits one JSON
/// line per check; returns whether every asserted check passed.
pub fn cmd_verify(
    config: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    corrupt: bool,
) -> Result<bool> {
    let exp = load(config, seed)?;
    let opts = SuiteOptions {
        trials: trials.unwrap_or(exp.trials),
        max_states: exp.max_states,
        corrupt,
        ..SuiteOptions::default()
    };
    let reports = verify::run_suite(&exp.problem, &exp.w, &exp.run, &opts)?;
    let mut all_pass = true;
    for rep in &reports {
        println!("{}", rep.json_line());
        if rep.skipped.is_none() && !rep.pass {
            all_pass = false;
        }
    }
    Ok(all_pass)
}

#[derive(Serialize)]
struct MethodComparison {
    method: &'static str,
    grad_evals_to_target: Option<u64>,
    final_mean_dist_to_opt: f64,
    grad_evals: u64,
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    target_mean_dist: f64,
    alpha: &'a Resolution,
    inner_len: &'a Resolution,
    outer_len: usize,
    seed: u64,
    methods: Vec<MethodComparison>,
}

/// Run every configured method on the identical instance and seed; write
/// per-method traces, a merged CSV, and the gradient-cost comparison.
pub fn cmd_compare(config: &Path, seed: Option<u64>) -> Result<()> {
    let exp = load(config, seed)?;
    if exp.methods.is_empty() {
        return Err(Error::Config("compare needs a non-empty run.methods list".into()));
    }
    let dir = out_dir(&exp);
    fs::create_dir_all(&dir)?;
    let mut traces: Vec<(Method, Trace)> = Vec::new();
    for &method in &exp.methods {
        let trace = match method {
            Method::GtSvrg => gtsvrg::run(&exp.problem, &exp.w, &exp.run)?,
            Method::Gt | Method::Dsgd => {
                baselines::run_baseline(method, &exp.problem, &exp.w, &exp.run)?
            }
        };
        let mut file = fs::File::create(dir.join(format!("{}.csv", method.name())))?;
        trace.write_csv(&mut file)?;
        traces.push((method, trace));
    }
    let merged: Vec<(Method, &Trace)> = traces.iter().map(|(m, t)| (*m, t)).collect();
    fs::write(dir.join("comparison.csv"), comparison_csv(&merged))?;

    let target = exp.compare_target;
    let methods: Vec<MethodComparison> = traces
        .iter()
        .map(|(method, trace)| {
            let to_target = trace
                .rows
                .iter()
                .find(|r| r.mean_dist_to_opt <= target)
                .map(|r| r.grad_evals);
            MethodComparison {
                method: method.name(),
                grad_evals_to_target: to_target,
                final_mean_dist_to_opt: trace.summary.final_mean_dist_to_opt,
                grad_evals: trace.summary.grad_evals,
            }
        })
        .collect();
    let summary = CompareSummary {
        target_mean_dist: target,
        alpha: &exp.alpha_resolution,
        inner_len: &exp.k_resolution,
        outer_len: exp.run.outer_len,
        seed: exp.run.seed,
        methods,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), json + "\n")?;
    for m in &summary.methods {
        match m.grad_evals_to_target {
            Some(evals) => println!(
                "{:<8} reached {target:.1e} after {evals} component gradients",
                m.method
            ),
            None => println!(
                "{:<8} did not reach {target:.1e} (final mean distance {:.3e})",
                m.method, m.final_mean_dist_to_opt
            ),
        }
    }
    println!("wrote per-method traces and comparison.csv to {}", dir.display());
    Ok(())
}
