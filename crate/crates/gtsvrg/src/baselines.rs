//! Reference methods for comparison curves: deterministic gradient
//! tracking (the estimator replaced by exact local full gradients) and
//! plain decentralized stochastic gradient descent (no tracker, no
//! variance reduction).

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::gtsvrg::{summarize, sum_components, RunConfig};
use crate::objectives::Problem;
use crate::rng;
use crate::theory;
use crate::topology::{deviation_sq, row_mean, MixingMatrix};
use crate::trace::{Method, Trace, TraceMeta, TraceRow};

/// State of the deterministic gradient-tracking baseline: iterates,
/// trackers, and the stacked exact local gradients at the current iterates.
#[derive(Debug, Clone)]
pub struct GtState {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub grad: Vec<f64>,
    pub t: usize,
    pub k: usize,
    pub grad_evals: u64,
}

pub fn gt_init(problem: &Problem, w: &MixingMatrix, cfg: &RunConfig) -> Result<GtState> {
    let n = problem.n();
    let p = problem.p();
    if w.n() != n {
        return Err(Error::Usage("mixing matrix / problem node mismatch".into()));
    }
    cfg.validate(n, p)?;
    let x = cfg.x0.clone().unwrap_or_else(|| vec![0.0; n * p]);
    let mut grad = vec![0.0; n * p];
    for i in 0..n {
        let g = problem.local_full_grad(i, &x[i * p..(i + 1) * p])?;
        grad[i * p..(i + 1) * p].copy_from_slice(&g);
    }
    Ok(GtState {
        n,
        p,
        y: grad.clone(),
        x,
        grad,
        t: 0,
        k: 0,
        grad_evals: sum_components(problem),
    })
}

/// One tracked full-gradient step: x+ = Wx - a y, y+ = Wy + g(x+) - g(x).
pub fn gt_full_step(
    state: &mut GtState,
    problem: &Problem,
    w: &MixingMatrix,
    alpha: f64,
    mode: ExecMode,
) -> Result<()> {
    let n = state.n;
    let p = state.p;
    let mut xn = vec![0.0; n * p];
    w.apply(&state.x, p, &mut xn, mode);
    for (o, yv) in xn.iter_mut().zip(&state.y) {
        *o -= alpha * yv;
    }
    let mut gradn = vec![0.0; n * p];
    for i in 0..n {
        let g = problem.local_full_grad(i, &xn[i * p..(i + 1) * p])?;
        gradn[i * p..(i + 1) * p].copy_from_slice(&g);
    }
    let mut yn = vec![0.0; n * p];
    w.apply(&state.y, p, &mut yn, mode);
    for l in 0..n * p {
        yn[l] += gradn[l] - state.grad[l];
    }
    if !xn.iter().all(|u| u.is_finite()) || !yn.iter().all(|u| u.is_finite()) {
        return Err(Error::Diverged {
            alpha,
            outer: state.t,
            inner: state.k,
        });
    }
    state.x = xn;
    state.y = yn;
    state.grad = gradn;
    state.k += 1;
    state.grad_evals += sum_components(problem);
    Ok(())
}

/// Decentralized stochastic gradient descent: one sampled component
/// gradient per node per step, mixed with the neighbors.
#[derive(Debug, Clone)]
pub struct DsgdState {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub t: usize,
    pub k: usize,
    pub grad_evals: u64,
}

pub fn dsgd_init(problem: &Problem, w: &MixingMatrix, cfg: &RunConfig) -> Result<DsgdState> {
    let n = problem.n();
    let p = problem.p();
    if w.n() != n {
        return Err(Error::Usage("mixing matrix / problem node mismatch".into()));
    }
    cfg.validate(n, p)?;
    Ok(DsgdState {
        n,
        p,
        x: cfg.x0.clone().unwrap_or_else(|| vec![0.0; n * p]),
        t: 0,
        k: 0,
        grad_evals: 0,
    })
}

/// x+ = Wx - a g with g_i the gradient of one uniformly drawn component
/// at the current local iterate.
pub fn dsgd_step(
    state: &mut DsgdState,
    problem: &Problem,
    w: &MixingMatrix,
    alpha: f64,
    seed: u64,
    mode: ExecMode,
) -> Result<()> {
    let n = state.n;
    let p = state.p;
    let m = problem.m();
    let mut g = vec![0.0; n * p];
    for i in 0..n {
        let s = rng::draw_index(seed, rng::TAG_DSGD, i, state.t, state.k, m[i]);
        problem.component_grad_into(i, s, &state.x[i * p..(i + 1) * p], &mut g[i * p..(i + 1) * p])?;
    }
    let mut xn = vec![0.0; n * p];
    w.apply(&state.x, p, &mut xn, mode);
    for l in 0..n * p {
        xn[l] -= alpha * g[l];
    }
    if !xn.iter().all(|u| u.is_finite()) {
        return Err(Error::Diverged {
            alpha,
            outer: state.t,
            inner: state.k,
        });
    }
    state.x = xn;
    state.k += 1;
    state.grad_evals += n as u64;
    Ok(())
}

fn residual_row(
    x: &[f64],
    y: Option<&[f64]>,
    n: usize,
    p: usize,
    x_star: &[f64],
    t: usize,
    k: usize,
    grad_evals: u64,
) -> TraceRow {
    let xbar = row_mean(x, n, p);
    let consensus = deviation_sq(x, n, p, &xbar);
    let tracking = y
        .map(|y| {
            let ybar = row_mean(y, n, p);
            deviation_sq(y, n, p, &ybar)
        })
        .unwrap_or(0.0);
    let mut dist_sq = 0.0;
    for l in 0..p {
        let d = xbar[l] - x_star[l];
        dist_sq += d * d;
    }
    TraceRow {
        t,
        k,
        consensus_sq: consensus,
        opt_gap_sq_scaled: n as f64 * dist_sq,
        tracking_sq: tracking,
        mean_dist_to_opt: dist_sq.sqrt(),
        grad_evals,
    }
}

/// Run a baseline with the same loop structure and trace schema as the
/// tracked variance-reduced method (the outer index is bookkeeping only;
/// baselines have no snapshot to refresh).
pub fn run_baseline(
    method: Method,
    problem: &Problem,
    w: &MixingMatrix,
    cfg: &RunConfig,
) -> Result<Trace> {
    let consts = problem.constants();
    let weights = theory::epsilon_weights(consts.q, consts.ell, w.sigma());
    let x_star = problem.minimizer().to_vec();
    let n = problem.n();
    let p = problem.p();

    enum S {
        Gt(GtState),
        Dsgd(DsgdState),
    }
    let mut state = match method {
        Method::Gt => S::Gt(gt_init(problem, w, cfg)?),
        Method::Dsgd => S::Dsgd(dsgd_init(problem, w, cfg)?),
        Method::GtSvrg => {
            return Err(Error::Usage(
                "run_baseline only drives the reference methods".into(),
            ))
        }
    };
    let row_of = |state: &S, t: usize, k: usize| match state {
        S::Gt(s) => residual_row(&s.x, Some(&s.y), n, p, &x_star, t, k, s.grad_evals),
        S::Dsgd(s) => residual_row(&s.x, None, n, p, &x_star, t, k, s.grad_evals),
    };
    let mut rows = vec![row_of(&state, 0, 0)];
    let mut boundary_norms = vec![theory::scaled_max_norm(rows[0].residual(), weights)];
    let mut outer_loops_run = 0;
    for _ in 0..cfg.outer_len {
        for _ in 0..cfg.inner_len {
            let (tt, kk) = match &mut state {
                S::Gt(s) => {
                    gt_full_step(s, problem, w, cfg.alpha, cfg.exec)?;
                    (s.t, s.k)
                }
                S::Dsgd(s) => {
                    dsgd_step(s, problem, w, cfg.alpha, cfg.seed, cfg.exec)?;
                    (s.t, s.k)
                }
            };
            if kk % cfg.record_every == 0 || kk == cfg.inner_len {
                rows.push(row_of(&state, tt, kk));
            }
        }
        let last = *rows.last().expect("boundary row recorded");
        boundary_norms.push(theory::scaled_max_norm(last.residual(), weights));
        outer_loops_run += 1;
        let reached = cfg
            .target_mean_dist
            .map(|target| last.mean_dist_to_opt <= target)
            .unwrap_or(false);
        match &mut state {
            S::Gt(s) => {
                s.t += 1;
                s.k = 0;
            }
            S::Dsgd(s) => {
                s.t += 1;
                s.k = 0;
            }
        }
        if reached {
            break;
        }
    }
    let summary = summarize(&rows, &boundary_norms, outer_loops_run, cfg.target_mean_dist);
    Ok(Trace {
        meta: TraceMeta {
            method,
            alpha: cfg.alpha,
            inner_len: cfg.inner_len,
            outer_len: cfg.outer_len,
            seed: cfg.seed,
            record_every: cfg.record_every,
            scaled_norm_weights: weights,
        },
        rows,
        summary,
    })
}
