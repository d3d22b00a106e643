//! The tracked variance-reduced method over a synchronous network.
//!
//! Rounds are barrier-synchronous: every node reads the previous round's
//! full state and writes the next one. Inside a round the three stages
//! (estimate mixing, local two-point gradient estimator, tracker mixing)
//! are each a pure map over nodes, so they may run in parallel with results
//! contractually identical to sequential execution. Component draws come
//! from counter-based streams addressed by (seed, node, outer, inner), so
//! nothing depends on execution order.
//!
//! At an outer boundary the iterates, trackers, and estimators all carry
//! over unchanged; only the snapshot point and its stored full gradients
//! are refreshed. The trackers are deliberately NOT re-initialized to the
//! new full gradient.

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::objectives::Problem;
use crate::rng;
use crate::theory;
use crate::topology::{deviation_sq, row_mean, MixingMatrix};
use crate::trace::{Method, RunSummary, Trace, TraceMeta, TraceRow};

/// Inputs of a single run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    /// Inner-loop length K.
    pub inner_len: usize,
    /// Outer-loop count T.
    pub outer_len: usize,
    pub seed: u64,
    /// Initial stacked iterate (n rows of p); all zeros when absent.
    pub x0: Option<Vec<f64>>,
    /// Record every this many inner steps; boundaries always record.
    pub record_every: usize,
    pub exec: ExecMode,
    /// Stop after the first outer loop whose boundary mean iterate is
    /// within this distance of the minimizer.
    pub target_mean_dist: Option<f64>,
}

impl RunConfig {
    pub fn new(alpha: f64, inner_len: usize, outer_len: usize, seed: u64) -> Self {
        RunConfig {
            alpha,
            inner_len,
            outer_len,
            seed,
            x0: None,
            record_every: 1,
            exec: ExecMode::default(),
            target_mean_dist: None,
        }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "step size must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.inner_len == 0 {
            return Err(Error::Config("inner loop length must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != n * p {
                return Err(Error::Config(format!(
                    "x0 has {} entries, expected n*p = {}",
                    x0.len(),
                    n * p
                )));
            }
        }
        Ok(())
    }
}

/// Full algorithm state: stacked n-by-p iterates, trackers, local
/// estimators, and the snapshot pair.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub n: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub snapshot_x: Vec<f64>,
    pub snapshot_grad: Vec<f64>,
    pub t: usize,
    pub k: usize,
    pub grad_evals: u64,
}

impl NetworkState {
    pub fn row<'a>(buf: &'a [f64], i: usize, p: usize) -> &'a [f64] {
        &buf[i * p..(i + 1) * p]
    }

    /// (consensus_sq, n-scaled optimality gap, tracking_sq) plus the plain
    /// mean distance to the minimizer.
    pub fn residual(&self, x_star: &[f64]) -> ([f64; 3], f64) {
        let xbar = row_mean(&self.x, self.n, self.p);
        let ybar = row_mean(&self.y, self.n, self.p);
        let consensus = deviation_sq(&self.x, self.n, self.p, &xbar);
        let tracking = deviation_sq(&self.y, self.n, self.p, &ybar);
        let mut dist_sq = 0.0;
        for l in 0..self.p {
            let d = xbar[l] - x_star[l];
            dist_sq += d * d;
        }
        (
            [consensus, self.n as f64 * dist_sq, tracking],
            dist_sq.sqrt(),
        )
    }
}

pub(crate) fn sum_components(problem: &Problem) -> u64 {
    problem.m().iter().map(|&m| m as u64).sum()
}

/// Preallocated buffers for the in-place step.
pub(crate) struct Scratch {
    xn: Vec<f64>,
    yn: Vec<f64>,
    vn: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize, p: usize) -> Self {
        Scratch {
            xn: vec![0.0; n * p],
            yn: vec![0.0; n * p],
            vn: vec![0.0; n * p],
            tmp: vec![0.0; n * p],
        }
    }
}

/// Initial state: the snapshot sits at x0 and trackers start at the exact
/// local full gradients there.
pub fn init(problem: &Problem, w: &MixingMatrix, cfg: &RunConfig) -> Result<NetworkState> {
    let n = problem.n();
    let p = problem.p();
    if w.n() != n {
        return Err(Error::Usage(format!(
            "mixing matrix is {}x{} but the problem has {n} nodes",
            w.n(),
            w.n()
        )));
    }
    cfg.validate(n, p)?;
    let x = cfg.x0.clone().unwrap_or_else(|| vec![0.0; n * p]);
    let mut snapshot_grad = vec![0.0; n * p];
    for i in 0..n {
        let g = problem.local_full_grad(i, NetworkState::row(&x, i, p))?;
        snapshot_grad[i * p..(i + 1) * p].copy_from_slice(&g);
    }
    Ok(NetworkState {
        n,
        p,
        snapshot_x: x.clone(),
        y: snapshot_grad.clone(),
        v: snapshot_grad.clone(),
        x,
        snapshot_grad,
        t: 0,
        k: 0,
        grad_evals: sum_components(problem),
    })
}

pub(crate) fn inner_step_scratch(
    state: &mut NetworkState,
    problem: &Problem,
    w: &MixingMatrix,
    alpha: f64,
    seed: u64,
    mode: ExecMode,
    scratch: &mut Scratch,
) -> Result<()> {
    let n = state.n;
    let p = state.p;
    let (row_ptr, col_idx, weights) = w.csr();

    // estimate mixing: xn = W x - alpha y
    {
        let x = &state.x;
        let y = &state.y;
        exec::fill_rows(mode, &mut scratch.xn, p, |i, row| {
            row.fill(0.0);
            for e in row_ptr[i]..row_ptr[i + 1] {
                let wij = weights[e];
                let src = &x[col_idx[e] * p..col_idx[e] * p + p];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += wij * s;
                }
            }
            let yrow = &y[i * p..i * p + p];
            for (o, yv) in row.iter_mut().zip(yrow) {
                *o -= alpha * yv;
            }
        });
    }

    // two-point estimator at the new iterate against the snapshot
    {
        let xn = &scratch.xn;
        let snap_x = &state.snapshot_x;
        let snap_g = &state.snapshot_grad;
        let m = problem.m();
        let (t, k) = (state.t, state.k);
        exec::fill_rows2(mode, &mut scratch.vn, &mut scratch.tmp, p, |i, vrow, trow| {
            let s = rng::draw_index(seed, rng::TAG_SVRG, i, t, k, m[i]);
            problem
                .component_grad_into(i, s, &xn[i * p..i * p + p], vrow)
                .expect("component index in range");
            problem
                .component_grad_into(i, s, &snap_x[i * p..i * p + p], trow)
                .expect("component index in range");
            let sg = &snap_g[i * p..i * p + p];
            for l in 0..p {
                vrow[l] = vrow[l] - trow[l] + sg[l];
            }
        });
    }

    // tracker mixing: yn = W y + vn - v
    {
        let y = &state.y;
        let v = &state.v;
        let vn = &scratch.vn;
        exec::fill_rows(mode, &mut scratch.yn, p, |i, row| {
            row.fill(0.0);
            for e in row_ptr[i]..row_ptr[i + 1] {
                let wij = weights[e];
                let src = &y[col_idx[e] * p..col_idx[e] * p + p];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += wij * s;
                }
            }
            for l in 0..p {
                row[l] += vn[i * p + l] - v[i * p + l];
            }
        });
    }

    if !scratch.xn.iter().all(|u| u.is_finite()) || !scratch.yn.iter().all(|u| u.is_finite()) {
        return Err(Error::Diverged {
            alpha,
            outer: state.t,
            inner: state.k,
        });
    }
    std::mem::swap(&mut state.x, &mut scratch.xn);
    std::mem::swap(&mut state.y, &mut scratch.yn);
    std::mem::swap(&mut state.v, &mut scratch.vn);
    state.k += 1;
    state.grad_evals += 2 * n as u64;
    Ok(())
}

/// One inner iteration: mix estimates, draw one component per node, update
/// the local estimators, mix trackers.
pub fn inner_step(
    state: &mut NetworkState,
    problem: &Problem,
    w: &MixingMatrix,
    alpha: f64,
    seed: u64,
    mode: ExecMode,
) -> Result<()> {
    let mut scratch = Scratch::new(state.n, state.p);
    inner_step_scratch(state, problem, w, alpha, seed, mode, &mut scratch)
}

/// Recompute the snapshot at the current iterates: full local gradients at
/// every node, counted into `grad_evals`.
pub fn refresh_snapshot(state: &mut NetworkState, problem: &Problem) -> Result<()> {
    state.snapshot_x.copy_from_slice(&state.x);
    let p = state.p;
    for i in 0..state.n {
        let g = problem.local_full_grad(i, NetworkState::row(&state.x, i, p))?;
        state.snapshot_grad[i * p..(i + 1) * p].copy_from_slice(&g);
    }
    state.grad_evals += sum_components(problem);
    Ok(())
}

/// One full outer loop: K inner steps, then carry (x, y, v) forward
/// unchanged and refresh the snapshot.
pub fn outer_step(
    state: &mut NetworkState,
    problem: &Problem,
    w: &MixingMatrix,
    alpha: f64,
    inner_len: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<()> {
    if state.k != 0 {
        return Err(Error::Usage(format!(
            "outer step requires k = 0, state is mid-loop at k = {}",
            state.k
        )));
    }
    let mut scratch = Scratch::new(state.n, state.p);
    for _ in 0..inner_len {
        inner_step_scratch(state, problem, w, alpha, seed, mode, &mut scratch)?;
    }
    refresh_snapshot(state, problem)?;
    state.t += 1;
    state.k = 0;
    Ok(())
}

fn row_from_state(state: &NetworkState, x_star: &[f64]) -> TraceRow {
    let (res, mean_dist) = state.residual(x_star);
    TraceRow {
        t: state.t,
        k: state.k,
        consensus_sq: res[0],
        opt_gap_sq_scaled: res[1],
        tracking_sq: res[2],
        mean_dist_to_opt: mean_dist,
        grad_evals: state.grad_evals,
    }
}

pub(crate) fn summarize(
    rows: &[TraceRow],
    boundary_norms: &[f64],
    outer_loops_run: usize,
    target: Option<f64>,
) -> RunSummary {
    let last = rows.last().expect("at least the init row");
    let ratios: Vec<f64> = (1..boundary_norms.len())
        .map(|i| boundary_norms[i] / boundary_norms[i - 1])
        .collect();
    let tail: Vec<f64> = ratios
        .iter()
        .skip(1)
        .copied()
        .filter(|r| r.is_finite() && *r > 0.0)
        .collect();
    let geometric_mean_ratio = if tail.is_empty() {
        None
    } else {
        Some((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
    };
    RunSummary {
        final_consensus_sq: last.consensus_sq,
        final_opt_gap_sq_scaled: last.opt_gap_sq_scaled,
        final_tracking_sq: last.tracking_sq,
        final_mean_dist_to_opt: last.mean_dist_to_opt,
        grad_evals: last.grad_evals,
        outer_loops_run,
        outer_ratios: ratios,
        geometric_mean_ratio,
        target_mean_dist: target,
        target_reached: target.map(|t| last.mean_dist_to_opt <= t),
    }
}

/// Run T outer loops, recording a trace and feeding every recorded state to
/// the observer. The snapshot refresh after the final outer loop is skipped
/// (nothing would consume it), so the final gradient-evaluation count
/// matches the last recorded row.
pub fn run_with_observer<F: FnMut(&NetworkState)>(
    problem: &Problem,
    w: &MixingMatrix,
    cfg: &RunConfig,
    mut observer: F,
) -> Result<Trace> {
    let consts = problem.constants();
    let weights = theory::epsilon_weights(consts.q, consts.ell, w.sigma());
    let mut state = init(problem, w, cfg)?;
    let x_star = problem.minimizer().to_vec();
    let mut rows = vec![row_from_state(&state, &x_star)];
    observer(&state);
    let mut boundary_norms = vec![theory::scaled_max_norm(rows[0].residual(), weights)];
    let mut scratch = Scratch::new(state.n, state.p);
    let mut outer_loops_run = 0;
    for t in 0..cfg.outer_len {
        for _ in 0..cfg.inner_len {
            inner_step_scratch(
                &mut state,
                problem,
                w,
                cfg.alpha,
                cfg.seed,
                cfg.exec,
                &mut scratch,
            )?;
            if state.k % cfg.record_every == 0 || state.k == cfg.inner_len {
                rows.push(row_from_state(&state, &x_star));
                observer(&state);
            }
        }
        let last = *rows.last().expect("boundary row just recorded");
        boundary_norms.push(theory::scaled_max_norm(last.residual(), weights));
        outer_loops_run += 1;
        let reached = cfg
            .target_mean_dist
            .map(|target| last.mean_dist_to_opt <= target)
            .unwrap_or(false);
        if reached {
            state.t += 1;
            state.k = 0;
            break;
        }
        if t + 1 < cfg.outer_len {
            refresh_snapshot(&mut state, problem)?;
        }
        state.t += 1;
        state.k = 0;
    }
    let summary = summarize(&rows, &boundary_norms, outer_loops_run, cfg.target_mean_dist);
    Ok(Trace {
        meta: TraceMeta {
            method: Method::GtSvrg,
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

/// Run and record a trace.
pub fn run(problem: &Problem, w: &MixingMatrix, cfg: &RunConfig) -> Result<Trace> {
    run_with_observer(problem, w, cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_graph, metropolis_weights, TopologyKind};

    fn ring4_problem(seed: u64) -> (Problem, MixingMatrix) {
        let g = build_graph(TopologyKind::Ring, 4, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let p = Problem::make_quadratic(4, &[3, 3, 3, 3], 2, 1.0, 5.0, seed).unwrap();
        (p, w)
    }

    #[test]
    fn init_trackers_are_full_gradients_at_zero() {
        let p = Problem::quadratic_from_parts(
            2,
            1,
            vec![
                vec![(vec![1.0], vec![2.0]), (vec![1.0], vec![4.0])],
                vec![(vec![2.0], vec![-6.0])],
            ],
        )
        .unwrap();
        let w = uniform2();
        let cfg = RunConfig::new(0.1, 1, 1, 0);
        let st = init(&p, &w, &cfg).unwrap();
        // gradient of each node's average at x = 0 is the mean linear term
        assert!((st.y[0] - 3.0).abs() < 1e-15);
        assert!((st.y[1] + 6.0).abs() < 1e-15);
        assert_eq!(st.y, st.v);
        assert_eq!(st.grad_evals, 3);
    }

    fn uniform2() -> MixingMatrix {
        MixingMatrix::from_dense(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn single_node_single_component_is_gradient_descent() {
        let p = Problem::quadratic_from_parts(1, 1, vec![vec![(vec![2.0], vec![-4.0])]]).unwrap();
        let g = build_graph(TopologyKind::Ring, 1, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let alpha = 0.3;
        let cfg = RunConfig::new(alpha, 1, 1, 9);
        let mut st = init(&p, &w, &cfg).unwrap();
        let mut x = 0.0f64;
        for step in 0..50 {
            inner_step(&mut st, &p, &w, alpha, 9, ExecMode::Sequential).unwrap();
            x -= alpha * (2.0 * x - 4.0);
            assert!(
                (st.x[0] - x).abs() <= 1e-12 * (1.0 + x.abs()),
                "step {step}: {} vs {x}",
                st.x[0]
            );
        }
    }

    #[test]
    fn mean_iterate_recursion_and_tracking_identity() {
        let (p, w) = ring4_problem(5);
        let cfg = RunConfig::new(1e-2, 8, 2, 7);
        let mut st = init(&p, &w, &cfg).unwrap();
        for _ in 0..16 {
            let xbar = row_mean(&st.x, 4, 2);
            let ybar = row_mean(&st.y, 4, 2);
            inner_step(&mut st, &p, &w, cfg.alpha, cfg.seed, ExecMode::Sequential).unwrap();
            let xbar_next = row_mean(&st.x, 4, 2);
            for l in 0..2 {
                let predicted = xbar[l] - cfg.alpha * ybar[l];
                assert!((xbar_next[l] - predicted).abs() <= 1e-12);
            }
            let vbar = row_mean(&st.v, 4, 2);
            let ybar = row_mean(&st.y, 4, 2);
            let num: f64 = ybar
                .iter()
                .zip(&vbar)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = 1.0 + vbar.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num / den <= 1e-9);
        }
    }

    #[test]
    fn outer_step_refreshes_snapshot_and_counts() {
        let (p, w) = ring4_problem(6);
        let cfg = RunConfig::new(1e-2, 5, 1, 3);
        let mut st = init(&p, &w, &cfg).unwrap();
        let evals0 = st.grad_evals;
        outer_step(&mut st, &p, &w, cfg.alpha, 5, cfg.seed, ExecMode::Sequential).unwrap();
        assert_eq!(st.grad_evals - evals0, 12 + 2 * 4 * 5);
        assert_eq!((st.t, st.k), (1, 0));
        assert_eq!(st.snapshot_x, st.x);
        for i in 0..4 {
            let g = p.local_full_grad(i, NetworkState::row(&st.x, i, 2)).unwrap();
            for l in 0..2 {
                assert_eq!(st.snapshot_grad[i * 2 + l], g[l]);
            }
        }
        // mid-loop state rejects an outer step
        inner_step(&mut st, &p, &w, cfg.alpha, cfg.seed, ExecMode::Sequential).unwrap();
        assert!(outer_step(&mut st, &p, &w, cfg.alpha, 5, cfg.seed, ExecMode::Sequential).is_err());
    }

    #[test]
    fn trace_grad_eval_accounting() {
        let (p, w) = ring4_problem(8);
        let sum_m = 12u64;
        let cfg = RunConfig::new(1e-2, 6, 3, 3);
        let trace = run(&p, &w, &cfg).unwrap();
        // boundary row after outer loop t carries (t+1) * (sum_m + 2nK)
        for (idx, row) in trace.boundary_rows().iter().skip(1).enumerate() {
            let loops = (idx + 1) as u64;
            assert_eq!(row.grad_evals, loops * (sum_m + 2 * 4 * 6));
        }
        assert_eq!(trace.final_row().grad_evals, 3 * (sum_m + 2 * 4 * 6));
    }

    #[test]
    fn zero_step_freezes_iterates() {
        // default start is the zero consensus state, which pure mixing fixes
        let (p, w) = ring4_problem(9);
        let cfg = RunConfig::new(0.0, 4, 2, 1);
        let trace = run_with_observer(&p, &w, &cfg, |st| {
            assert!(st.x.iter().all(|&v| v == 0.0));
        })
        .unwrap();
        let first = trace.rows.first().unwrap();
        for row in &trace.rows {
            assert_eq!(row.consensus_sq, 0.0);
            assert_eq!(row.mean_dist_to_opt, first.mean_dist_to_opt);
        }
    }

    #[test]
    fn recommended_step_decreases_outer_residuals() {
        let g = build_graph(TopologyKind::Ring, 10, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let p = Problem::make_quadratic(10, &[4; 10], 2, 1.0, 10.0, 15).unwrap();
        let c = p.constants();
        let mut cfg = RunConfig::new(
            theory::recommended_step(w.sigma(), c.q, c.ell),
            800,
            5,
            2,
        );
        cfg.record_every = 800;
        let trace = run(&p, &w, &cfg).unwrap();
        let bounds = trace.boundary_rows();
        assert_eq!(bounds.len(), 6);
        for pair in bounds.windows(2).skip(1) {
            assert!(
                pair[1].mean_dist_to_opt < pair[0].mean_dist_to_opt,
                "{} !< {}",
                pair[1].mean_dist_to_opt,
                pair[0].mean_dist_to_opt
            );
        }
    }

    #[test]
    fn zero_outer_loops_record_only_init() {
        let (p, w) = ring4_problem(10);
        let cfg = RunConfig::new(1e-2, 4, 0, 1);
        let trace = run(&p, &w, &cfg).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!((trace.rows[0].t, trace.rows[0].k), (0, 0));
    }

    #[test]
    fn golden_trace_first_five_steps() {
        let g = build_graph(TopologyKind::Ring, 4, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let p = Problem::make_quadratic(4, &[3, 3, 3, 3], 2, 1.0, 5.0, 7).unwrap();
        let cfg = RunConfig::new(1e-2, 5, 1, 3);
        let trace = run(&p, &w, &cfg).unwrap();
        let golden = "\
t,k,consensus_sq,opt_gap_sq_scaled,tracking_sq,mean_dist_to_opt,grad_evals
0,0,0.0000000000000000e0,1.3843729179695499e-1,2.1862517312002714e0,1.8603581093230073e-1,12
0,1,2.1862517312002715e-4,1.3112621060075433e-1,2.0236989267648384e-1,1.8105676637504764e-1,20
0,2,8.8850897306839473e-5,1.2417310749460739e-1,3.0270528702223510e-2,1.7619102381691257e-1,28
0,3,2.3673253158836283e-5,1.1766448009288144e-1,7.8987999726926553e-3,1.7151128249541009e-1,36
0,4,6.2098141658539929e-6,1.1152487998077831e-1,1.8076849865760571e-3,1.6697670494770994e-1,44
0,5,1.5504956056978646e-6,1.0566810618886284e-1,9.4987039736685666e-4,1.6253315522445169e-1,52
";
        assert_eq!(trace.csv_string(), golden);
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let (p, w) = ring4_problem(11);
        let cfg = RunConfig::new(5e-3, 7, 2, 42);
        let a = run(&p, &w, &cfg).unwrap();
        let b = run(&p, &w, &cfg).unwrap();
        assert_eq!(a.csv_string(), b.csv_string());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        // wide enough that the parallel path actually spawns tasks
        let g = build_graph(TopologyKind::ErdosRenyi { prob: 0.2 }, 48, 2).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let m: Vec<usize> = (0..48).map(|i| 1 + (i % 4)).collect();
        let p = Problem::make_quadratic(48, &m, 3, 1.0, 8.0, 12).unwrap();
        let mut cfg = RunConfig::new(1e-3, 5, 2, 77);
        cfg.exec = ExecMode::Sequential;
        let seq = run(&p, &w, &cfg).unwrap();
        cfg.exec = ExecMode::Parallel;
        let par = run(&p, &w, &cfg).unwrap();
        assert_eq!(seq.csv_string(), par.csv_string());
    }

    #[test]
    fn divergence_is_detected_with_diagnostics() {
        // single node, single component, curvature 1: the tracker equals the
        // gradient, so alpha = 3 multiplies the iterate by -2 every step
        let p = Problem::quadratic_from_parts(1, 1, vec![vec![(vec![1.0], vec![0.0])]]).unwrap();
        let g = build_graph(TopologyKind::Ring, 1, 0).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let mut cfg = RunConfig::new(3.0, 2000, 1, 0);
        cfg.x0 = Some(vec![1.0]);
        cfg.record_every = 1000;
        let err = run(&p, &w, &cfg).unwrap_err();
        match err {
            Error::Diverged { alpha, .. } => assert_eq!(alpha, 3.0),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn early_stop_on_target() {
        let (p, w) = ring4_problem(13);
        let mut cfg = RunConfig::new(
            theory::recommended_step(w.sigma(), 5.0, 5.0),
            2000,
            50,
            3,
        );
        cfg.record_every = 2000;
        cfg.target_mean_dist = Some(1e-6);
        let trace = run(&p, &w, &cfg).unwrap();
        assert_eq!(trace.summary.target_reached, Some(true));
        assert!(trace.summary.outer_loops_run < 50);
        assert!(trace.summary.final_mean_dist_to_opt <= 1e-6);
    }
}
