//! The convergence-rate algebra: the 3x3 per-step contraction matrix, the
//! snapshot perturbation matrix, admissible and recommended step sizes, the
//! inner-loop length, the outer-loop operator, and the gradient-computation
//! complexity estimate.
//!
//! Everything here is a pure function of the scalar inputs
//! (sigma, mu, ell, alpha); nothing touches a simulation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius3, Mat3};

fn check_inputs(sigma: f64, mu: f64, ell: f64) -> Result<()> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::Config(format!(
            "sigma must lie in [0, 1), got {sigma}"
        )));
    }
    if !(mu > 0.0) || !(ell >= mu) {
        return Err(Error::Config(format!(
            "need 0 < mu <= ell, got mu={mu}, ell={ell}"
        )));
    }
    Ok(())
}

/// Per-step contraction matrix acting on the residual vector
/// (consensus error, n-scaled optimality gap, tracker deviation).
pub fn contraction_matrix(alpha: f64, sigma: f64, mu: f64, ell: f64) -> Result<Mat3> {
    check_inputs(sigma, mu, ell)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("need alpha >= 0, got {alpha}")));
    }
    let gap = 1.0 - sigma * sigma;
    let half = (1.0 + sigma * sigma) / 2.0;
    let l2 = ell * ell;
    Ok(Mat3([
        [half, 0.0, 2.0 * alpha * alpha / gap],
        [2.0 * l2 * alpha / mu, 1.0 - mu * alpha / 2.0, 0.0],
        [
            100.0 * l2 / gap,
            70.0 * l2 / gap,
            half + 40.0 * l2 * alpha * alpha / gap,
        ],
    ]))
}

/// Snapshot perturbation matrix: how the residual at the start of the
/// current inner loop feeds every later step of that loop.
pub fn perturbation_matrix(alpha: f64, sigma: f64, ell: f64) -> Result<Mat3> {
    check_inputs(sigma, ell, ell)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("need alpha >= 0, got {alpha}")));
    }
    let gap = 1.0 - sigma * sigma;
    let l2 = ell * ell;
    let a2 = 4.0 * l2 * alpha * alpha;
    Ok(Mat3([
        [0.0, 0.0, 0.0],
        [a2, a2, 0.0],
        [60.0 * l2 / gap, 60.0 * l2 / gap, 0.0],
    ]))
}

/// Contraction/perturbation pair together with the scalars they came from.
#[derive(Debug, Clone, Copy)]
pub struct TheoryMatrices {
    pub contraction: Mat3,
    pub perturbation: Mat3,
    pub alpha: f64,
    pub sigma: f64,
    pub mu: f64,
    pub ell: f64,
}

impl TheoryMatrices {
    pub fn new(alpha: f64, sigma: f64, mu: f64, ell: f64) -> Result<Self> {
        Ok(TheoryMatrices {
            contraction: contraction_matrix(alpha, sigma, mu, ell)?,
            perturbation: perturbation_matrix(alpha, sigma, ell)?,
            alpha,
            sigma,
            mu,
            ell,
        })
    }
}

/// Largest admissible step size: per-step contraction is certified for
/// every alpha at or below this.
pub fn max_step_size(sigma: f64, q: f64, ell: f64) -> f64 {
    let gap = 1.0 - sigma * sigma;
    gap * gap / (105.0 * q * ell)
}

/// The prescribed operating point for the inner loop.
pub fn recommended_step(sigma: f64, q: f64, ell: f64) -> f64 {
    let gap = 1.0 - sigma * sigma;
    gap * gap / (200.0 * q * ell)
}

/// Certified bound on the contraction-matrix spectral radius at the
/// recommended step.
pub fn rho_contraction_bound(sigma: f64, q: f64) -> f64 {
    let gap = 1.0 - sigma * sigma;
    1.0 - gap * gap / (800.0 * q * q)
}

/// rho((I - G)^-1 H): how strongly the snapshot residual re-enters after a
/// long inner loop. Requires rho(G) < 1.
pub fn perturbation_gain(contraction: &Mat3, perturbation: &Mat3) -> Result<f64> {
    let rho = spectral_radius3(contraction)?;
    if rho >= 1.0 {
        return Err(Error::Usage(format!(
            "perturbation gain needs a contracting matrix, rho = {rho}"
        )));
    }
    let resolvent = Mat3::identity().sub(contraction).solve_mat(perturbation)?;
    spectral_radius3(&resolvent)
}

/// Inner-loop length prescription; `c` is the norm-equivalence constant
/// (>= 1, not constructively available, default 1).
pub fn inner_loop_length(sigma: f64, q: f64, c: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::Config(format!(
            "sigma must lie in [0, 1), got {sigma}"
        )));
    }
    if !(c >= 1.0) {
        return Err(Error::Config(format!("need c >= 1, got {c}")));
    }
    let gap = 1.0 - sigma * sigma;
    let k = 801.0 * q * q / (gap * gap) * (20.0 * c).ln();
    if !k.is_finite() || k > 1e15 {
        return Err(Error::Numeric(format!("inner loop length overflow: {k}")));
    }
    Ok((k.ceil() as usize).max(1))
}

/// Operator mapping the residual at one outer-loop start to the next:
/// G^K + sum_{r=1}^{K-1} G^r H. Uses the closed-form geometric sum
/// (I-G)^-1 (G - G^K) when G contracts, direct accumulation otherwise.
pub fn outer_operator(contraction: &Mat3, perturbation: &Mat3, k: usize) -> Result<(Mat3, f64)> {
    if k == 0 {
        return Err(Error::Usage("inner loop length must be >= 1".into()));
    }
    let g = contraction;
    let h = perturbation;
    let gk = g.pow(k as u64);
    let closed_form = || -> Option<Mat3> {
        if spectral_radius3(g).ok()? >= 1.0 {
            return None;
        }
        // (I - G) can still be numerically singular when the radius sits
        // at 1 to within rounding; fall back in that case too
        let geo = Mat3::identity().sub(g).solve_mat(&g.sub(&gk)).ok()?;
        let op = gk.add(&geo.mul(h));
        op.is_finite().then_some(op)
    };
    let op = if k == 1 {
        *g
    } else if let Some(op) = closed_form() {
        op
    } else {
        const DIRECT_CAP: usize = 10_000_000;
        if k - 1 > DIRECT_CAP {
            return Err(Error::Numeric(format!(
                "direct geometric sum with non-contracting G capped at {DIRECT_CAP} terms"
            )));
        }
        let mut power = *g;
        let mut sum = *g;
        for _ in 2..k {
            power = power.mul(g);
            sum = sum.add(&power);
            if !sum.is_finite() {
                return Err(Error::Numeric(
                    "geometric sum overflowed with non-contracting G".into(),
                ));
            }
        }
        gk.add(&sum.mul(h))
    };
    if !op.is_finite() {
        return Err(Error::Numeric("outer operator has non-finite entries".into()));
    }
    let rho = spectral_radius3(&op)?;
    Ok((op, rho))
}

/// Order-of-magnitude estimate (unit constant) of the total component
/// gradient computations to reach accuracy `epsilon`.
pub fn predicted_complexity(m_data: usize, q: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::Config(format!(
            "sigma must lie in [0, 1), got {sigma}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let gap = 1.0 - sigma;
    Ok((m_data as f64 + q * q / (gap * gap)) * (1.0 / epsilon).ln())
}

/// Weights of the scaled max-norm in which outer-loop contraction is
/// measured: residual component i is divided by weight i.
pub fn epsilon_weights(q: f64, ell: f64, sigma: f64) -> [f64; 3] {
    let gap = 1.0 - sigma * sigma;
    [1.0, 8.0 * q * q, 1350.0 * q * q * ell * ell / (gap * gap)]
}

/// Scaled max-norm of a residual vector under the given weights.
pub fn scaled_max_norm(u: [f64; 3], weights: [f64; 3]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..3 {
        best = best.max(u[i].abs() / weights[i]);
    }
    best
}

/// Everything the `theory` subcommand prints.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub sigma: f64,
    pub mu: f64,
    pub ell: f64,
    pub q: f64,
    pub max_step: f64,
    pub recommended_step: f64,
    pub rho_at_recommended: f64,
    pub rho_bound: f64,
    pub perturbation_gain: f64,
    pub norm_constant_c: f64,
    pub inner_loop_length: usize,
    pub outer_operator_rho: f64,
    pub m_data: usize,
    pub epsilon: f64,
    pub predicted_complexity: f64,
}

impl TheoryReport {
    pub fn compute(
        sigma: f64,
        mu: f64,
        ell: f64,
        c: f64,
        m_data: usize,
        epsilon: f64,
    ) -> Result<Self> {
        check_inputs(sigma, mu, ell)?;
        let q = ell / mu;
        let alpha = recommended_step(sigma, q, ell);
        let tm = TheoryMatrices::new(alpha, sigma, mu, ell)?;
        let rho = spectral_radius3(&tm.contraction)?;
        let gain = perturbation_gain(&tm.contraction, &tm.perturbation)?;
        let k = inner_loop_length(sigma, q, c)?;
        let (_, outer_rho) = outer_operator(&tm.contraction, &tm.perturbation, k)?;
        Ok(TheoryReport {
            sigma,
            mu,
            ell,
            q,
            max_step: max_step_size(sigma, q, ell),
            recommended_step: alpha,
            rho_at_recommended: rho,
            rho_bound: rho_contraction_bound(sigma, q),
            perturbation_gain: gain,
            norm_constant_c: c,
            inner_loop_length: k,
            outer_operator_rho: outer_rho,
            m_data,
            epsilon,
            predicted_complexity: predicted_complexity(m_data, q, sigma, epsilon)?,
        })
    }

    pub fn render_table(&self) -> String {
        let rows = [
            ("sigma".to_string(), format!("{}", self.sigma)),
            ("mu".to_string(), format!("{}", self.mu)),
            ("ell".to_string(), format!("{}", self.ell)),
            ("Q = ell/mu".to_string(), format!("{}", self.q)),
            ("max step".to_string(), format!("{:.6e}", self.max_step)),
            (
                "recommended step".to_string(),
                format!("{:.6e}", self.recommended_step),
            ),
            (
                "rho(G) at recommended".to_string(),
                format!("{:.12}", self.rho_at_recommended),
            ),
            ("rho(G) bound".to_string(), format!("{:.12}", self.rho_bound)),
            (
                "perturbation gain".to_string(),
                format!("{:.6}", self.perturbation_gain),
            ),
            (
                format!("inner loop length (c={})", self.norm_constant_c),
                format!("{}", self.inner_loop_length),
            ),
            (
                "outer operator rho".to_string(),
                format!("{:.6}", self.outer_operator_rho),
            ),
            (
                format!("predicted complexity (M={}, eps={:e})", self.m_data, self.epsilon),
                format!("{:.3e}", self.predicted_complexity),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap();
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        out
    }
}
