//! Finite-sum problems with certified strong-convexity and smoothness
//! constants and a known minimizer.
//!
//! Two families: quadratics (component Hessians built with eigenvalues
//! inside [mu, ell], minimizer from a direct linear solve) and
//! ridge-regularized logistic losses (mu = lambda, ell = lambda +
//! max |feature|^2 / 4, minimizer from a deterministic full-gradient
//! descent oracle). The declared constants are constructed, not estimated:
//! every rate formula downstream consumes them, so estimation error would
//! contaminate the spectral checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Quadratic,
    RegLog,
}

#[derive(Debug, Clone)]
enum Component {
    /// 0.5 x^T A x + b^T x with symmetric A.
    Quadratic { a: Vec<f64>, b: Vec<f64> },
    /// log(1 + exp(-label * feat . x)) + 0.5 * lambda |x|^2.
    RegLog { feat: Vec<f64>, label: f64 },
}

/// Per-node finite sums f_i = (1/m_i) sum_j f_ij with known global
/// minimizer and tight (mu, ell).
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    p: usize,
    m: Vec<usize>,
    family: Family,
    lambda: f64, // reglog ridge coefficient; 0 for quadratics
    comps: Vec<Vec<Component>>,
    mu: f64,
    ell: f64,
    x_star: Vec<f64>,
}

/// The scalar constants every rate formula consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub mu: f64,
    pub ell: f64,
    pub q: f64,
    pub m_max: usize,
    pub m_min: usize,
}

const MINIMIZER_RESIDUAL_TOL: f64 = 1e-8;

fn sigmoid_neg(z: f64) -> f64 {
    // stable 1 / (1 + exp(z))
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn softplus(u: f64) -> f64 {
    // log(1 + exp(u)) without overflow
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian matrix,
/// with one re-orthogonalization pass.
fn random_orthogonal(p: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut q = vec![0.0; p * p];
    for v in &mut q {
        *v = rng.sample(StandardNormal);
    }
    for col in 0..p {
        for _pass in 0..2 {
            for prev in 0..col {
                let mut d = 0.0;
                for r in 0..p {
                    d += q[r * p + col] * q[r * p + prev];
                }
                for r in 0..p {
                    q[r * p + col] -= d * q[r * p + prev];
                }
            }
        }
        let norm: f64 = (0..p).map(|r| q[r * p + col] * q[r * p + col]).sum::<f64>().sqrt();
        let norm = if norm > 1e-12 { norm } else { 1.0 };
        for r in 0..p {
            q[r * p + col] /= norm;
        }
    }
    q
}

/// A = Q^T diag(eigs) Q, symmetrized against rounding.
fn spd_from_eigenvalues(eigs: &[f64], q: &[f64], p: usize) -> Vec<f64> {
    let mut a = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for l in 0..p {
                acc += q[l * p + i] * eigs[l] * q[l * p + j];
            }
            a[i * p + j] = acc;
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            let s = 0.5 * (a[i * p + j] + a[j * p + i]);
            a[i * p + j] = s;
            a[j * p + i] = s;
        }
    }
    a
}

impl Problem {
    /// Synthetic quadratic family. Component Hessian eigenvalues are drawn
    /// uniformly from [mu, ell] with both endpoints forced somewhere in the
    /// problem so the declared constants are tight; the minimizer comes
    /// from the weighted normal equations of the global average.
    pub fn make_quadratic(
        n: usize,
        m: &[usize],
        p: usize,
        mu: f64,
        ell: f64,
        seed: u64,
    ) -> Result<Problem> {
        validate_shape(n, m, p)?;
        if !(mu > 0.0) || !(ell >= mu) {
            return Err(Error::Config(format!(
                "need 0 < mu <= ell, got mu={mu}, ell={ell}"
            )));
        }
        let slots: usize = m.iter().sum::<usize>() * p;
        if slots < 2 && mu != ell {
            return Err(Error::Config(
                "a single 1-d component cannot attain both mu and ell; use mu == ell".into(),
            ));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let total: usize = m.iter().sum();
        let mut comps: Vec<Vec<Component>> = Vec::with_capacity(n);
        let mut flat = 0usize;
        for &mi in m.iter().take(n) {
            let mut node = Vec::with_capacity(mi);
            for _ in 0..mi {
                let mut eigs: Vec<f64> = (0..p)
                    .map(|_| mu + rng.random::<f64>() * (ell - mu))
                    .collect();
                if flat == 0 {
                    eigs[0] = mu;
                }
                if flat == total - 1 {
                    eigs[p - 1] = ell;
                }
                let a = if p == 1 {
                    vec![eigs[0]]
                } else {
                    let q = random_orthogonal(p, &mut rng);
                    spd_from_eigenvalues(&eigs, &q, p)
                };
                let b: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                node.push(Component::Quadratic { a, b });
                flat += 1;
            }
            comps.push(node);
        }
        Problem::quadratic_assemble(n, p, m.to_vec(), comps)
    }

    /// Quadratic problem from explicit (A, b) parts; constants are computed
    /// from the component spectra.
    pub fn quadratic_from_parts(
        n: usize,
        p: usize,
        parts: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    ) -> Result<Problem> {
        if parts.len() != n {
            return Err(Error::Usage(format!(
                "expected {n} node component lists, got {}",
                parts.len()
            )));
        }
        let m: Vec<usize> = parts.iter().map(|v| v.len()).collect();
        validate_shape(n, &m, p)?;
        let mut comps = Vec::with_capacity(n);
        for (i, node) in parts.into_iter().enumerate() {
            let mut list = Vec::with_capacity(node.len());
            for (j, (a, b)) in node.into_iter().enumerate() {
                if a.len() != p * p || b.len() != p {
                    return Err(Error::Usage(format!(
                        "component ({i},{j}) has wrong dimensions"
                    )));
                }
                for r in 0..p {
                    for c in r + 1..p {
                        if (a[r * p + c] - a[c * p + r]).abs() > 1e-12 {
                            return Err(Error::Usage(format!(
                                "component ({i},{j}) matrix is not symmetric"
                            )));
                        }
                    }
                }
                list.push(Component::Quadratic { a, b });
            }
            comps.push(list);
        }
        Problem::quadratic_assemble(n, p, m, comps)
    }

    fn quadratic_assemble(
        n: usize,
        p: usize,
        m: Vec<usize>,
        comps: Vec<Vec<Component>>,
    ) -> Result<Problem> {
        // tight constants from the component spectra
        let mut mu = f64::INFINITY;
        let mut ell = 0.0f64;
        for node in &comps {
            for comp in node {
                let Component::Quadratic { a, .. } = comp else {
                    unreachable!()
                };
                let eig = linalg::symmetric_eigenvalues(a, p)?;
                mu = mu.min(eig[p - 1]);
                ell = ell.max(eig[0]);
            }
        }
        if !(mu > 0.0) {
            return Err(Error::Internal(format!(
                "assembled component with non-positive curvature {mu}"
            )));
        }
        // weighted normal equations of f = (1/n) sum_i (1/m_i) sum_j f_ij
        let mut h = vec![0.0; p * p];
        let mut g = vec![0.0; p];
        for (i, node) in comps.iter().enumerate() {
            let w = 1.0 / (n as f64 * m[i] as f64);
            for comp in node {
                let Component::Quadratic { a, b } = comp else {
                    unreachable!()
                };
                for l in 0..p * p {
                    h[l] += w * a[l];
                }
                for l in 0..p {
                    g[l] += w * b[l];
                }
            }
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let x_star = linalg::solve(&h, p, &neg_g)?;
        let problem = Problem {
            n,
            p,
            m,
            family: Family::Quadratic,
            lambda: 0.0,
            comps,
            mu,
            ell,
            x_star,
        };
        problem.check_minimizer_residual()?;
        Ok(problem)
    }

    /// Synthetic ridge-regularized logistic family: Gaussian features,
    /// random labels in {-1, +1}.
    pub fn make_reglog(n: usize, m: &[usize], p: usize, lambda: f64, seed: u64) -> Result<Problem> {
        validate_shape(n, m, p)?;
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("need lambda > 0, got {lambda}")));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut parts: Vec<Vec<(Vec<f64>, f64)>> = Vec::with_capacity(n);
        for &mi in m.iter().take(n) {
            let mut node = Vec::with_capacity(mi);
            for _ in 0..mi {
                let feat: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
                node.push((feat, label));
            }
            parts.push(node);
        }
        Problem::reglog_from_parts(n, p, parts, lambda)
    }

    /// Logistic problem from explicit (features, label) parts.
    pub fn reglog_from_parts(
        n: usize,
        p: usize,
        parts: Vec<Vec<(Vec<f64>, f64)>>,
        lambda: f64,
    ) -> Result<Problem> {
        if parts.len() != n {
            return Err(Error::Usage(format!(
                "expected {n} node component lists, got {}",
                parts.len()
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("need lambda > 0, got {lambda}")));
        }
        let m: Vec<usize> = parts.iter().map(|v| v.len()).collect();
        validate_shape(n, &m, p)?;
        let mut max_feat_sq = 0.0f64;
        let mut comps = Vec::with_capacity(n);
        for (i, node) in parts.into_iter().enumerate() {
            let mut list = Vec::with_capacity(node.len());
            for (j, (feat, label)) in node.into_iter().enumerate() {
                if feat.len() != p {
                    return Err(Error::Usage(format!(
                        "component ({i},{j}) has wrong feature dimension"
                    )));
                }
                if label != 1.0 && label != -1.0 {
                    return Err(Error::Usage(format!(
                        "component ({i},{j}) label must be +1 or -1, got {label}"
                    )));
                }
                max_feat_sq = max_feat_sq.max(linalg::dot(&feat, &feat));
                list.push(Component::RegLog { feat, label });
            }
            comps.push(list);
        }
        let mu = lambda;
        let ell = lambda + max_feat_sq / 4.0;
        let mut problem = Problem {
            n,
            p,
            m,
            family: Family::RegLog,
            lambda,
            comps,
            mu,
            ell,
            x_star: vec![0.0; p],
        };
        problem.x_star = problem.solve_minimizer_by_descent()?;
        problem.check_minimizer_residual()?;
        Ok(problem)
    }

    /// Deterministic minimizer oracle: full-gradient descent with step
    /// 1/ell until the gradient norm falls below 1e-12.
    fn solve_minimizer_by_descent(&self) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.p];
        let step = 1.0 / self.ell;
        for _ in 0..1_000_000u64 {
            let g = self.global_grad(&x);
            if linalg::norm2(&g) <= 1e-12 {
                return Ok(x);
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= step * gi;
            }
        }
        Err(Error::Numeric(
            "minimizer descent oracle did not reach 1e-12 within 1e6 iterations".into(),
        ))
    }

    fn check_minimizer_residual(&self) -> Result<()> {
        let g = self.global_grad(&self.x_star);
        let resid = linalg::norm2(&g);
        let scale = 1.0 + linalg::norm2(&self.x_star);
        if resid > MINIMIZER_RESIDUAL_TOL * scale {
            return Err(Error::Internal(format!(
                "minimizer residual {resid:e} exceeds {MINIMIZER_RESIDUAL_TOL:e} * {scale:e}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.x_star
    }

    pub fn constants(&self) -> Constants {
        Constants {
            mu: self.mu,
            ell: self.ell,
            q: self.ell / self.mu,
            m_max: self.m.iter().copied().max().unwrap(),
            m_min: self.m.iter().copied().min().unwrap(),
        }
    }

    fn component(&self, i: usize, j: usize) -> Result<&Component> {
        self.comps
            .get(i)
            .and_then(|node| node.get(j))
            .ok_or_else(|| Error::Usage(format!("component index ({i},{j}) out of range")))
    }

    pub fn component_value(&self, i: usize, j: usize, x: &[f64]) -> Result<f64> {
        debug_assert_eq!(x.len(), self.p);
        Ok(match self.component(i, j)? {
            Component::Quadratic { a, b } => {
                let mut ax = vec![0.0; self.p];
                linalg::mat_vec(a, self.p, x, &mut ax);
                0.5 * linalg::dot(x, &ax) + linalg::dot(b, x)
            }
            Component::RegLog { feat, label } => {
                let z = label * linalg::dot(feat, x);
                softplus(-z) + 0.5 * self.lambda * linalg::dot(x, x)
            }
        })
    }

    /// Exact analytic gradient of component (i, j) at x.
    pub fn component_grad(&self, i: usize, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.p];
        self.component_grad_into(i, j, x, &mut out)?;
        Ok(out)
    }

    pub fn component_grad_into(
        &self,
        i: usize,
        j: usize,
        x: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(x.len(), self.p);
        debug_assert_eq!(out.len(), self.p);
        match self.component(i, j)? {
            Component::Quadratic { a, b } => {
                linalg::mat_vec(a, self.p, x, out);
                for (o, bv) in out.iter_mut().zip(b) {
                    *o += bv;
                }
            }
            Component::RegLog { feat, label } => {
                let z = label * linalg::dot(feat, x);
                let factor = -label * sigmoid_neg(z);
                for l in 0..self.p {
                    out[l] = factor * feat[l] + self.lambda * x[l];
                }
            }
        }
        Ok(())
    }

    /// (1/m_i) sum_j component gradients at x.
    pub fn local_full_grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mi = *self
            .m
            .get(i)
            .ok_or_else(|| Error::Usage(format!("node index {i} out of range")))?;
        let mut acc = vec![0.0; self.p];
        let mut scratch = vec![0.0; self.p];
        for j in 0..mi {
            self.component_grad_into(i, j, x, &mut scratch)?;
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += s;
            }
        }
        for a in &mut acc {
            *a /= mi as f64;
        }
        Ok(acc)
    }

    /// (1/n) sum_i local full gradients at a common point x.
    pub fn global_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.p];
        for i in 0..self.n {
            let g = self.local_full_grad(i, x).expect("node index in range");
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= self.n as f64;
        }
        acc
    }

    /// Global objective value at a common point x.
    pub fn global_value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut node = 0.0;
            for j in 0..self.m[i] {
                node += self.component_value(i, j, x).expect("index in range");
            }
            acc += node / self.m[i] as f64;
        }
        acc / self.n as f64
    }

    /// Self-describing text serialization; parses back bit-for-bit.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.family {
            Family::Quadratic => out.push_str("family quadratic\n"),
            Family::RegLog => out.push_str("family reglog\n"),
        }
        out.push_str(&format!("n {}\np {}\n", self.n, self.p));
        let ms: Vec<String> = self.m.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("m {}\n", ms.join(" ")));
        out.push_str(&format!("mu {}\nell {}\n", self.mu, self.ell));
        if self.family == Family::RegLog {
            out.push_str(&format!("lambda {}\n", self.lambda));
        }
        let xs: Vec<String> = self.x_star.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("xstar {}\n", xs.join(" ")));
        for (i, node) in self.comps.iter().enumerate() {
            for (j, comp) in node.iter().enumerate() {
                out.push_str(&format!("component {i} {j}\n"));
                match comp {
                    Component::Quadratic { a, b } => {
                        let avals: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                        let bvals: Vec<String> = b.iter().map(|v| v.to_string()).collect();
                        out.push_str(&format!("a {}\n", avals.join(" ")));
                        out.push_str(&format!("b {}\n", bvals.join(" ")));
                    }
                    Component::RegLog { feat, label } => {
                        let fvals: Vec<String> = feat.iter().map(|v| v.to_string()).collect();
                        out.push_str(&format!("feat {}\n", fvals.join(" ")));
                        out.push_str(&format!("label {}\n", label));
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse_text(text: &str) -> Result<Problem> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut expect = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Config(format!("problem file: missing `{key}` line")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::Config(format!("problem file: expected `{key}`, got `{line}`")))?;
            Ok(rest.trim().to_string())
        };
        let family = match expect("family")?.as_str() {
            "quadratic" => Family::Quadratic,
            "reglog" => Family::RegLog,
            other => return Err(Error::Config(format!("unknown family `{other}`"))),
        };
        let n: usize = parse_scalar(&expect("n")?)?;
        let p: usize = parse_scalar(&expect("p")?)?;
        let m: Vec<usize> = parse_list(&expect("m")?)?;
        let mu: f64 = parse_scalar(&expect("mu")?)?;
        let ell: f64 = parse_scalar(&expect("ell")?)?;
        let lambda: f64 = if family == Family::RegLog {
            parse_scalar(&expect("lambda")?)?
        } else {
            0.0
        };
        let x_star: Vec<f64> = parse_list(&expect("xstar")?)?;
        if m.len() != n || x_star.len() != p {
            return Err(Error::Config("problem file: inconsistent dimensions".into()));
        }
        let mut comps: Vec<Vec<Component>> = Vec::with_capacity(n);
        for (i, &mi) in m.iter().enumerate() {
            let mut node = Vec::with_capacity(mi);
            for j in 0..mi {
                let header = expect("component")?;
                let expected = format!("{i} {j}");
                if header != expected {
                    return Err(Error::Config(format!(
                        "problem file: expected `component {expected}`, got `component {header}`"
                    )));
                }
                match family {
                    Family::Quadratic => {
                        let a: Vec<f64> = parse_list(&expect("a")?)?;
                        let b: Vec<f64> = parse_list(&expect("b")?)?;
                        if a.len() != p * p || b.len() != p {
                            return Err(Error::Config(format!(
                                "problem file: component ({i},{j}) has wrong sizes"
                            )));
                        }
                        node.push(Component::Quadratic { a, b });
                    }
                    Family::RegLog => {
                        let feat: Vec<f64> = parse_list(&expect("feat")?)?;
                        let label: f64 = parse_scalar(&expect("label")?)?;
                        if feat.len() != p {
                            return Err(Error::Config(format!(
                                "problem file: component ({i},{j}) has wrong sizes"
                            )));
                        }
                        node.push(Component::RegLog { feat, label });
                    }
                }
            }
            comps.push(node);
        }
        expect("end")?;
        validate_shape(n, &m, p)?;
        let problem = Problem {
            n,
            p,
            m,
            family,
            lambda,
            comps,
            mu,
            ell,
            x_star,
        };
        problem.check_minimizer_residual()?;
        Ok(problem)
    }
}

fn validate_shape(n: usize, m: &[usize], p: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("need at least one node".into()));
    }
    if p == 0 {
        return Err(Error::Config("need decision dimension >= 1".into()));
    }
    if m.len() != n {
        return Err(Error::Config(format!(
            "component counts ({}) do not match node count ({n})",
            m.len()
        )));
    }
    if m.iter().any(|&mi| mi == 0) {
        return Err(Error::Config("every node needs at least one component".into()));
    }
    Ok(())
}

fn parse_scalar<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| Error::Config(format!("problem file: bad value `{s}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split_whitespace().map(parse_scalar).collect()
}
