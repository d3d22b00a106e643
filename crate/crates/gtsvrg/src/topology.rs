//! Network topologies and their mixing matrices.
//!
//! A mixing matrix must be non-negative and doubly stochastic with second
//! largest singular value strictly below one; every rate formula downstream
//! divides by `1 - sigma^2`, so sigma = 1 (disconnected or periodic input)
//! is rejected at construction.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg;

/// Undirected simple graph. Self-mixing comes from the weight construction,
/// not from stored self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Build from an explicit edge list; endpoints are normalized to
    /// `(min, max)` and validated.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Topology(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Topology(format!(
                    "edge ({a},{b}) out of range for {n} nodes"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// Supported topology families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    Ring,
    Path,
    Grid2d { rows: usize, cols: usize },
    Complete,
    ErdosRenyi { prob: f64 },
}

/// Attempts before giving up on sampling a connected Erdos-Renyi graph.
const ER_MAX_RETRIES: u64 = 100;

/// Construct a connected graph of the requested family.
pub fn build_graph(kind: TopologyKind, n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Config("graph needs at least one node".into()));
    }
    let g = match kind {
        TopologyKind::Ring => {
            let mut edges = Vec::new();
            if n == 2 {
                edges.push((0, 1));
            } else if n > 2 {
                for i in 0..n {
                    edges.push((i, (i + 1) % n));
                }
            }
            Graph::from_edges(n, edges)?
        }
        TopologyKind::Path => {
            Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))?
        }
        TopologyKind::Grid2d { rows, cols } => {
            if rows * cols != n {
                return Err(Error::Config(format!(
                    "grid2d needs rows*cols = n, got {rows}x{cols} != {n}"
                )));
            }
            if rows == 0 || cols == 0 {
                return Err(Error::Config("grid2d needs positive rows and cols".into()));
            }
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let u = r * cols + c;
                    if c + 1 < cols {
                        edges.push((u, u + 1));
                    }
                    if r + 1 < rows {
                        edges.push((u, u + cols));
                    }
                }
            }
            Graph::from_edges(n, edges)?
        }
        TopologyKind::Complete => {
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    edges.push((a, b));
                }
            }
            Graph::from_edges(n, edges)?
        }
        TopologyKind::ErdosRenyi { prob } => {
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(Error::Config(format!(
                    "erdos_renyi probability must be in (0,1], got {prob}"
                )));
            }
            let mut last = None;
            for attempt in 0..ER_MAX_RETRIES {
                let mut rng = ChaCha12Rng::seed_from_u64(
                    seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                );
                let mut edges = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.random::<f64>() < prob {
                            edges.push((a, b));
                        }
                    }
                }
                let g = Graph::from_edges(n, edges)?;
                if g.is_connected() {
                    last = Some(g);
                    break;
                }
            }
            last.ok_or_else(|| {
                Error::Topology(format!(
                    "no connected graph after {ER_MAX_RETRIES} attempts (n={n}, prob={prob})"
                ))
            })?
        }
    };
    if !g.is_connected() {
        return Err(Error::Topology("constructed graph is disconnected".into()));
    }
    Ok(g)
}

/// Doubly stochastic mixing matrix together with its contraction factor.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    n: usize,
    dense: Vec<f64>,
    sigma: f64,
    // sparse rows for the hot path (entries are in ascending column order,
    // so row sums are evaluated in a fixed order in every exec mode)
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
}

const STOCHASTIC_TOL: f64 = 1e-12;
const SIGMA_ONE_TOL: f64 = 1e-10;

impl MixingMatrix {
    /// Validate a dense row-major matrix and compute its second singular
    /// value. Error messages name the violated invariant and its index.
    pub fn from_dense(n: usize, dense: Vec<f64>) -> Result<Self> {
        if n == 0 || dense.len() != n * n {
            return Err(Error::Config(format!(
                "expected {n}x{n} matrix, got {} entries",
                dense.len()
            )));
        }
        if let Some(pos) = dense.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite weight at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if dense[i * n + j] < 0.0 {
                    return Err(Error::Topology(format!(
                        "negative weight at row {i}, column {j}"
                    )));
                }
            }
        }
        for i in 0..n {
            let s: f64 = dense[i * n..(i + 1) * n].iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Topology(format!(
                    "row {i} sums to {s:.17} (expected 1 within {STOCHASTIC_TOL:e})"
                )));
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| dense[i * n + j]).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Topology(format!(
                    "column {j} sums to {s:.17} (expected 1 within {STOCHASTIC_TOL:e})"
                )));
            }
        }
        let sigma = second_singular_value(&dense, n)?;
        if sigma >= 1.0 - SIGMA_ONE_TOL {
            return Err(Error::Topology(format!(
                "second singular value {sigma} is not separated from 1 \
                 (disconnected or periodic weights)"
            )));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let w = dense[i * n + j];
                if w != 0.0 {
                    col_idx.push(j);
                    weights.push(w);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(MixingMatrix {
            n,
            dense,
            sigma,
            row_ptr,
            col_idx,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dense(&self) -> &[f64] {
        &self.dense
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.dense[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                if self.dense[i * n + j] != self.dense[j * n + i] {
                    return false;
                }
            }
        }
        true
    }

    /// dst = W * src for stacked row-major state src (n rows of p entries).
    pub fn apply(&self, src: &[f64], p: usize, dst: &mut [f64], mode: ExecMode) {
        debug_assert_eq!(src.len(), self.n * p);
        debug_assert_eq!(dst.len(), self.n * p);
        let (row_ptr, col_idx, weights) = (&self.row_ptr, &self.col_idx, &self.weights);
        exec::fill_rows(mode, dst, p, |i, row| {
            row.fill(0.0);
            for e in row_ptr[i]..row_ptr[i + 1] {
                let w = weights[e];
                let src_row = &src[col_idx[e] * p..col_idx[e] * p + p];
                for (o, s) in row.iter_mut().zip(src_row) {
                    *o += w * s;
                }
            }
        });
    }

    /// Sparse row access for fused update kernels: `(row_ptr, col_idx, weights)`.
    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_ptr, &self.col_idx, &self.weights)
    }

    /// Serialize in the plain-text load format.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.entry(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the plain-text format: first line `n`, then n rows of n
    /// whitespace-separated decimals. Re-validates all invariants.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Config("empty matrix file".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad dimension line: {e}")))?;
        let mut dense = Vec::with_capacity(n * n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Config(format!("missing row {i}")))?;
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Config(format!("row {i}: {e}")))?;
            if row.len() != n {
                return Err(Error::Config(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dense.extend_from_slice(&row);
        }
        Self::from_dense(n, dense)
    }
}

/// Metropolis-Hastings weights: symmetric, doubly stochastic by
/// construction, with w_ij = 1/(1 + max(deg_i, deg_j)) on edges and the
/// self weight absorbing the remainder.
pub fn metropolis_weights(g: &Graph) -> Result<MixingMatrix> {
    if !g.is_connected() {
        return Err(Error::Topology(
            "metropolis weights need a connected graph".into(),
        ));
    }
    let n = g.n();
    let deg: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut dense = vec![0.0; n * n];
    for (a, b) in g.edges() {
        let w = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        dense[a * n + b] = w;
        dense[b * n + a] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| dense[i * n + j]).sum();
        dense[i * n + i] = 1.0 - off;
    }
    MixingMatrix::from_dense(n, dense)
}

/// Uniform averaging weights 1/n on the complete graph; sigma is exactly 0.
pub fn uniform_complete(n: usize) -> Result<MixingMatrix> {
    if n == 0 {
        return Err(Error::Config("need at least one node".into()));
    }
    MixingMatrix::from_dense(n, vec![1.0 / n as f64; n * n])
}

/// Second largest singular value of a square matrix.
///
/// Symmetric matrices use their eigenvalues (singular values are the
/// absolute eigenvalues); otherwise this returns the largest singular
/// value of `W - (1/n) 1 1^T`, the quantity the contraction analysis uses.
pub fn second_singular_value(a: &[f64], n: usize) -> Result<f64> {
    if a.len() != n * n {
        return Err(Error::Usage(format!(
            "expected square matrix of dimension {n}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in matrix".into()));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let symmetric = (0..n).all(|i| (i + 1..n).all(|j| (a[i * n + j] - a[j * n + i]).abs() <= 1e-14));
    if symmetric {
        let mut mags: Vec<f64> = symmetric_eigen_abs(a, n)?;
        mags.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(mags[1])
    } else {
        let inv_n = 1.0 / n as f64;
        let b: Vec<f64> = a.iter().map(|&v| v - inv_n).collect();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += b[l * n + i] * b[l * n + j];
                }
                gram[i * n + j] = acc;
            }
        }
        let eig = linalg::symmetric_eigenvalues(&gram, n)?;
        Ok(eig[0].max(0.0).sqrt())
    }
}

fn symmetric_eigen_abs(a: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(linalg::symmetric_eigenvalues(a, n)?
        .into_iter()
        .map(f64::abs)
        .collect())
}

/// Mean row of a stacked n-by-p state.
pub fn row_mean(x: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            m[j] += x[i * p + j];
        }
    }
    for v in &mut m {
        *v /= n as f64;
    }
    m
}

/// Squared Frobenius distance of a stacked state from consensus on `mean`.
pub fn deviation_sq(x: &[f64], n: usize, p: usize, mean: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..p {
            let d = x[i * p + j] - mean[j];
            acc += d * d;
        }
    }
    acc
}

/// One-shot check of the mixing contraction `|Wx - W8x| <= sigma |x - W8x|`
/// (W8 is the averaging projector). Returns both sides and a pass flag at
/// relative tolerance 1e-9.
pub fn contraction_check(w: &MixingMatrix, x: &[f64], p: usize) -> (f64, f64, bool) {
    let n = w.n();
    assert_eq!(x.len(), n * p, "dimension mismatch in contraction check");
    let mean = row_mean(x, n, p);
    let mut wx = vec![0.0; n * p];
    w.apply(x, p, &mut wx, ExecMode::Sequential);
    let lhs = deviation_sq(&wx, n, p, &mean).sqrt();
    let rhs = w.sigma() * deviation_sq(x, n, p, &mean).sqrt();
    let ok = lhs <= rhs + 1e-9 * (1.0 + rhs);
    (lhs, rhs, ok)
}
