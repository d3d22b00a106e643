//! Small dense linear algebra: just enough for mixing matrices (symmetric
//! eigenvalues, singular values via the Gram matrix), minimizer solves, and
//! the 3x3 rate matrices (characteristic-polynomial spectral radius).
//!
//! Matrices are row-major `&[f64]` slices with an explicit dimension; the
//! sizes here (network width, decision dimension, 3x3 rate algebra) never
//! justify an external solver.

use crate::error::{Error, Result};

/// y = A x for square row-major `a` of dimension `n`.
pub fn mat_vec(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(y.len(), n);
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        y[i] = acc;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Numeric(format!(
                "singular or non-finite system (pivot {best:e} in column {col})"
            )));
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in col + 1..n {
            acc -= m[col * n + j] * x[j];
        }
        x[col] = acc / m[col * n + col];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Returns them in descending order.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in symmetric matrix".into()));
    }
    let mut m = a.to_vec();
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eig)
}

/// 3x3 matrix for the rate algebra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn zero() -> Self {
        Mat3([[0.0; 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for l in 0..3 {
                    acc += self.0[i][l] * other.0[l][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.0[i][0] * v[0] + self.0[i][1] * v[1] + self.0[i][2] * v[2];
        }
        out
    }

    pub fn add(&self, other: &Mat3) -> Mat3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += other.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat3) -> Mat3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= other.0[i][j];
            }
        }
        out
    }

    /// Matrix power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> Mat3 {
        let mut base = *self;
        let mut acc = Mat3::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().flatten().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    /// Solve M x = b.
    pub fn solve_vec(&self, b: [f64; 3]) -> Result<[f64; 3]> {
        let x = solve(&self.as_slice(), 3, &b)?;
        Ok([x[0], x[1], x[2]])
    }

    /// Solve M X = B column-wise.
    pub fn solve_mat(&self, b: &Mat3) -> Result<Mat3> {
        let mut out = Mat3::zero();
        for j in 0..3 {
            let col = [b.0[0][j], b.0[1][j], b.0[2][j]];
            let x = self.solve_vec(col)?;
            for i in 0..3 {
                out.0[i][j] = x[i];
            }
        }
        Ok(out)
    }
}

/// Largest root modulus of x^3 + c2 x^2 + c1 x + c0, with Newton polish on
/// real candidates.
fn cubic_max_modulus(c2: f64, c1: f64, c0: f64) -> f64 {
    let poly = |x: f64| ((x + c2) * x + c1) * x + c0;
    let dpoly = |x: f64| (3.0 * x + 2.0 * c2) * x + c1;
    let polish = |mut x: f64| {
        for _ in 0..4 {
            let d = dpoly(x);
            if d.abs() < 1e-300 {
                break;
            }
            let step = poly(x) / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        x
    };

    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let shift = c2 / 3.0;

    let scale = 1.0f64.max(c2.abs()).max(c1.abs()).max(c0.abs());
    if p.abs() <= 1e-14 * scale && q.abs() <= 1e-14 * scale {
        // near-triple root
        let t = (-q).cbrt();
        return polish(t - shift).abs();
    }

    if disc > 0.0 {
        // one real root and a conjugate pair
        let sq = disc.sqrt();
        let u = (-0.5 * q + sq).cbrt();
        let v = (-0.5 * q - sq).cbrt();
        let t1 = u + v;
        let real_root = polish(t1 - shift);
        let re = -0.5 * t1 - shift;
        let im_sq = 0.75 * (u - v) * (u - v);
        let pair_mod = (re * re + im_sq).sqrt();
        real_root.abs().max(pair_mod)
    } else {
        // three real roots
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos();
        let mut best = 0.0f64;
        for k in 0..3 {
            let t = 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            let x = polish(t - shift);
            best = best.max(x.abs());
        }
        best
    }
}

/// Spectral radius of a square matrix.
///
/// Dimensions up to 3 use closed-form characteristic-polynomial roots
/// (accurate to ~1e-13 after Newton polish); larger matrices must be
/// non-negative and use power iteration on A + I, whose Perron root is
/// simple and non-oscillating.
pub fn spectral_radius(a: &[f64], d: usize) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in matrix".into()));
    }
    match d {
        0 => Err(Error::Usage("empty matrix".into())),
        1 => Ok(a[0].abs()),
        2 => {
            let tr = a[0] + a[3];
            let det = a[0] * a[3] - a[1] * a[2];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                Ok((0.5 * (tr + s)).abs().max((0.5 * (tr - s)).abs()))
            } else {
                Ok(det.abs().sqrt())
            }
        }
        3 => {
            let m = |i: usize, j: usize| a[i * 3 + j];
            let tr = m(0, 0) + m(1, 1) + m(2, 2);
            let minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2)
                - m(0, 2) * m(2, 0)
                + m(1, 1) * m(2, 2)
                - m(1, 2) * m(2, 1);
            let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
            Ok(cubic_max_modulus(-tr, minors, -det))
        }
        n => {
            if a.iter().any(|&v| v < 0.0) {
                return Err(Error::Numeric(
                    "power-iteration spectral radius requires a non-negative matrix for d > 3"
                        .into(),
                ));
            }
            // power iteration on A + I: the dominant eigenvalue is rho(A) + 1
            let mut x = vec![1.0 / n as f64; n];
            let mut y = vec![0.0; n];
            let mut lambda = 0.0f64;
            for it in 0..100_000 {
                mat_vec(a, n, &x, &mut y);
                for i in 0..n {
                    y[i] += x[i];
                }
                let norm = norm2(&y);
                if norm == 0.0 {
                    return Ok(0.0); // nilpotent-like collapse
                }
                for i in 0..n {
                    y[i] /= norm;
                }
                let next = {
                    mat_vec(a, n, &y, &mut x);
                    for i in 0..n {
                        x[i] += y[i];
                    }
                    dot(&x, &y)
                };
                std::mem::swap(&mut x, &mut y);
                if (next - lambda).abs() <= 1e-12 * next.abs().max(1.0) && it > 3 {
                    return Ok((next - 1.0).max(0.0));
                }
                lambda = next;
            }
            Err(Error::Numeric("power iteration did not converge".into()))
        }
    }
}

/// Spectral radius of a [`Mat3`].
pub fn spectral_radius3(m: &Mat3) -> Result<f64> {
    spectral_radius(&m.as_slice(), 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve(&a, 2, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve(&a, 2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn jacobi_known_eigenvalues() {
        // diag(3, 1) rotated by 45 degrees: [[2,1],[1,2]]
        let a = [2.0, 1.0, 1.0, 2.0];
        let e = symmetric_eigenvalues(&a, 2).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_identity_is_one() {
        let i3 = Mat3::identity();
        assert!((spectral_radius3(&i3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_nilpotent_is_zero() {
        let a = [0.0, 1.0, 0.0, 0.0];
        assert!(spectral_radius(&a, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_diagonal() {
        let m = Mat3([[0.2, 0.0, 0.0], [0.0, 0.9, 0.0], [0.0, 0.0, 0.5]]);
        assert!((spectral_radius3(&m).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_complex_pair_dominates() {
        // rotation by 90 degrees scaled by 2 in the top block, small diagonal:
        // eigenvalues {±2i, 0.1}, radius 2.
        let m = Mat3([[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.1]]);
        assert!((spectral_radius3(&m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_matches_power_iteration_on_random_nonnegative() {
        let mut seed = 1u64;
        let mut next = || {
            seed = crate::rng::stream_u64(seed, 11, 1, 2, 3);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let mut m = Mat3::zero();
            for i in 0..3 {
                for j in 0..3 {
                    m.0[i][j] = next() * 4.0;
                }
            }
            let exact = spectral_radius3(&m).unwrap();
            let power = spectral_radius(&m.as_slice(), 3).unwrap();
            assert!((exact - power).abs() <= 1e-9 * (1.0 + exact));
            // independent route: power iteration forced through the d>3 path
            let mut padded = vec![0.0; 16];
            for i in 0..3 {
                for j in 0..3 {
                    padded[i * 4 + j] = m.0[i][j];
                }
            }
            let padded_rho = spectral_radius(&padded, 4).unwrap();
            assert!(
                (exact - padded_rho).abs() <= 1e-8 * (1.0 + exact),
                "exact={exact} padded={padded_rho}"
            );
        }
    }

    #[test]
    fn mat3_pow_matches_repeated_mul() {
        let m = Mat3([[0.5, 0.1, 0.0], [0.2, 0.4, 0.1], [0.0, 0.3, 0.6]]);
        let mut acc = Mat3::identity();
        for _ in 0..13 {
            acc = acc.mul(&m);
        }
        let fast = m.pow(13);
        for i in 0..3 {
            for j in 0..3 {
                assert!((acc.0[i][j] - fast.0[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn non_finite_is_rejected() {
        let a = [f64::NAN, 0.0, 0.0, 1.0];
        assert!(spectral_radius(&a, 2).is_err());
    }
}
