//! Dense linear algebra kernels for small square systems.
//!
//! Everything here is sized for species counts, so matrices are tiny
//! (n <= 16) and dense direct methods are used throughout:
//!
//! - LU factorization with partial pivoting for solves and inverses,
//! - a 1-norm condition estimator (Hager-style) to detect numerically
//!   singular systems,
//! - a cyclic-sweep Jacobi eigensolver for symmetric matrices, converged
//!   to an off-diagonal Frobenius norm of 1e-12.
//!
//! All routines are deterministic: no pivot tie-breaking depends on
//! anything but entry values, and the Jacobi sweep order is fixed.

use thiserror::Error;

/// Largest supported matrix dimension (species count).
pub const MAX_DIM: usize = 16;

/// Off-diagonal Frobenius-norm target for the Jacobi eigensolver.
pub const JACOBI_OFF_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix dimension {0} outside supported range 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("matrix is exactly singular (zero pivot at column {0})")]
    ZeroPivot(usize),
    #[error("Jacobi eigensolver failed to reach off-norm {JACOBI_OFF_NORM_TOL:e} in {0} sweeps")]
    NoConvergence(usize),
}

/// Dense square matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM, "dimension {n} outside 1..={MAX_DIM}");
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from row-major data; `data.len()` must be `n*n`.
    pub fn from_rows(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n, "row-major data length mismatch");
        let mut m = Mat::zeros(n);
        m.a.copy_from_slice(data);
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let mut m = self.clone();
        for (x, y) in m.a.iter_mut().zip(&other.a) {
            *x += y;
        }
        m
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let mut m = self.clone();
        for (x, y) in m.a.iter_mut().zip(&other.a) {
            *x -= y;
        }
        m
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut m = self.clone();
        for x in m.a.iter_mut() {
            *x *= s;
        }
        m
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.get(i, j) * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// y = M^T x without forming the transpose.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..n {
                y[j] += self.get(i, j) * xi;
            }
        }
        y
    }

    /// Scales row i by l[i] and column j by r[j]: out = diag(l) * M * diag(r).
    pub fn diag_scale(&self, l: &[f64], r: &[f64]) -> Mat {
        assert_eq!(l.len(), self.n);
        assert_eq!(r.len(), self.n);
        Mat::from_fn(self.n, |i, j| l[i] * self.get(i, j) * r[j])
    }

    /// x^T M y.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.get(i, j) * y[j];
            }
            s += x[i] * row;
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// max_{ij} |M_ij - M_ji|.
    pub fn symmetry_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                r = r.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        r
    }

    /// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.
    ///
    /// The input is symmetrized entrywise first; callers are expected to pass
    /// matrices that are symmetric up to rounding. Convergence criterion is
    /// off-diagonal Frobenius norm <= 1e-12.
    pub fn sym_eigenvalues(&self) -> Result<Vec<f64>, MatError> {
        let n = self.n;
        if n == 1 {
            return Ok(vec![self.get(0, 0)]);
        }
        let mut a = Mat::from_fn(n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        let max_sweeps = 100;
        for _ in 0..max_sweeps {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += 2.0 * a.get(p, q) * a.get(p, q);
                }
            }
            if off.sqrt() <= JACOBI_OFF_NORM_TOL {
                let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
                ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
                return Ok(ev);
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        Err(MatError::NoConvergence(max_sweeps))
    }

    /// Spectral norm (largest singular value), via eigenvalues of M^T M.
    pub fn spectral_norm(&self) -> Result<f64, MatError> {
        let mtm = self.transpose().matmul(self);
        let ev = mtm.sym_eigenvalues()?;
        Ok(ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }

    pub fn lu(&self) -> Result<Lu, MatError> {
        Lu::factor(self)
    }

    /// Dense inverse through LU; errors on an exactly singular matrix.
    pub fn inverse(&self) -> Result<Mat, MatError> {
        let lu = self.lu()?;
        let n = self.n;
        let mut inv = Mat::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = lu.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }
}

/// LU factorization with partial pivoting: P*A = L*U.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    /// Row swapped with row k at elimination step k.
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &Mat) -> Result<Lu, MatError> {
        let n = m.n;
        let mut lu = m.a.clone();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(MatError::ZeroPivot(k));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves A^T x = b.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // U^T is lower triangular: forward substitution.
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        // L^T is unit upper triangular: back substitution.
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s;
        }
        // Undo the row permutation (apply swaps in reverse).
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        x
    }

    /// Estimates the 1-norm condition number ||A||_1 * est(||A^-1||_1)
    /// with a Hager-style power iteration on A^-1.
    pub fn condition_1norm(&self, a: &Mat) -> f64 {
        let n = self.n;
        let norm_a = a.one_norm();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (mut j_best, mut z_best) = (0usize, 0.0f64);
            for (j, zj) in z.iter().enumerate() {
                if zj.abs() > z_best {
                    z_best = zj.abs();
                    j_best = j;
                }
            }
            let zx: f64 = z.iter().zip(&x).map(|(zi, xi)| zi * xi).sum();
            if iter > 0 && z_best <= zx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j_best] = 1.0;
        }
        norm_a * est
    }
}

/// Euclidean norm of a vector.
pub fn norm_2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum absolute entry of a vector.
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn identity_solves_are_exact() {
        let m = Mat::identity(4);
        let lu = m.lu().unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(lu.solve(&b), b);
        assert_eq!(lu.solve_transpose(&b), b);
    }

    #[test]
    fn known_2x2_inverse() {
        // [[1, 2], [3, 4]] has inverse [[-2, 1], [1.5, -0.5]].
        let m = Mat::from_rows(2, &[1.0, 2.0, 3.0, 4.0]);
        let inv = m.inverse().unwrap();
        let expected = [-2.0, 1.0, 1.5, -0.5];
        for (got, want) in inv.as_slice().iter().zip(&expected) {
            assert_close(*got, *want, 1e-14);
        }
    }

    #[test]
    fn lu_residual_random_matrices() {
        let mut rng = Rng::new(7);
        for _ in 0..200 {
            let n = 2 + (rng.next_u64() % 7) as usize;
            let m = Mat::from_fn(n, |_, _| rng.uniform(-2.0, 2.0));
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let lu = match m.lu() {
                Ok(lu) => lu,
                Err(_) => continue,
            };
            let x = lu.solve(&b);
            let r = m.matvec(&x);
            for i in 0..n {
                assert_close(r[i], b[i], 1e-9 * (1.0 + m.one_norm()));
            }
            let xt = lu.solve_transpose(&b);
            let rt = m.matvec_transpose(&xt);
            for i in 0..n {
                assert_close(rt[i], b[i], 1e-9 * (1.0 + m.one_norm()));
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = Mat::from_rows(2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(m.lu(), Err(MatError::ZeroPivot(_))));
    }

    #[test]
    fn condition_of_identity_is_one() {
        let m = Mat::identity(5);
        let lu = m.lu().unwrap();
        assert_close(lu.condition_1norm(&m), 1.0, 1e-12);
    }

    #[test]
    fn condition_detects_near_singular() {
        // diag(1, 1e-13) has 1-norm condition 1e13.
        let m = Mat::from_rows(2, &[1.0, 0.0, 0.0, 1e-13]);
        let lu = m.lu().unwrap();
        let cond = lu.condition_1norm(&m);
        assert!(cond > 1e12 && cond < 1e14, "cond = {cond}");
    }

    #[test]
    fn jacobi_known_2x2() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = Mat::from_rows(2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = m.sym_eigenvalues().unwrap();
        assert_close(ev[0], 1.0, 1e-12);
        assert_close(ev[1], 3.0, 1e-12);
    }

    #[test]
    fn jacobi_matches_trace_and_determinant() {
        let mut rng = Rng::new(11);
        for _ in 0..100 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let g = Mat::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
            let m = g.add(&g.transpose()).scale(0.5);
            let ev = m.sym_eigenvalues().unwrap();
            let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
            assert_close(ev.iter().sum::<f64>(), trace, 1e-10 * (1.0 + trace.abs()));
            // Shift invariance: eig(M + 2I) = eig(M) + 2.
            let shifted = m.add(&Mat::identity(n).scale(2.0));
            let ev2 = shifted.sym_eigenvalues().unwrap();
            for (a, b) in ev.iter().zip(&ev2) {
                assert_close(a + 2.0, *b, 1e-10);
            }
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Mat::diag(&[3.0, -5.0, 1.0]);
        assert_close(m.spectral_norm().unwrap(), 5.0, 1e-10);
    }

    #[test]
    fn psd_product_eigenvalues_nonnegative() {
        let mut rng = Rng::new(23);
        for _ in 0..50 {
            let n = 2 + (rng.next_u64() % 5) as usize;
            let g = Mat::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
            let m = g.transpose().matmul(&g);
            let ev = m.sym_eigenvalues().unwrap();
            assert!(ev[0] >= -1e-10, "PSD eigenvalue {}", ev[0]);
        }
    }
}
