//! Simplex-constrained states and the singular linear algebra around them.
//!
//! Multicomponent diffusive mixtures are described by volume fractions on the
//! unit simplex. The force–flux coupling matrix `A(c)` built from binary drag
//! coefficients is symmetric positive semidefinite and singular: its kernel is
//! spanned by the entrywise square root `√c`. This module provides
//!
//! - validated [`Composition`] and [`DiffusionTable`] value types,
//! - the orthogonal projectors onto `span{√c}` and its complement,
//! - construction of the coupling matrix and its generalized variants,
//! - the constrained (Bott–Duffin) inverse `P_L (M P_L + P_⊥)⁻¹` together
//!   with observed and closed-form spectral bounds,
//! - an independent constrained-solve oracle used by the test suites,
//! - flux inversion `√c_i u_i = −2 (M^BD g)_i` for gradient data `g = ∇√c`.
//!
//! Everything is dense and sized for small species counts (n ≤ 16).

use crate::mat::{dot, norm_2, norm_inf, Mat, MatError};
use thiserror::Error;

/// Accepted deviation of input entries' sum from 1 in [`Composition::new`].
pub const COMPOSITION_SUM_INPUT_TOL: f64 = 1e-9;
/// Magnitude of negative input entries that are clamped to exact zero.
pub const COMPOSITION_NEGATIVE_CLAMP: f64 = 1e-12;
/// Residual tolerance for the `M √c = 0` kernel precondition check.
pub const KERNEL_RESIDUAL_TOL: f64 = 1e-10;
/// Condition-number threshold above which the shifted system counts as singular.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Strict-positivity floor demanded by the `1/√c_i` scaling of generalized
/// coupling matrices.
pub const GENERALIZED_FLOOR: f64 = 1e-14;
/// Slack used when comparing eigenvalues against certified lower bounds.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("composition needs at least 2 species, got {0}")]
    TooFewSpecies(usize),
    #[error("composition entry {index} is negative beyond tolerance: {value:e}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("composition entries sum to {sum} (must be 1 within {COMPOSITION_SUM_INPUT_TOL:e})")]
    SumViolation { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("drag coefficient ({i},{j}) must be positive, got {value}")]
    NonPositiveDrag { i: usize, j: usize, value: f64 },
    #[error("matrix is not symmetric (max |M_ij - M_ji| = {residual:e})")]
    NotSymmetric { residual: f64 },
    #[error("matrix does not annihilate sqrt(c) (residual {residual:e} > {KERNEL_RESIDUAL_TOL:e})")]
    KernelMismatch { residual: f64 },
    #[error("matrix has negative eigenvalue {min_eigenvalue:e}; expected positive semidefinite")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("shifted system numerically singular (1-norm condition estimate {cond:e})")]
    SingularSystem { cond: f64 },
    #[error("composition entry {index} = {value:e} below strict-positivity floor {GENERALIZED_FLOOR:e}")]
    FloorViolation { index: usize, value: f64 },
    #[error("column {col} of the coupling kernel does not sum to zero (residual {residual:e})")]
    ColumnSumViolation { col: usize, residual: f64 },
    #[error("gradient vector has component along sqrt(c) (defect {defect:e})")]
    NotInFluxSubspace { defect: f64 },
    #[error(transparent)]
    Linalg(#[from] MatError),
}

/// Volume fractions on the unit simplex: nonnegative entries summing to 1.
///
/// Construction validates and then normalizes the sum, so held values satisfy
/// `|Σ c_i − 1| ≤ 1e-12` and `c_i ∈ [0, 1]`. Boundary points (some `c_i = 0`)
/// are legal states.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    values: Vec<f64>,
}

impl Composition {
    /// Validates a raw vector as a composition.
    ///
    /// Entries in `(−1e-12, 0)` are clamped to exact zero; more negative
    /// entries are rejected. The sum must be within `1e-9` of 1; the stored
    /// values are rescaled by the exact sum so the simplex invariant holds to
    /// `1e-12`. No rescue is attempted beyond those tolerances.
    pub fn new(raw: &[f64]) -> Result<Self, SimplexError> {
        if raw.len() < 2 {
            return Err(SimplexError::TooFewSpecies(raw.len()));
        }
        let mut values = raw.to_vec();
        for (index, v) in values.iter_mut().enumerate() {
            if *v < -COMPOSITION_NEGATIVE_CLAMP {
                return Err(SimplexError::NegativeEntry { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > COMPOSITION_SUM_INPUT_TOL {
            return Err(SimplexError::SumViolation { sum });
        }
        if sum != 1.0 {
            for v in values.iter_mut() {
                *v /= sum;
            }
        }
        Ok(Composition { values })
    }

    /// Wraps values already known to satisfy the simplex invariants
    /// (used for arithmetic face averages of validated cells).
    pub(crate) fn from_validated(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&v| v >= 0.0));
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-11);
        Composition { values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Entrywise square root, the kernel direction of the coupling matrix.
    pub fn sqrt_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Midpoint of two compositions; stays on the simplex.
    pub fn average(&self, other: &Composition) -> Composition {
        assert_eq!(self.n(), other.n());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Composition::from_validated(values)
    }
}

/// Symmetric positive binary drag coefficients `D_ij` (diagonal unused).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTable {
    n: usize,
    /// Full n×n storage; diagonal entries are kept at zero.
    d: Vec<f64>,
}

impl DiffusionTable {
    /// Builds from the strict upper triangle in row-major order:
    /// `[D_01, D_02, .., D_0(n-1), D_12, ..]`, `n(n−1)/2` entries.
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self, SimplexError> {
        if n < 2 {
            return Err(SimplexError::TooFewSpecies(n));
        }
        let expected = n * (n - 1) / 2;
        if upper.len() != expected {
            return Err(SimplexError::DimensionMismatch { expected, got: upper.len() });
        }
        let mut d = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = upper[k];
                k += 1;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(SimplexError::NonPositiveDrag { i, j, value: v });
                }
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Ok(DiffusionTable { n, d })
    }

    /// All off-diagonal coefficients equal to `value`.
    pub fn uniform(n: usize, value: f64) -> Result<Self, SimplexError> {
        let count = n.saturating_mul(n.saturating_sub(1)) / 2;
        Self::from_upper_triangle(n, &vec![value; count])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `D_ij` for `i ≠ j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        self.d[i * self.n + j]
    }

    /// Strict upper triangle in row-major order (inverse of `from_upper_triangle`).
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Smallest inverse drag coefficient `min_{i≠j} 1/D_ij`. Every nonzero
    /// eigenvalue of the coupling matrix built from this table is bounded
    /// below by this number, for every composition.
    pub fn drag_eigenvalue_floor(&self) -> f64 {
        let mut max_d: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                max_d = max_d.max(self.get(i, j));
            }
        }
        1.0 / max_d
    }

    /// Lower bound `(2 Σ_{i≠j} (1/D_ij + 1))⁻¹` (ordered pairs) for the
    /// nonzero eigenvalues of the constrained inverse of the coupling matrix.
    pub fn inverse_eigenvalue_floor(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += 1.0 / self.get(i, j) + 1.0;
                }
            }
        }
        1.0 / (2.0 * s)
    }
}

/// Orthogonal projectors onto `L = {√c}^⊥` and its complement `span{√c}`.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    /// `(P_L)_ij = δ_ij − √(c_i c_j)`: projector onto the flux subspace.
    pub p_l: Mat,
    /// `(P_⊥)_ij = √(c_i c_j)`: projector onto the kernel direction.
    pub p_lperp: Mat,
}

/// Builds the projector pair for a composition.
pub fn projectors(c: &Composition) -> ProjectorPair {
    let s = c.sqrt_values();
    let n = c.n();
    let p_lperp = Mat::from_fn(n, |i, j| s[i] * s[j]);
    let p_l = Mat::from_fn(n, |i, j| if i == j { 1.0 - s[i] * s[j] } else { -s[i] * s[j] });
    ProjectorPair { p_l, p_lperp }
}

/// The singular force–flux coupling matrix together with its inputs.
#[derive(Debug, Clone)]
pub struct FrictionMatrix {
    pub matrix: Mat,
    pub composition: Composition,
    pub table: DiffusionTable,
}

/// Builds the coupling matrix
/// `A_ii = Σ_{k≠i} c_k/D_ik`, `A_ij = −√(c_i c_j)/D_ij` (i ≠ j).
///
/// The matrix is symmetric positive semidefinite with kernel spanned by `√c`;
/// boundary compositions (vacuum components) are fully supported.
pub fn build_friction_matrix(c: &Composition, d: &DiffusionTable) -> Result<FrictionMatrix, SimplexError> {
    let n = c.n();
    if d.n() != n {
        return Err(SimplexError::DimensionMismatch { expected: n, got: d.n() });
    }
    let s = c.sqrt_values();
    let mut m = Mat::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k != i {
                diag += c.get(k) / d.get(i, k);
            }
        }
        m.set(i, i, diag);
        for j in 0..n {
            if j != i {
                m.set(i, j, -s[i] * s[j] / d.get(i, j));
            }
        }
    }
    Ok(FrictionMatrix { matrix: m, composition: c.clone(), table: d.clone() })
}

/// Rescales a model kernel `K` into the coupling matrix
/// `B_ij = K_ij √c_j / √c_i`.
///
/// Preconditions: every column of `K` sums to zero (tolerance scaled by the
/// matrix size), and `c` is strictly positive — entries below `1e-14` are
/// rejected because of the `1/√c_i` factor.
pub fn build_generalized_friction(k: &Mat, c: &Composition) -> Result<Mat, SimplexError> {
    let n = c.n();
    if k.n() != n {
        return Err(SimplexError::DimensionMismatch { expected: n, got: k.n() });
    }
    for (index, &value) in c.values().iter().enumerate() {
        if value < GENERALIZED_FLOOR {
            return Err(SimplexError::FloorViolation { index, value });
        }
    }
    let scale = 1.0 + k.one_norm();
    for col in 0..n {
        let sum: f64 = (0..n).map(|row| k.get(row, col)).sum();
        if sum.abs() > 1e-10 * scale {
            return Err(SimplexError::ColumnSumViolation { col, residual: sum.abs() });
        }
    }
    let s = c.sqrt_values();
    Ok(Mat::from_fn(n, |i, j| k.get(i, j) * s[j] / s[i]))
}

/// A constrained inverse together with spectral information.
///
/// `matrix` is `P_L (M P_L + P_⊥)⁻¹`, the inverse of `M` restricted to the
/// flux subspace `L = {√c}^⊥`. `mu_bound` is a lower bound for the nonzero
/// eigenvalues of the forward matrix and `lambda_bound` one for the nonzero
/// eigenvalues of the inverse; drag-table constructions store the closed-form
/// bounds, generic constructions store the observed spectral gaps.
#[derive(Debug, Clone)]
pub struct ConstrainedInverse {
    pub matrix: Mat,
    pub mu_bound: f64,
    pub lambda_bound: f64,
    pub composition: Composition,
    /// Eigenvalues of the forward matrix, ascending (index 0 is the kernel).
    pub forward_eigenvalues: Vec<f64>,
    /// Eigenvalues of the constrained inverse, ascending (index 0 is the kernel).
    pub inverse_eigenvalues: Vec<f64>,
}

impl ConstrainedInverse {
    /// Smallest nonzero eigenvalue of the forward matrix.
    pub fn min_nonzero_forward(&self) -> f64 {
        self.forward_eigenvalues[1]
    }

    /// Smallest nonzero eigenvalue of the inverse.
    pub fn min_nonzero_inverse(&self) -> f64 {
        self.inverse_eigenvalues[1]
    }

    /// Largest eigenvalue of the inverse.
    pub fn max_inverse(&self) -> f64 {
        *self.inverse_eigenvalues.last().unwrap()
    }
}

fn check_inverse_preconditions(m: &Mat, c: &Composition) -> Result<Vec<f64>, SimplexError> {
    let n = c.n();
    if m.n() != n {
        return Err(SimplexError::DimensionMismatch { expected: n, got: m.n() });
    }
    let scale = 1.0_f64.max(m.max_abs());
    let sym = m.symmetry_residual();
    if sym > 1e-10 * scale {
        return Err(SimplexError::NotSymmetric { residual: sym });
    }
    let s = c.sqrt_values();
    let residual = norm_inf(&m.matvec(&s));
    if residual > KERNEL_RESIDUAL_TOL * scale {
        return Err(SimplexError::KernelMismatch { residual });
    }
    Ok(s)
}

/// Computes the constrained inverse of a symmetric PSD matrix whose kernel is
/// `span{√c}`, via a dense direct solve of the shifted system `M P_L + P_⊥`.
///
/// Fails with `SingularSystem` if the shifted system's estimated 1-norm
/// condition number exceeds `1e14`, which signals violated preconditions.
/// Inputs that are asymmetric, have the wrong kernel, or are indefinite are
/// rejected rather than repaired.
pub fn bott_duffin(m: &Mat, c: &Composition) -> Result<ConstrainedInverse, SimplexError> {
    check_inverse_preconditions(m, c)?;
    let n = c.n();
    let forward_eigenvalues = m.sym_eigenvalues()?;
    let scale = 1.0_f64.max(m.max_abs());
    if forward_eigenvalues[0] < -1e-8 * scale {
        return Err(SimplexError::NotPositiveSemidefinite { min_eigenvalue: forward_eigenvalues[0] });
    }
    let proj = projectors(c);
    let shifted = m.matmul(&proj.p_l).add(&proj.p_lperp);
    let lu = shifted.lu().map_err(|_| SimplexError::SingularSystem { cond: f64::INFINITY })?;
    let cond = lu.condition_1norm(&shifted);
    if cond > CONDITION_LIMIT {
        return Err(SimplexError::SingularSystem { cond });
    }
    let mut inv = Mat::zeros(n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let x = lu.solve(&e);
        e[col] = 0.0;
        for row in 0..n {
            inv.set(row, col, x[row]);
        }
    }
    let bd_raw = proj.p_l.matmul(&inv);
    // Symmetric in exact arithmetic; symmetrize to keep rounding out of the invariant.
    let bd = bd_raw.add(&bd_raw.transpose()).scale(0.5);
    let inverse_eigenvalues = bd.sym_eigenvalues()?;
    Ok(ConstrainedInverse {
        mu_bound: forward_eigenvalues[1],
        lambda_bound: inverse_eigenvalues[1],
        matrix: bd,
        composition: c.clone(),
        forward_eigenvalues,
        inverse_eigenvalues,
    })
}

/// Constrained inverse of a drag-table coupling matrix, carrying the
/// closed-form eigenvalue floors instead of observed spectral gaps.
pub fn bott_duffin_classic(fm: &FrictionMatrix) -> Result<ConstrainedInverse, SimplexError> {
    let mut inv = bott_duffin(&fm.matrix, &fm.composition)?;
    inv.mu_bound = fm.table.drag_eigenvalue_floor();
    inv.lambda_bound = fm.table.inverse_eigenvalue_floor();
    Ok(inv)
}

/// Solves the constrained problem `M x + y = b`, `x ∈ L`, `y ∈ L^⊥` by a
/// single direct solve of `(M P_L + P_⊥) z = b`, then `x = P_L z`,
/// `y = b − M x`.
///
/// This is an independent formulation used as a test oracle for
/// [`bott_duffin`]: it never forms the inverse matrix.
pub fn solve_constrained_oracle(
    m: &Mat,
    c: &Composition,
    b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SimplexError> {
    check_inverse_preconditions(m, c)?;
    let n = c.n();
    if b.len() != n {
        return Err(SimplexError::DimensionMismatch { expected: n, got: b.len() });
    }
    let proj = projectors(c);
    let shifted = m.matmul(&proj.p_l).add(&proj.p_lperp);
    let lu = shifted.lu().map_err(|_| SimplexError::SingularSystem { cond: f64::INFINITY })?;
    let cond = lu.condition_1norm(&shifted);
    if cond > CONDITION_LIMIT {
        return Err(SimplexError::SingularSystem { cond });
    }
    let z = lu.solve(b);
    let x = proj.p_l.matvec(&z);
    let mx = m.matvec(&x);
    let y = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
    Ok((x, y))
}

/// Which closed-form bounds a spectral certificate compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Drag-table coupling matrix: closed-form `μ` and `λ` from the table.
    Classic,
    /// Generalized coupling matrix: `μ` supplied (or observed), `λ` from the
    /// Frobenius-envelope bound `1/(‖M‖_F · n + 1)`.
    Generalized,
}

/// Spectral verification record for a coupling matrix and its constrained
/// inverse. A failed inequality is a reported result, not an error.
#[derive(Debug, Clone)]
pub struct SpectralCertificate {
    pub kind: CertificateKind,
    pub forward_eigenvalues: Vec<f64>,
    pub inverse_eigenvalues: Vec<f64>,
    pub min_nonzero_forward: f64,
    pub min_nonzero_inverse: f64,
    /// Lower bound the forward nonzero eigenvalues are checked against.
    pub mu: f64,
    /// Lower bound the inverse nonzero eigenvalues are checked against.
    pub lambda: f64,
    pub forward_pass: bool,
    pub inverse_pass: bool,
    /// Worst relative deviation of paired products `λ_fwd · λ_inv` from 1.
    pub max_reciprocal_error: f64,
}

impl SpectralCertificate {
    pub fn pass(&self) -> bool {
        self.forward_pass && self.inverse_pass
    }
}

fn reciprocal_error(forward: &[f64], inverse: &[f64]) -> f64 {
    // Nonzero eigenvalues (index 1..) pair reciprocally with the order
    // reversed: the largest forward eigenvalue pairs with the smallest
    // inverse one.
    let k = forward.len() - 1;
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let product = forward[1 + i] * inverse[forward.len() - 1 - i];
        worst = worst.max((product - 1.0).abs());
    }
    worst
}

fn certificate_from_inverse(
    inv: &ConstrainedInverse,
    kind: CertificateKind,
    mu: f64,
    lambda: f64,
) -> SpectralCertificate {
    let min_nonzero_forward = inv.min_nonzero_forward();
    let min_nonzero_inverse = inv.min_nonzero_inverse();
    SpectralCertificate {
        kind,
        forward_eigenvalues: inv.forward_eigenvalues.clone(),
        inverse_eigenvalues: inv.inverse_eigenvalues.clone(),
        min_nonzero_forward,
        min_nonzero_inverse,
        mu,
        lambda,
        forward_pass: min_nonzero_forward >= mu - CERTIFICATE_SLACK,
        inverse_pass: min_nonzero_inverse >= lambda - CERTIFICATE_SLACK,
        max_reciprocal_error: reciprocal_error(&inv.forward_eigenvalues, &inv.inverse_eigenvalues),
    }
}

/// Certifies the spectral floors of a drag-table coupling matrix: nonzero
/// eigenvalues of the forward matrix against `min 1/D_ij`, nonzero
/// eigenvalues of the constrained inverse against the pair-sum bound.
pub fn spectral_certificate(fm: &FrictionMatrix) -> Result<SpectralCertificate, SimplexError> {
    let inv = bott_duffin_classic(fm)?;
    Ok(certificate_from_inverse(
        &inv,
        CertificateKind::Classic,
        fm.table.drag_eigenvalue_floor(),
        fm.table.inverse_eigenvalue_floor(),
    ))
}

/// Certifies a generalized symmetric coupling matrix. `mu_floor` is the
/// asserted lower bound for the forward nonzero eigenvalues (observed gap if
/// absent); the inverse bound is the Frobenius-envelope value
/// `1/(‖M‖_F · n + 1)`.
pub fn spectral_certificate_generalized(
    m: &Mat,
    c: &Composition,
    mu_floor: Option<f64>,
) -> Result<SpectralCertificate, SimplexError> {
    let inv = bott_duffin(m, c)?;
    let mu = mu_floor.unwrap_or_else(|| inv.min_nonzero_forward());
    let lambda = 1.0 / (m.frobenius_norm() * m.n() as f64 + 1.0);
    Ok(certificate_from_inverse(&inv, CertificateKind::Generalized, mu, lambda))
}

/// Recovers scaled velocities from square-root-variable gradients:
/// returns the vector of `√c_i u_i = −2 (A^BD(c) g)_i`.
///
/// The gradient must lie in the flux subspace: a component along `√c`
/// beyond `1e-10` (scaled by the gradient norm) is rejected, not projected.
pub fn invert_fluxes(
    c: &Composition,
    grad_sqrt_c: &[f64],
    d: &DiffusionTable,
) -> Result<Vec<f64>, SimplexError> {
    let n = c.n();
    if grad_sqrt_c.len() != n {
        return Err(SimplexError::DimensionMismatch { expected: n, got: grad_sqrt_c.len() });
    }
    let s = c.sqrt_values();
    let defect = dot(&s, grad_sqrt_c).abs();
    if defect > KERNEL_RESIDUAL_TOL * (1.0 + norm_2(grad_sqrt_c)) {
        return Err(SimplexError::NotInFluxSubspace { defect });
    }
    let fm = build_friction_matrix(c, d)?;
    let inv = bott_duffin_classic(&fm)?;
    Ok(inv.matrix.matvec(grad_sqrt_c).iter().map(|v| -2.0 * v).collect())
}
