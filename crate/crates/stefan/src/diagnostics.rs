//! Entropy, dissipation, and stability functionals evaluated on solver fields.
//!
//! Everything here is midpoint quadrature on the finite-volume grid:
//! cell quantities are summed with weight `dx`, gradients are face
//! differences divided by `dx`, and face quantities use the arithmetic
//! average of the neighboring cells. The functionals are the numerical
//! counterparts of the continuous entropy identities:
//!
//! - `entropy` / `relative_entropy` — the convex Lyapunov functional and
//!   its Bregman distance between two fields;
//! - `dissipation` — the nonnegative quadratic form whose time integral
//!   bounds entropy decay;
//! - `entropy_production_rs` — the thermodynamic entropy-production
//!   density per face, which for the classic model coincides with the
//!   dissipation density identically;
//! - `velocity_bound_check` — the drag-floor bound `Σ c_i|u_i|² ≤
//!   (4/μ²)·Σ|∇√c_i|²`;
//! - `dissipation_lower_bound_check` — the certified coercivity bound
//!   `ZᵀB^BD Z ≥ 2β(m)·Σ|∇c_i|²` away from vacuum;
//! - `build_cutoff` / `split_dissipation` — the smooth vacuum cutoff and
//!   the two-region splitting of the dissipation it induces;
//! - `gronwall_report` — perturbation-decay statistics (initial
//!   relative entropy vs perturbation size, and its sup over time)
//!   quantifying weak-strong stability of the scheme.

use crate::mat::{norm_2, Mat, MatError};
use crate::simplex::{
    bott_duffin, bott_duffin_classic, build_friction_matrix, invert_fluxes, projectors,
    Composition, DiffusionTable, SimplexError,
};
use crate::solver::{Field, Trajectory};
use crate::thermo::{
    frobenius_envelope, min_curvature, molar_mass_friction, ModelKind, ModelParams, ModelSpec,
    ThermoError,
};
use thiserror::Error;

/// Reference fields for relative functionals must stay above this floor.
pub const REFERENCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("mismatched inputs: {0}")]
    GridMismatch(&'static str),
    #[error("reference not interior: cell {cell} has {value:e}, floor {floor:e}")]
    ReferenceNotInterior { cell: usize, value: f64, floor: f64 },
    #[error("perturbation ε = {epsilon:e} produced nonpositive initial relative entropy {h0:e}")]
    NonPositiveH0 { epsilon: f64, h0: f64 },
    #[error("need at least 3 positive perturbation sizes, got {got}")]
    TooFewEpsilons { got: usize },
    #[error("perturbation sizes must halve: entry {index} breaks the chain")]
    EpsilonsNotHalving { index: usize },
    #[error("gradient components must sum to zero (got {sum:e})")]
    InconsistentGradient { sum: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("model `{0}` has no flux mobility")]
    UnsupportedModel(&'static str),
    #[error("model `{0}` requires a drag-coefficient table")]
    MissingTable(&'static str),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Linalg(#[from] MatError),
}

/// One row of trajectory diagnostics, ready for CSV serialization.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub rel_entropy: Option<f64>,
    pub rs_min: f64,
    pub mass: Vec<f64>,
    pub min_c: f64,
    pub sum_dev: f64,
}

/// Report of a perturbation-scaling study.
#[derive(Debug, Clone)]
pub struct RelEntropyReport {
    /// Perturbation sizes in the order analyzed (descending).
    pub epsilons: Vec<f64>,
    /// Initial relative entropy per perturbation size.
    pub h0: Vec<f64>,
    /// `sup_t H(t)/H(0)` per perturbation size (0 for a coincident pair).
    pub sup_ratio: Vec<f64>,
    /// Log-log slope of `H(0)` against ε over the positive sizes.
    pub fitted_order: f64,
}

fn check_same_shape(a: &Field, b: &Field) -> Result<(), DiagnosticsError> {
    if a.grid() != b.grid() {
        return Err(DiagnosticsError::GridMismatch("grids differ"));
    }
    if a.n() != b.n() {
        return Err(DiagnosticsError::GridMismatch("species counts differ"));
    }
    Ok(())
}

fn check_species(field: &Field, model: &ModelSpec) -> Result<(), DiagnosticsError> {
    if field.n() != model.n {
        return Err(DiagnosticsError::GridMismatch("field species count differs from model"));
    }
    Ok(())
}

fn check_reference_interior(reference: &Field) -> Result<(), DiagnosticsError> {
    for k in 0..reference.grid().cells() {
        for &v in reference.cell(k) {
            if v < REFERENCE_FLOOR {
                return Err(DiagnosticsError::ReferenceNotInterior {
                    cell: k,
                    value: v,
                    floor: REFERENCE_FLOOR,
                });
            }
        }
    }
    Ok(())
}

/// The flux mobility of a model at one composition: the matrix the flux
/// law applies to entropy-variable differences. For the classic model this
/// is the constrained inverse of the friction matrix; for the deposition
/// and porous-medium models it is the friction matrix itself (their
/// coupling matrix is already an inverse); for the molar-mass model it is
/// the constrained inverse of the mass-weighted friction matrix.
fn flux_mobility(
    cf: &Composition,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
) -> Result<Mat, DiagnosticsError> {
    match model.kind {
        ModelKind::ClassicMs => {
            let d = table.ok_or(DiagnosticsError::MissingTable("classic-ms"))?;
            Ok(bott_duffin_classic(&build_friction_matrix(cf, d)?)?.matrix)
        }
        ModelKind::Pvd | ModelKind::PorousMedium => {
            let d = table.ok_or(DiagnosticsError::MissingTable(model.kind.id()))?;
            Ok(build_friction_matrix(cf, d)?.matrix)
        }
        ModelKind::MolarMass => {
            let masses = match &model.params {
                ModelParams::MolarMass { masses } => masses,
                _ => return Err(DiagnosticsError::UnsupportedModel("molar-mass")),
            };
            Ok(bott_duffin(&molar_mass_friction(cf, masses)?, cf)?.matrix)
        }
        ModelKind::Tumor => Err(DiagnosticsError::UnsupportedModel("tumor")),
    }
}

/// Total entropy `Σ_i Σ_cells h_i(c_i)·dx`, with each `h_i` extended
/// continuously to vacuum.
pub fn entropy(field: &Field, model: &ModelSpec) -> Result<f64, DiagnosticsError> {
    check_species(field, model)?;
    let dx = field.grid().dx();
    let mut total = 0.0;
    for k in 0..field.grid().cells() {
        let cell = field.cell(k);
        for i in 0..field.n() {
            total += model.entropies[i].h(cell[i])? * dx;
        }
    }
    Ok(total)
}

/// Relative entropy `Σ_i Σ_cells h_i(c_i | c̄_i)·dx ≥ 0` between a field
/// and a strictly interior reference on the same grid.
pub fn relative_entropy(
    field: &Field,
    reference: &Field,
    model: &ModelSpec,
) -> Result<f64, DiagnosticsError> {
    check_same_shape(field, reference)?;
    check_species(field, model)?;
    check_reference_interior(reference)?;
    let dx = field.grid().dx();
    let mut total = 0.0;
    for k in 0..field.grid().cells() {
        let cell = field.cell(k);
        let refc = reference.cell(k);
        for i in 0..field.n() {
            total += model.entropies[i].relative_density(cell[i], refc[i])? * dx;
        }
    }
    Ok(total)
}

/// Per-face dissipation density (per unit length). For the classic model
/// this is `4·Δ√cᵀ A^BD Δ√c / dx²`; for generalized models it is
/// `sᵀ B^BD s / dx²` with `s_j = √c_j·Δh′_j` at the face.
fn face_dissipation_density(
    field: &Field,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
    k: usize,
) -> Result<f64, DiagnosticsError> {
    let n = field.n();
    let dx = field.grid().dx();
    let left = field.composition(k);
    let right = field.composition(k + 1);
    let cf = left.average(&right);
    let mobility = flux_mobility(&cf, model, table)?;
    match model.kind {
        ModelKind::ClassicMs => {
            let delta: Vec<f64> = (0..n)
                .map(|i| right.get(i).sqrt() - left.get(i).sqrt())
                .collect();
            Ok(4.0 * mobility.quadratic_form(&delta, &delta) / (dx * dx))
        }
        _ => {
            let sf = cf.sqrt_values();
            let mut s = vec![0.0; n];
            for j in 0..n {
                let h = &model.entropies[j];
                s[j] = sf[j] * (h.h_prime(right.get(j))? - h.h_prime(left.get(j))?);
            }
            Ok(mobility.quadratic_form(&s, &s) / (dx * dx))
        }
    }
}

/// Total entropy dissipation: the face densities integrated over the
/// domain. Nonnegative up to rounding because every face form is PSD.
pub fn dissipation(
    field: &Field,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
) -> Result<f64, DiagnosticsError> {
    check_species(field, model)?;
    let dx = field.grid().dx();
    let mut total = 0.0;
    for k in 0..field.grid().cells() - 1 {
        total += face_dissipation_density(field, model, table, k)? * dx;
    }
    Ok(total)
}

/// Entropy-production density at each interior face:
/// `r_S = −Σ_i (J_i/√c_i)·[P_L (√c ∘ Δμ)]_i / dx`, with `J` the numerical
/// mass flux. For the classic model `√c_j·Δμ_j` is discretized through the
/// square-root variables as `2·Δ√c_j` (the continuum identity
/// `√c ∇h′ = 2∇√c` for ideal mixtures), which keeps the quotient
/// `J_i/√c_i` finite even at vacuum faces; generalized models use
/// `√c_j·Δh′_j` directly. Returns one value per interior face.
pub fn entropy_production_rs(
    field: &Field,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
) -> Result<Vec<f64>, DiagnosticsError> {
    check_species(field, model)?;
    let n = field.n();
    let dx = field.grid().dx();
    let mut values = Vec::with_capacity(field.grid().cells() - 1);
    for k in 0..field.grid().cells() - 1 {
        let left = field.composition(k);
        let right = field.composition(k + 1);
        let cf = left.average(&right);
        let rs = match model.kind {
            ModelKind::ClassicMs => {
                let d = table.ok_or(DiagnosticsError::MissingTable("classic-ms"))?;
                let delta: Vec<f64> = (0..n)
                    .map(|i| right.get(i).sqrt() - left.get(i).sqrt())
                    .collect();
                let p = projectors(&cf);
                let g: Vec<f64> = p.p_l.matvec(&delta).iter().map(|v| v / dx).collect();
                // x_i = √c_i u_i; J_i = √c_i x_i, so J_i/√c_i = x_i exactly.
                let x = invert_fluxes(&cf, &g, d)?;
                -(0..n).map(|i| x[i] * 2.0 * g[i]).sum::<f64>()
            }
            ModelKind::Pvd | ModelKind::PorousMedium | ModelKind::MolarMass => {
                let sf = cf.sqrt_values();
                let mut s = vec![0.0; n];
                for j in 0..n {
                    let h = &model.entropies[j];
                    s[j] = sf[j] * (h.h_prime(right.get(j))? - h.h_prime(left.get(j))?);
                }
                let mobility = flux_mobility(&cf, model, table)?;
                let flux_dir = mobility.matvec(&s);
                let p = projectors(&cf);
                let inner = p.p_l.matvec(&s);
                (0..n).map(|i| flux_dir[i] * inner[i]).sum::<f64>() / (dx * dx)
            }
            ModelKind::Tumor => return Err(DiagnosticsError::UnsupportedModel("tumor")),
        };
        values.push(rs);
    }
    Ok(values)
}

/// Worst face margin of the velocity bound
/// `Σ_i c_i|u_i|² ≤ (4/μ²)·Σ_i |∇√c_i|²` with `μ = min_{i≠j} 1/D_ij`.
/// Nonpositive margins (up to rounding) certify the bound.
pub fn velocity_bound_check(field: &Field, d: &DiffusionTable) -> Result<f64, DiagnosticsError> {
    let n = field.n();
    let dx = field.grid().dx();
    let mu = d.drag_eigenvalue_floor();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..field.grid().cells() - 1 {
        let left = field.composition(k);
        let right = field.composition(k + 1);
        let cf = left.average(&right);
        let delta: Vec<f64> = (0..n)
            .map(|i| right.get(i).sqrt() - left.get(i).sqrt())
            .collect();
        let p = projectors(&cf);
        let g: Vec<f64> = p.p_l.matvec(&delta).iter().map(|v| v / dx).collect();
        let x = invert_fluxes(&cf, &g, d)?;
        let lhs: f64 = x.iter().map(|v| v * v).sum();
        let rhs: f64 = delta.iter().map(|v| (v / dx) * (v / dx)).sum::<f64>() * 4.0 / (mu * mu);
        worst = worst.max(lhs - rhs);
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

/// Certified constants for the away-from-vacuum dissipation lower bound,
/// computed once per model and vacuum margin `m`:
/// `η` = min curvature over `[m/2, 1]`, `ζ(m) = m²η²/32`,
/// `λ(m/2) = 1/(γ̂(m/2)·n + 1)` from the observed Frobenius envelope, and
/// `β(m) = ζ(m)·λ(m/2)/2`.
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    pub m: f64,
    pub eta: f64,
    pub zeta: f64,
    pub gamma_hat: f64,
    pub lambda: f64,
    pub beta: f64,
}

pub fn dissipation_bound_constants(
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundConstants, DiagnosticsError> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(DiagnosticsError::PreconditionViolated("vacuum margin m must lie in (0, 1]"));
    }
    let eta = min_curvature(&model.entropies, m / 2.0, 1.0)?;
    let zeta = m * m * eta * eta / 32.0;
    let gamma_hat = frobenius_envelope(model, table, m / 2.0, samples, seed)?;
    let lambda = 1.0 / (gamma_hat * model.n as f64 + 1.0);
    let beta = zeta * lambda / 2.0;
    Ok(BoundConstants { m, eta, zeta, gamma_hat, lambda, beta })
}

/// Result of one dissipation-lower-bound evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DissipationBound {
    /// `Σ_ij B^BD_ij Z_i Z_j` with `Z_i = √c_i·h″(c_i)·∇c_i`.
    pub lhs: f64,
    /// `2β(m)·Σ_i |∇c_i|²`.
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `lhs ≥ rhs − 1e-10` pointwise for a composition bounded below
/// by `m/2` and a zero-sum gradient vector.
pub fn dissipation_lower_bound_check(
    c: &Composition,
    gradients: &[f64],
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
    constants: &BoundConstants,
) -> Result<DissipationBound, DiagnosticsError> {
    if c.n() != model.n || gradients.len() != model.n {
        return Err(DiagnosticsError::GridMismatch("composition/gradient sizes differ from model"));
    }
    if c.min_value() < constants.m / 2.0 - 1e-12 {
        return Err(DiagnosticsError::PreconditionViolated("composition entry below m/2"));
    }
    let sum: f64 = gradients.iter().sum();
    if sum.abs() > 1e-10 * (1.0 + norm_2(gradients)) {
        return Err(DiagnosticsError::InconsistentGradient { sum });
    }
    let mut z = vec![0.0; model.n];
    for i in 0..model.n {
        let ci = c.get(i);
        z[i] = ci.sqrt() * model.entropies[i].h_second(ci)? * gradients[i];
    }
    let mobility = flux_mobility(c, model, table)?;
    let lhs = mobility.quadratic_form(&z, &z);
    let rhs = 2.0 * constants.beta * gradients.iter().map(|g| g * g).sum::<f64>();
    Ok(DissipationBound { lhs, rhs, pass: lhs >= rhs - 1e-10 })
}

/// Smooth vacuum cutoff: `ψ` rises from 0 to 1 across `[m/2, m/2+eps]`
/// as the quintic smoothstep `6r⁵ − 15r⁴ + 10r³` (twice continuously
/// differentiable), and `χ(c) = Π_i ψ(c_i)` vanishes whenever any
/// component is at or below `m/2`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffFn {
    m: f64,
    eps: f64,
}

impl CutoffFn {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Scalar cutoff factor at one concentration value.
    pub fn psi(&self, v: f64) -> f64 {
        let lo = self.m / 2.0;
        let hi = lo + self.eps;
        if v <= lo {
            0.0
        } else if v >= hi {
            1.0
        } else {
            let r = (v - lo) / (hi - lo);
            ((6.0 * r - 15.0) * r + 10.0) * r * r * r
        }
    }

    /// Product cutoff over all components of a cell.
    pub fn chi(&self, cell: &[f64]) -> f64 {
        cell.iter().map(|&v| self.psi(v)).product()
    }
}

/// Builds the cutoff for vacuum margin `m` and transition width `eps`
/// (defaulting to `m/4`); the transition must end strictly below 1.
pub fn build_cutoff(m: f64, eps: Option<f64>) -> Result<CutoffFn, DiagnosticsError> {
    let eps = eps.unwrap_or(m / 4.0);
    if !(m > 0.0) || !(eps > 0.0) {
        return Err(DiagnosticsError::PreconditionViolated("cutoff needs m > 0 and eps > 0"));
    }
    if m / 2.0 + eps >= 1.0 {
        return Err(DiagnosticsError::PreconditionViolated("cutoff transition must end below 1"));
    }
    Ok(CutoffFn { m, eps })
}

/// Splits the dissipation into the two regions the cutoff separates:
/// returns `(∫(1−χ(c))·ZᵀB^BD(c)Z, ∫χ(c)·Σ|∇(c_i−c̄_i)|²)` with
/// `Z_i = √c_i·h″(c_i)·∇c_i`, everything evaluated at faces.
pub fn split_dissipation(
    field: &Field,
    reference: &Field,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
    cutoff: &CutoffFn,
) -> Result<(f64, f64), DiagnosticsError> {
    check_same_shape(field, reference)?;
    check_species(field, model)?;
    check_reference_interior(reference)?;
    let n = field.n();
    let dx = field.grid().dx();
    let mut low = 0.0;
    let mut high = 0.0;
    for k in 0..field.grid().cells() - 1 {
        let left = field.composition(k);
        let right = field.composition(k + 1);
        let cf = left.average(&right);
        let chi = cutoff.chi(cf.values());
        if chi < 1.0 {
            let mut z = vec![0.0; n];
            for i in 0..n {
                let ci = cf.get(i);
                let grad = (right.get(i) - left.get(i)) / dx;
                z[i] = ci.sqrt() * model.entropies[i].h_second(ci)? * grad;
            }
            let mobility = flux_mobility(&cf, model, table)?;
            low += (1.0 - chi) * mobility.quadratic_form(&z, &z) * dx;
        }
        if chi > 0.0 {
            let mut grad_sq = 0.0;
            for i in 0..n {
                let dc = right.get(i) - left.get(i);
                let dr = reference.cell(k + 1)[i] - reference.cell(k)[i];
                let g = (dc - dr) / dx;
                grad_sq += g * g;
            }
            high += chi * grad_sq * dx;
        }
    }
    Ok((low, high))
}

/// Validates a perturbation-size family: at least 3 positive sizes, each
/// half the previous when ordered descending (relative tolerance `1e-9`);
/// zero entries are allowed and skipped. Returns the indices sorted by
/// descending size.
pub fn validate_epsilons(epsilons: &[f64]) -> Result<Vec<usize>, DiagnosticsError> {
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[b].partial_cmp(&epsilons[a]).unwrap());
    let positives: Vec<usize> = order.iter().copied().filter(|&i| epsilons[i] > 0.0).collect();
    if positives.len() < 3 {
        return Err(DiagnosticsError::TooFewEpsilons { got: positives.len() });
    }
    for w in positives.windows(2) {
        let (prev, next) = (epsilons[w[0]], epsilons[w[1]]);
        if (next - prev / 2.0).abs() > 1e-9 * prev {
            return Err(DiagnosticsError::EpsilonsNotHalving { index: w[1] });
        }
    }
    Ok(order)
}

/// Analyzes a family of perturbed trajectories against a common reference:
/// per perturbation size, the initial relative entropy `H(0)` and
/// `sup_t H(t)/H(0)`; across sizes, the log-log slope of `H(0)` vs ε.
///
/// Requires at least 3 positive sizes, each half the previous (descending
/// order). A coincident pair (ε = 0) must stay identically zero and is
/// excluded from the fit.
pub fn gronwall_report(
    runs: &[(f64, Trajectory)],
    reference: &Trajectory,
    model: &ModelSpec,
) -> Result<RelEntropyReport, DiagnosticsError> {
    let sizes: Vec<f64> = runs.iter().map(|(e, _)| *e).collect();
    let order = validate_epsilons(&sizes)?;

    let mut epsilons = Vec::new();
    let mut h0s = Vec::new();
    let mut sup_ratios = Vec::new();
    for &idx in &order {
        let (eps, traj) = &runs[idx];
        if traj.snapshots.len() != reference.snapshots.len() {
            return Err(DiagnosticsError::GridMismatch("snapshot counts differ"));
        }
        let mut h_values = Vec::with_capacity(traj.snapshots.len());
        for (p, r) in traj.snapshots.iter().zip(reference.snapshots.iter()) {
            if p.time() != r.time() {
                return Err(DiagnosticsError::GridMismatch("snapshot times differ"));
            }
            h_values.push(relative_entropy(p, r, model)?);
        }
        let h0 = h_values[0];
        if *eps > 0.0 && h0 <= 0.0 {
            return Err(DiagnosticsError::NonPositiveH0 { epsilon: *eps, h0 });
        }
        let sup = h_values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sup_ratio = if h0 > 0.0 {
            sup / h0
        } else if sup == 0.0 && h_values.iter().all(|&v| v == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
        epsilons.push(*eps);
        h0s.push(h0);
        sup_ratios.push(sup_ratio);
    }

    // Least-squares slope of log H(0) against log ε over the positive sizes.
    let pts: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(h0s.iter())
        .filter(|(&e, &h)| e > 0.0 && h > 0.0)
        .map(|(&e, &h)| (e.ln(), h.ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let fitted_order = sxy / sxx;

    Ok(RelEntropyReport { epsilons, h0: h0s, sup_ratio: sup_ratios, fitted_order })
}

/// Computes the full diagnostics row for one snapshot.
pub fn record(
    field: &Field,
    reference: Option<&Field>,
    model: &ModelSpec,
    table: Option<&DiffusionTable>,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let h = entropy(field, model)?;
    let d = dissipation(field, model, table)?;
    let rel = match reference {
        Some(r) => Some(relative_entropy(field, r, model)?),
        None => None,
    };
    let rs = entropy_production_rs(field, model, table)?;
    let rs_min = rs.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    Ok(DiagnosticsRecord {
        t: field.time(),
        entropy: h,
        dissipation: d,
        rel_entropy: rel,
        rs_min,
        mass: field.species_masses(),
        min_c: field.min_value(),
        sum_dev: field.max_sum_deviation(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::solver::{init_field, perturb_initial, run, Field, Grid1D, SolverConfig, Stepper};
    use std::f64::consts::PI;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn classic_config(n: usize, d: f64, t_end: f64) -> SolverConfig {
        SolverConfig::new(
            ModelSpec::classic(n).unwrap(),
            Some(DiffusionTable::uniform(n, d).unwrap()),
            1e-4,
            t_end,
        )
    }

    fn binary_cosine(grid: Grid1D, amp: f64) -> Field {
        init_field(grid, 2, |x| {
            let c1 = 0.5 + amp * (PI * x).cos();
            vec![c1, 1.0 - c1]
        })
        .unwrap()
    }

    fn uniform_field(grid: Grid1D, values: &[f64]) -> Field {
        init_field(grid, values.len(), |_| values.to_vec()).unwrap()
    }

    fn random_interior_field(grid: Grid1D, n: usize, rng: &mut Rng, floor: f64) -> Field {
        let cells: Vec<Vec<f64>> =
            (0..grid.cells()).map(|_| rng.interior_composition(n, floor)).collect();
        let mut idx = 0;
        init_field(grid, n, |_| {
            let c = cells[idx % cells.len()].clone();
            idx += 1;
            c
        })
        .unwrap()
    }

    #[test]
    fn entropy_uniform_closed_forms() {
        let grid = Grid1D::new(10, 1.0).unwrap();
        let half = uniform_field(grid, &[0.5, 0.5]);
        let model = ModelSpec::classic(2).unwrap();
        assert_close(entropy(&half, &model).unwrap(), -(2.0f64.ln()) - 1.0, 1e-12);

        let third = uniform_field(grid, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let model3 = ModelSpec::classic(3).unwrap();
        assert_close(entropy(&third, &model3).unwrap(), -(3.0f64.ln()) - 1.0, 1e-12);

        let porous = ModelSpec::porous(2, 2.0).unwrap();
        assert_close(entropy(&half, &porous).unwrap(), 0.5, 1e-12);
    }

    #[test]
    fn relative_entropy_basics() {
        let grid = Grid1D::new(4, 1.0).unwrap();
        let model = ModelSpec::classic(2).unwrap();
        let f = uniform_field(grid, &[0.6, 0.4]);
        let r = uniform_field(grid, &[0.5, 0.5]);
        assert_eq!(relative_entropy(&f, &f, &model).unwrap(), 0.0);
        // Both species' relative densities integrated over the unit domain.
        assert_close(relative_entropy(&f, &r, &model).unwrap(), 0.0201357, 1e-6);

        let other_grid = Grid1D::new(5, 1.0).unwrap();
        let g = uniform_field(other_grid, &[0.5, 0.5]);
        assert!(matches!(
            relative_entropy(&f, &g, &model),
            Err(DiagnosticsError::GridMismatch(_))
        ));

        let vacuum_ref = uniform_field(grid, &[1.0, 0.0]);
        assert!(matches!(
            relative_entropy(&f, &vacuum_ref, &model),
            Err(DiagnosticsError::ReferenceNotInterior { .. })
        ));
    }

    #[test]
    fn relative_entropy_nonnegative_and_quadratically_bounded() {
        let grid = Grid1D::new(8, 1.0).unwrap();
        let model = ModelSpec::classic(3).unwrap();
        let mut rng = Rng::new(11);
        for _ in 0..200 {
            let f = random_interior_field(grid, 3, &mut rng, 0.0);
            let r = random_interior_field(grid, 3, &mut rng, 1e-3);
            let h = relative_entropy(&f, &r, &model).unwrap();
            assert!(h >= -1e-14);
            // Quadratic lower bound for ideal-mixture entropies.
            let mut quad = 0.0;
            for k in 0..grid.cells() {
                for i in 0..3 {
                    let d = f.cell(k)[i] - r.cell(k)[i];
                    quad += 0.5 * d * d * grid.dx();
                }
            }
            assert!(h >= quad - 1e-12, "h = {h:e} < quad = {quad:e}");
        }
    }

    #[test]
    fn dissipation_uniform_zero_and_nonnegative() {
        let grid = Grid1D::new(8, 1.0).unwrap();
        let model = ModelSpec::classic(3).unwrap();
        let table = DiffusionTable::uniform(3, 1.0).unwrap();
        let u = uniform_field(grid, &[0.2, 0.3, 0.5]);
        assert!(dissipation(&u, &model, Some(&table)).unwrap().abs() <= 1e-14);

        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let f = random_interior_field(grid, 3, &mut rng, 0.0);
            let d = dissipation(&f, &model, Some(&table)).unwrap();
            assert!(d >= -1e-10, "dissipation {d:e}");
        }
    }

    #[test]
    fn dissipation_matches_binary_closed_form() {
        // With one drag coefficient d, the binary dissipation density is
        // d·|∂ₓc₁|²·(1/c₁ + 1/c₂); compare on a well-resolved cosine.
        let grid = Grid1D::new(400, 1.0).unwrap();
        let model = ModelSpec::classic(2).unwrap();
        let dcoef = 1.7;
        // With D₁₂ = d the friction matrix is P_L/d, so its constrained
        // inverse is d·P_L and d multiplies the density directly.
        let table = DiffusionTable::uniform(2, dcoef).unwrap();
        let f = binary_cosine(grid, 0.1);
        let total = dissipation(&f, &model, Some(&table)).unwrap();
        let mut expected = 0.0;
        for k in 0..grid.cells() - 1 {
            let cf = f.composition(k).average(&f.composition(k + 1));
            let grad = (f.cell(k + 1)[0] - f.cell(k)[0]) / grid.dx();
            expected += dcoef * grad * grad * (1.0 / cf.get(0) + 1.0 / cf.get(1)) * grid.dx();
        }
        assert!(
            (total - expected).abs() <= 1e-3 * expected.abs(),
            "{total} vs {expected}"
        );
    }

    #[test]
    fn rs_uniform_zero_and_matches_classic_density() {
        let grid = Grid1D::new(12, 1.0).unwrap();
        let model = ModelSpec::classic(3).unwrap();
        let table = DiffusionTable::from_upper_triangle(3, &[0.8, 1.3, 2.1]).unwrap();
        let u = uniform_field(grid, &[0.25, 0.35, 0.4]);
        for v in entropy_production_rs(&u, &model, Some(&table)).unwrap() {
            assert!(v.abs() <= 1e-13);
        }

        let f = init_field(grid, 3, |x| {
            let a = 0.3 + 0.1 * (PI * x).cos();
            let b = 0.3 + 0.05 * (2.0 * PI * x).sin();
            vec![a, b, 1.0 - a - b]
        })
        .unwrap();
        let rs = entropy_production_rs(&f, &model, Some(&table)).unwrap();
        assert_eq!(rs.len(), grid.cells() - 1);
        for (k, &v) in rs.iter().enumerate() {
            let density = face_dissipation_density(&f, &model, Some(&table), k).unwrap();
            assert!(
                (v - density).abs() <= 1e-12 * (1.0 + density.abs()),
                "face {k}: rs {v:e} vs density {density:e}"
            );
            assert!(v >= -1e-10);
        }
    }

    #[test]
    fn rs_generalized_nonnegative_and_matches_density() {
        let grid = Grid1D::new(10, 1.0).unwrap();
        let model = ModelSpec::porous(2, 2.0).unwrap();
        let table = DiffusionTable::uniform(2, 1.0).unwrap();
        let f = binary_cosine(grid, 0.2);
        let rs = entropy_production_rs(&f, &model, Some(&table)).unwrap();
        for (k, &v) in rs.iter().enumerate() {
            let density = face_dissipation_density(&f, &model, Some(&table), k).unwrap();
            assert!((v - density).abs() <= 1e-12 * (1.0 + density.abs()));
            assert!(v >= -1e-12);
        }
    }

    #[test]
    fn velocity_bound_holds() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let table = DiffusionTable::from_upper_triangle(3, &[0.6, 1.1, 1.9]).unwrap();
        let u = uniform_field(grid, &[0.2, 0.3, 0.5]);
        assert!(velocity_bound_check(&u, &table).unwrap() <= 1e-10);

        let mut rng = Rng::new(33);
        for _ in 0..30 {
            let f = random_interior_field(grid, 3, &mut rng, 0.0);
            let margin = velocity_bound_check(&f, &table).unwrap();
            assert!(margin <= 1e-10, "margin {margin:e}");
        }

        let binary_table = DiffusionTable::uniform(2, 1.0).unwrap();
        let f = binary_cosine(grid, 0.3);
        assert!(velocity_bound_check(&f, &binary_table).unwrap() <= 1e-10);
    }

    #[test]
    fn bound_constants_classic_unit_drag() {
        let model = ModelSpec::classic(2).unwrap();
        let table = DiffusionTable::uniform(2, 1.0).unwrap();
        let k = dissipation_bound_constants(&model, Some(&table), 1.0, 400, 7).unwrap();
        // Boltzmann curvature 1/c on [1/2, 1] attains its minimum 1 at c = 1.
        assert_close(k.eta, 1.0, 1e-9);
        assert_close(k.zeta, 1.0 / 32.0, 1e-9);
        assert!(k.gamma_hat > 0.0 && k.lambda > 0.0 && k.beta > 0.0);
        assert!(matches!(
            dissipation_bound_constants(&model, Some(&table), 0.0, 10, 7),
            Err(DiagnosticsError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn dissipation_lower_bound_samples_pass() {
        let mut rng = Rng::new(99);
        for &n in &[2usize, 3] {
            let model = ModelSpec::classic(n).unwrap();
            let table = DiffusionTable::uniform(n, 1.0).unwrap();
            let m = 0.2;
            let k = dissipation_bound_constants(&model, Some(&table), m, 500, 13).unwrap();
            for _ in 0..500 {
                let c = Composition::new(&rng.interior_composition(n, m / 2.0)).unwrap();
                let mut grads: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let mean = grads.iter().sum::<f64>() / n as f64;
                for g in grads.iter_mut() {
                    *g -= mean;
                }
                let out =
                    dissipation_lower_bound_check(&c, &grads, &model, Some(&table), &k).unwrap();
                assert!(
                    out.pass,
                    "lhs {:e} < rhs {:e} at c = {:?}",
                    out.lhs,
                    out.rhs,
                    c.values()
                );
            }
        }
    }

    #[test]
    fn dissipation_lower_bound_preconditions() {
        let model = ModelSpec::classic(2).unwrap();
        let table = DiffusionTable::uniform(2, 1.0).unwrap();
        let k = dissipation_bound_constants(&model, Some(&table), 0.2, 50, 3).unwrap();
        let c = Composition::new(&[0.5, 0.5]).unwrap();
        let zero = dissipation_lower_bound_check(&c, &[0.0, 0.0], &model, Some(&table), &k).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert_eq!(zero.rhs, 0.0);
        assert!(zero.pass);

        let shallow = Composition::new(&[0.01, 0.99]).unwrap();
        assert!(matches!(
            dissipation_lower_bound_check(&shallow, &[0.1, -0.1], &model, Some(&table), &k),
            Err(DiagnosticsError::PreconditionViolated(_))
        ));
        assert!(matches!(
            dissipation_lower_bound_check(&c, &[0.1, 0.1], &model, Some(&table), &k),
            Err(DiagnosticsError::InconsistentGradient { .. })
        ));
    }

    #[test]
    fn cutoff_shape() {
        let m = 0.2;
        let cut = build_cutoff(m, None).unwrap();
        assert_eq!(cut.eps(), m / 4.0);
        assert_eq!(cut.psi(m / 2.0), 0.0);
        assert_eq!(cut.psi(m / 2.0 + cut.eps()), 1.0);
        assert_close(cut.psi(m / 2.0 + cut.eps() / 2.0), 0.5, 1e-12);
        // C¹ at the endpoints: one-sided slopes vanish.
        let h = 1e-6;
        assert!((cut.psi(m / 2.0 + h) - cut.psi(m / 2.0)) / h <= 1e-4);
        assert!(
            (cut.psi(m / 2.0 + cut.eps()) - cut.psi(m / 2.0 + cut.eps() - h)) / h <= 1e-4
        );
        assert_eq!(cut.chi(&[m / 4.0, 0.9]), 0.0);
        assert!(cut.chi(&[0.5, 0.5]) == 1.0);
        assert!(build_cutoff(1.9, Some(0.2)).is_err());
        assert!(build_cutoff(0.2, Some(0.0)).is_err());
    }

    #[test]
    fn split_dissipation_regions() {
        let grid = Grid1D::new(32, 1.0).unwrap();
        let model = ModelSpec::classic(2).unwrap();
        let table = DiffusionTable::uniform(2, 1.0).unwrap();
        let cut = build_cutoff(0.2, None).unwrap();

        let u = uniform_field(grid, &[0.5, 0.5]);
        let (low, high) = split_dissipation(&u, &u, &model, Some(&table), &cut).unwrap();
        assert_eq!(low, 0.0);
        assert_eq!(high, 0.0);

        // Everywhere above m/2 + eps the low-region term vanishes exactly.
        let f = binary_cosine(grid, 0.1);
        let r = uniform_field(grid, &[0.5, 0.5]);
        let (low, high) = split_dissipation(&f, &r, &model, Some(&table), &cut).unwrap();
        assert_eq!(low, 0.0);
        assert!(high > 0.0);

        // High-region gradient term controlled by the dissipation.
        let k = dissipation_bound_constants(&model, Some(&table), 0.2, 400, 21).unwrap();
        let d = dissipation(&f, &model, Some(&table)).unwrap();
        assert!(
            high <= d / (2.0 * k.beta) + 1e-8,
            "high {high:e} vs bound {:e}",
            d / (2.0 * k.beta)
        );

        let other_grid = Grid1D::new(8, 1.0).unwrap();
        let g = uniform_field(other_grid, &[0.5, 0.5]);
        assert!(matches!(
            split_dissipation(&f, &g, &model, Some(&table), &cut),
            Err(DiagnosticsError::GridMismatch(_))
        ));
    }

    #[test]
    fn split_dissipation_engages_low_region() {
        // Push the field below m/2 so the (1−χ) region carries weight.
        let grid = Grid1D::new(16, 1.0).unwrap();
        let model = ModelSpec::classic(2).unwrap();
        let table = DiffusionTable::uniform(2, 1.0).unwrap();
        let cut = build_cutoff(0.4, None).unwrap();
        let f = init_field(grid, 2, |x| {
            let c1 = 0.12 + 0.05 * (PI * x).cos();
            vec![c1, 1.0 - c1]
        })
        .unwrap();
        let r = uniform_field(grid, &[0.5, 0.5]);
        let (low, high) = split_dissipation(&f, &r, &model, Some(&table), &cut).unwrap();
        assert!(low > 0.0);
        assert!(high >= 0.0);
    }

    #[test]
    fn gronwall_requires_halving_chain() {
        let grid = Grid1D::new(8, 1.0).unwrap();
        let cfg = classic_config(2, 1.0, 0.001);
        let f = binary_cosine(grid, 0.1);
        let reference = run(&cfg, &f, 2).unwrap();
        let short = vec![(1e-2, reference.clone()), (5e-3, reference.clone())];
        assert!(matches!(
            gronwall_report(&short, &reference, &cfg.model),
            Err(DiagnosticsError::TooFewEpsilons { got: 2 })
        ));
        let uneven = vec![
            (1e-2, reference.clone()),
            (5e-3, reference.clone()),
            (3e-3, reference.clone()),
        ];
        assert!(matches!(
            gronwall_report(&uneven, &reference, &cfg.model),
            Err(DiagnosticsError::EpsilonsNotHalving { .. })
        ));
    }

    #[test]
    fn gronwall_scaling_on_small_sweep() {
        let grid = Grid1D::new(24, 1.0).unwrap();
        let cfg = classic_config(2, 1.0, 0.01);
        let base = binary_cosine(grid, 0.1);
        let reference = run(&cfg, &base, 4).unwrap();
        let mode = |x: f64, i: usize| {
            let s = (2.0 * PI * x).cos();
            if i == 0 {
                s
            } else {
                -s
            }
        };
        let mut runs = Vec::new();
        for &eps in &[1e-2, 5e-3, 2.5e-3, 0.0] {
            let p0 = perturb_initial(&base, eps, mode).unwrap();
            runs.push((eps, run(&cfg, &p0, 4).unwrap()));
        }
        let report = gronwall_report(&runs, &reference, &cfg.model).unwrap();
        assert_eq!(report.epsilons.len(), 4);
        assert!(
            report.fitted_order > 1.8 && report.fitted_order < 2.2,
            "order {}",
            report.fitted_order
        );
        for (i, &eps) in report.epsilons.iter().enumerate() {
            if eps > 0.0 {
                assert!(report.h0[i] > 0.0);
                assert!(report.sup_ratio[i].is_finite());
            } else {
                // Coincident initial data must stay exactly coincident.
                assert_eq!(report.h0[i], 0.0);
                assert_eq!(report.sup_ratio[i], 0.0);
            }
        }
    }

    #[test]
    fn discrete_entropy_inequality_along_trajectory() {
        let grid = Grid1D::new(64, 1.0).unwrap();
        let cfg = classic_config(2, 1.0, 1.0);
        let table = cfg.d.clone().unwrap();
        let mut stepper = Stepper::new(cfg.clone()).unwrap();
        let mut field = binary_cosine(grid, 0.1);
        for _ in 0..40 {
            let h_before = entropy(&field, &cfg.model).unwrap();
            let d_before = dissipation(&field, &cfg.model, Some(&table)).unwrap();
            let (next, report) = stepper.step(&field, f64::INFINITY).unwrap();
            let h_after = entropy(&next, &cfg.model).unwrap();
            let slack = h_after - h_before + report.dt_used * d_before;
            assert!(
                slack <= 1e-8 * (1.0 + h_before.abs()),
                "entropy inequality slack {slack:e}"
            );
            field = next;
        }
    }

    #[test]
    fn record_bundles_snapshot_diagnostics() {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let cfg = classic_config(2, 1.0, 0.01);
        let f = binary_cosine(grid, 0.1);
        let r = uniform_field(grid, &[0.5, 0.5]);
        let rec = record(&f, Some(&r), &cfg.model, cfg.d.as_ref()).unwrap();
        assert_eq!(rec.t, 0.0);
        assert!(rec.entropy < 0.0);
        assert!(rec.dissipation > 0.0);
        assert!(rec.rel_entropy.unwrap() > 0.0);
        assert!(rec.rs_min >= -1e-10);
        assert_eq!(rec.mass.len(), 2);
        assert_close(rec.mass[0] + rec.mass[1], 1.0, 1e-12);
        assert!(rec.min_c > 0.0);
        assert!(rec.sum_dev <= 1e-12);

        let bare = record(&f, None, &cfg.model, cfg.d.as_ref()).unwrap();
        assert!(bare.rel_entropy.is_none());
    }
}
