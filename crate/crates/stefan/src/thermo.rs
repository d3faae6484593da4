//! Thermodynamic model registry: free energies, pressures, and structural
//! audits.
//!
//! Each species carries a strictly convex free-energy density `h(c)` with the
//! associated pressure `p(c) = c·h′(c) − h(c)` (so that `p′ = c·h″`). The
//! bundled models are addressable by string identifier:
//!
//! | id              | free energy                  | coupling matrix in the flux law |
//! |-----------------|------------------------------|---------------------------------|
//! | `classic-ms`    | `c(log c − 1)`               | constrained inverse of the drag matrix `A(c)` |
//! | `pvd`           | `c(log c − 1)`               | `A(c)` itself (the drag matrix acts as the inverted coupling) |
//! | `porous-medium` | `c^γ/(γ−1)`                  | `A(c)` itself                   |
//! | `tumor`         | `c(log c − 1)`               | reaction-coupling matrix `R(c)` (audit only; not integrable by the PDE solver) |
//! | `molar-mass`    | `(ρ/M)(log(ρ/M) − 1)`        | constrained inverse of `Ã(ρ)` with `D̃_ij = c² M_i M_j` |
//!
//! The audit operations sample the structural assumptions the stability
//! theory rests on: convexity bounds on the entropies, and symmetry / kernel
//! / boundedness / spectral-floor properties of the coupling matrices.

use crate::mat::Mat;
use crate::rng::Rng;
use crate::simplex::{
    bott_duffin_classic, build_friction_matrix, projectors, Composition,
    DiffusionTable, SimplexError,
};
use thiserror::Error;

/// Default lower cutoff for entropy-bound audits on `(δ, 1]`.
pub const AUDIT_DOMAIN_CUTOFF: f64 = 1e-6;
/// Grid step pinned for the quadratic-floor minimization.
pub const QUADRATIC_FLOOR_GRID_STEP: f64 = 1e-3;
/// Pairs closer than this to the diagonal are handled by the Taylor limit.
pub const QUADRATIC_FLOOR_DIAGONAL_CUT: f64 = 1e-6;
/// Grid step pinned for curvature minimization over an interval.
pub const CURVATURE_GRID_STEP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("evaluation outside the domain: {what} at {value:e}")]
    EvaluationDomain { what: &'static str, value: f64 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("model requires {expected} species, got {got}")]
    WrongSpeciesCount { expected: usize, got: usize },
    #[error("model `{0}` requires a coefficient table for this operation")]
    MissingTable(&'static str),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Linalg(#[from] crate::mat::MatError),
}

#[derive(Debug, Clone, PartialEq)]
enum EntropyKind {
    /// h = c(log c − 1)
    Boltzmann,
    /// h = c^γ/(γ−1), γ > 1
    Power { gamma: f64 },
    /// h = (c/M)(log(c/M) − 1), M > 0
    MolarBoltzmann { mass: f64 },
    /// h = a·c² — test scaffolding for audit counterexamples.
    Quadratic { a: f64 },
}

/// Per-species free-energy density with derivatives and pressure.
///
/// `h` extends continuously to 0 for every bundled model (`h(0) = 0`), while
/// `h′` and `h″` are evaluation-domain errors wherever the closed form
/// diverges (logarithms and negative powers at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyModel {
    pub name: String,
    kind: EntropyKind,
}

/// Boltzmann free energy `h(c) = c(log c − 1)`, pressure `p(c) = c`.
pub fn boltzmann_entropy() -> EntropyModel {
    EntropyModel { name: "boltzmann".into(), kind: EntropyKind::Boltzmann }
}

/// Power-law free energy `h(c) = c^γ/(γ−1)`, pressure `p(c) = c^γ`; γ > 1.
pub fn porous_entropy(gamma: f64) -> Result<EntropyModel, ThermoError> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(ThermoError::InvalidParameter { name: "gamma", value: gamma });
    }
    Ok(EntropyModel { name: format!("power-law({gamma})"), kind: EntropyKind::Power { gamma } })
}

/// Mass-scaled Boltzmann free energy `h(ρ) = (ρ/M)(log(ρ/M) − 1)`,
/// pressure `p(ρ) = ρ/M`; M > 0.
pub fn molar_entropy(mass: f64) -> Result<EntropyModel, ThermoError> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(ThermoError::InvalidParameter { name: "mass", value: mass });
    }
    Ok(EntropyModel { name: format!("molar-boltzmann({mass})"), kind: EntropyKind::MolarBoltzmann { mass } })
}

/// Quadratic test energy `h = a·c²`; with `a < 0` it violates convexity and
/// serves as an audit counterexample.
#[doc(hidden)]
pub fn quadratic_entropy(a: f64) -> EntropyModel {
    EntropyModel { name: format!("quadratic({a})"), kind: EntropyKind::Quadratic { a } }
}

impl EntropyModel {
    fn domain_err(what: &'static str, value: f64) -> ThermoError {
        ThermoError::EvaluationDomain { what, value }
    }

    /// Free energy h(c); continuously extended to 0.
    pub fn h(&self, c: f64) -> Result<f64, ThermoError> {
        if c < 0.0 {
            return Err(Self::domain_err("h", c));
        }
        Ok(match &self.kind {
            EntropyKind::Boltzmann => {
                if c == 0.0 {
                    0.0
                } else {
                    c * (c.ln() - 1.0)
                }
            }
            EntropyKind::Power { gamma } => c.powf(*gamma) / (gamma - 1.0),
            EntropyKind::MolarBoltzmann { mass } => {
                if c == 0.0 {
                    0.0
                } else {
                    let r = c / mass;
                    r * (r.ln() - 1.0)
                }
            }
            EntropyKind::Quadratic { a } => a * c * c,
        })
    }

    /// First derivative h′(c); errors where the closed form diverges (c = 0
    /// for logarithmic models).
    pub fn h_prime(&self, c: f64) -> Result<f64, ThermoError> {
        match &self.kind {
            EntropyKind::Boltzmann => {
                if c <= 0.0 {
                    Err(Self::domain_err("h'", c))
                } else {
                    Ok(c.ln())
                }
            }
            EntropyKind::Power { gamma } => {
                if c < 0.0 {
                    Err(Self::domain_err("h'", c))
                } else {
                    Ok(gamma / (gamma - 1.0) * c.powf(gamma - 1.0))
                }
            }
            EntropyKind::MolarBoltzmann { mass } => {
                if c <= 0.0 {
                    Err(Self::domain_err("h'", c))
                } else {
                    Ok((c / mass).ln() / mass)
                }
            }
            EntropyKind::Quadratic { a } => Ok(2.0 * a * c),
        }
    }

    /// Second derivative h″(c); errors where the closed form diverges.
    pub fn h_second(&self, c: f64) -> Result<f64, ThermoError> {
        match &self.kind {
            EntropyKind::Boltzmann => {
                if c <= 0.0 {
                    Err(Self::domain_err("h''", c))
                } else {
                    Ok(1.0 / c)
                }
            }
            EntropyKind::Power { gamma } => {
                if c < 0.0 || (c == 0.0 && *gamma < 2.0) {
                    Err(Self::domain_err("h''", c))
                } else {
                    Ok(gamma * c.powf(gamma - 2.0))
                }
            }
            EntropyKind::MolarBoltzmann { mass } => {
                if c <= 0.0 {
                    Err(Self::domain_err("h''", c))
                } else {
                    Ok(1.0 / (mass * c))
                }
            }
            EntropyKind::Quadratic { a } => Ok(2.0 * a),
        }
    }

    /// Pressure p(c) = c·h′(c) − h(c); continuously extended to 0.
    pub fn p(&self, c: f64) -> Result<f64, ThermoError> {
        if c < 0.0 {
            return Err(Self::domain_err("p", c));
        }
        Ok(match &self.kind {
            EntropyKind::Boltzmann => c,
            EntropyKind::Power { gamma } => c.powf(*gamma),
            EntropyKind::MolarBoltzmann { mass } => c / mass,
            EntropyKind::Quadratic { a } => a * c * c,
        })
    }

    /// Pressure derivative p′(c) = c·h″(c).
    pub fn p_prime(&self, c: f64) -> Result<f64, ThermoError> {
        Ok(match &self.kind {
            EntropyKind::Boltzmann => {
                if c < 0.0 {
                    return Err(Self::domain_err("p'", c));
                }
                1.0
            }
            EntropyKind::Power { gamma } => {
                if c < 0.0 {
                    return Err(Self::domain_err("p'", c));
                }
                gamma * c.powf(gamma - 1.0)
            }
            EntropyKind::MolarBoltzmann { mass } => {
                if c < 0.0 {
                    return Err(Self::domain_err("p'", c));
                }
                1.0 / mass
            }
            EntropyKind::Quadratic { a } => 2.0 * a * c,
        })
    }

    /// Second pressure derivative p″(c), analytic per model.
    pub fn p_second(&self, c: f64) -> Result<f64, ThermoError> {
        Ok(match &self.kind {
            EntropyKind::Boltzmann | EntropyKind::MolarBoltzmann { .. } => 0.0,
            EntropyKind::Power { gamma } => {
                if c < 0.0 || (c == 0.0 && *gamma < 2.0) {
                    return Err(Self::domain_err("p''", c));
                }
                gamma * (gamma - 1.0) * c.powf(gamma - 2.0)
            }
            EntropyKind::Quadratic { a } => 2.0 * a,
        })
    }

    /// Relative free-energy density `h(c) − h(c̄) − h′(c̄)·(c − c̄)`.
    ///
    /// Nonnegative by convexity; for the Boltzmann energy it equals
    /// `c·log(c/c̄) − (c − c̄)` with the `c = 0` limit `c̄`.
    pub fn relative_density(&self, c: f64, cbar: f64) -> Result<f64, ThermoError> {
        if cbar <= 0.0 {
            return Err(Self::domain_err("relative density reference", cbar));
        }
        Ok(self.h(c)? - self.h(cbar)? - self.h_prime(cbar)? * (c - cbar))
    }
}

/// The three Boltzmann pointwise lower bounds evaluated at a pair `(c, c̄)`.
#[derive(Debug, Clone, Copy)]
pub struct PointwiseBounds {
    /// `c·log(c/c̄) − (c − c̄)`
    pub lhs: f64,
    /// `½(c − c̄)²`
    pub quadratic_bound: f64,
    /// `(√c − √c̄)²`
    pub sqrt_bound: f64,
    /// `min(lhs − quadratic_bound, lhs − sqrt_bound)`
    pub margin: f64,
}

/// Evaluates the Boltzmann relative density against its two pointwise lower
/// bounds `½(c−c̄)²` and `(√c−√c̄)²` for `c, c̄ ∈ (0, 1]`.
pub fn pointwise_bound_check(c: f64, cbar: f64) -> PointwiseBounds {
    assert!(c > 0.0 && c <= 1.0, "c = {c} outside (0,1]");
    assert!(cbar > 0.0 && cbar <= 1.0, "cbar = {cbar} outside (0,1]");
    let lhs = c * (c / cbar).ln() - (c - cbar);
    let quadratic_bound = 0.5 * (c - cbar) * (c - cbar);
    let s = c.sqrt() - cbar.sqrt();
    let sqrt_bound = s * s;
    PointwiseBounds {
        lhs,
        quadratic_bound,
        sqrt_bound,
        margin: (lhs - quadratic_bound).min(lhs - sqrt_bound),
    }
}

/// Best constant `κ_m` with `h(c|c̄) ≥ κ_m (c − c̄)²` over
/// `c ∈ [0,1]`, `c̄ ∈ [m,1]`, estimated by grid minimization (step `1e-3`).
///
/// Pairs within `1e-6` of the diagonal are covered by the Taylor limit
/// `½·h″(c̄)`, which is included as a candidate at every grid `c̄`.
pub fn entropy_quadratic_floor(model: &EntropyModel, m: f64) -> Result<f64, ThermoError> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(ThermoError::InvalidParameter { name: "m", value: m });
    }
    let step = QUADRATIC_FLOOR_GRID_STEP;
    let c_count = (1.0 / step).round() as usize + 1;
    let cbar_count = ((1.0 - m) / step).floor() as usize + 1;
    let mut kappa = f64::INFINITY;
    for kb in 0..cbar_count {
        let cbar = (m + kb as f64 * step).min(1.0);
        kappa = kappa.min(0.5 * model.h_second(cbar)?);
        for kc in 0..c_count {
            let c = (kc as f64 * step).min(1.0);
            let diff = c - cbar;
            if diff.abs() < QUADRATIC_FLOOR_DIAGONAL_CUT {
                continue;
            }
            kappa = kappa.min(model.relative_density(c, cbar)? / (diff * diff));
        }
    }
    Ok(kappa)
}

/// Smallest curvature `h″` over species and a grid on `[lo, hi]`
/// (step `1e-4`, endpoints included).
pub fn min_curvature(models: &[EntropyModel], lo: f64, hi: f64) -> Result<f64, ThermoError> {
    assert!(lo > 0.0 && hi >= lo);
    let steps = ((hi - lo) / CURVATURE_GRID_STEP).ceil() as usize;
    let mut eta = f64::INFINITY;
    for model in models {
        for k in 0..=steps {
            let c = (lo + k as f64 * CURVATURE_GRID_STEP).min(hi);
            eta = eta.min(model.h_second(c)?);
        }
        eta = eta.min(model.h_second(hi)?);
    }
    Ok(eta)
}

/// Audit of the entropy convexity bounds: `0 < c·h″(c) ≤ K₁` and
/// `|p″(c)| ≤ K₂·h″(c)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct EntropyBoundsAudit {
    /// Observed sup of `c·h″(c)`.
    pub k1_estimate: f64,
    /// Observed sup of `|p″(c)| / h″(c)`.
    pub k2_estimate: f64,
    pub samples: usize,
    /// True iff both sups are finite and `c·h″ > 0` at every sampled point.
    pub pass: bool,
}

/// Samples `c·h″` and `|p″|/h″` on a uniform grid over `(1e-6, 1]`.
pub fn audit_entropy_bounds(model: &EntropyModel, grid_points: usize) -> EntropyBoundsAudit {
    assert!(grid_points >= 2);
    let delta = AUDIT_DOMAIN_CUTOFF;
    let mut k1 = f64::NEG_INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    let mut positive = true;
    let mut finite = true;
    for k in 0..grid_points {
        let c = delta + (1.0 - delta) * (k + 1) as f64 / grid_points as f64;
        match (model.h_second(c), model.p_second(c)) {
            (Ok(h2), Ok(p2)) => {
                let ch2 = c * h2;
                if !(ch2 > 0.0) {
                    positive = false;
                }
                k1 = k1.max(ch2);
                if h2 != 0.0 {
                    k2 = k2.max(p2.abs() / h2);
                } else {
                    finite = false;
                }
                if !ch2.is_finite() {
                    finite = false;
                }
            }
            _ => {
                positive = false;
            }
        }
    }
    EntropyBoundsAudit {
        k1_estimate: k1,
        k2_estimate: k2,
        samples: grid_points,
        pass: positive && finite && k1.is_finite() && k2.is_finite(),
    }
}

/// Reaction-coupling weight matrix `W(c)` of the three-species tumor model
/// (third column identically zero).
pub fn tumor_w_matrix(c: &Composition, beta: f64, theta: f64) -> Result<Mat, ThermoError> {
    if c.n() != 3 {
        return Err(ThermoError::WrongSpeciesCount { expected: 3, got: c.n() });
    }
    if !(beta > 0.0) {
        return Err(ThermoError::InvalidParameter { name: "beta", value: beta });
    }
    if !(theta >= 0.0) {
        return Err(ThermoError::InvalidParameter { name: "theta", value: theta });
    }
    let (c1, c2, c3) = (c.get(0), c.get(1), c.get(2));
    let mut w = Mat::zeros(3);
    w.set(0, 0, 2.0 * c1 * (1.0 - c1) - beta * theta * c1 * c2 * c2);
    w.set(0, 1, -2.0 * beta * c1 * c2 * (1.0 + theta * c1));
    w.set(1, 0, -2.0 * c1 * c2 + beta * theta * (1.0 - c2) * c2 * c2);
    w.set(1, 1, 2.0 * beta * c2 * (1.0 - c2) * (1.0 + theta * c1));
    w.set(2, 0, -2.0 * c1 * c3 - beta * theta * c3 * c2 * c2);
    w.set(2, 1, -2.0 * beta * c3 * c2 * (1.0 + theta * c1));
    Ok(w)
}

/// Tumor coupling matrix
/// `R = A^BD · diag(1/√c) · W(c) · diag(√c) · P_L`, built with drag
/// coefficients `D_ij = 1/k_ij`. Requires a strictly interior composition.
/// `R` is not symmetric in general.
pub fn tumor_mobility(
    c: &Composition,
    beta: f64,
    theta: f64,
    k: &DiffusionTable,
) -> Result<Mat, ThermoError> {
    if c.n() != 3 || k.n() != 3 {
        return Err(ThermoError::WrongSpeciesCount { expected: 3, got: c.n().max(k.n()) });
    }
    for (index, &value) in c.values().iter().enumerate() {
        if value < 1e-12 {
            return Err(ThermoError::Simplex(SimplexError::FloorViolation { index, value }));
        }
    }
    let w = tumor_w_matrix(c, beta, theta)?;
    let drag = DiffusionTable::from_upper_triangle(
        3,
        &k.upper_triangle().iter().map(|kij| 1.0 / kij).collect::<Vec<_>>(),
    )?;
    let fm = build_friction_matrix(c, &drag)?;
    let inv = bott_duffin_classic(&fm)?;
    let s = c.sqrt_values();
    let inv_s: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    let p = projectors(c);
    let middle = w.diag_scale(&inv_s, &s);
    Ok(inv.matrix.matmul(&middle).matmul(&p.p_l))
}

/// Mass-based coupling matrix `Ã(ρ)` with composition-dependent
/// coefficients `D̃_ij(ρ) = c² M_i M_j`, `c = Σ_k ρ_k/M_k`.
pub fn molar_mass_friction(rho: &Composition, masses: &[f64]) -> Result<Mat, ThermoError> {
    let n = rho.n();
    if masses.len() != n {
        return Err(ThermoError::WrongSpeciesCount { expected: n, got: masses.len() });
    }
    for &m in masses {
        if !(m > 0.0) || !m.is_finite() {
            return Err(ThermoError::InvalidParameter { name: "mass", value: m });
        }
    }
    let total_c: f64 = rho.values().iter().zip(masses).map(|(r, m)| r / m).sum();
    let c2 = total_c * total_c;
    let s = rho.sqrt_values();
    let mut a = Mat::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k != i {
                diag += rho.get(k) / (c2 * masses[i] * masses[k]);
            }
        }
        a.set(i, i, diag);
        for j in 0..n {
            if j != i {
                a.set(i, j, -s[i] * s[j] / (c2 * masses[i] * masses[j]));
            }
        }
    }
    Ok(a)
}

/// Closed-form mobility of the vapor-deposition model:
/// `√c_i A_ij √c_j` expanded — diagonal `Σ_{k≠i} a_ik c_i c_k`, off-diagonal
/// `−a_ij c_i c_j`, with `a_ij = 1/D_ij`.
pub fn pvd_mobility(c: &Composition, d: &DiffusionTable) -> Result<Mat, ThermoError> {
    let n = c.n();
    if d.n() != n {
        return Err(ThermoError::WrongSpeciesCount { expected: n, got: d.n() });
    }
    let mut m = Mat::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k != i {
                diag += c.get(i) * c.get(k) / d.get(i, k);
            }
        }
        m.set(i, i, diag);
        for j in 0..n {
            if j != i {
                m.set(i, j, -c.get(i) * c.get(j) / d.get(i, j));
            }
        }
    }
    Ok(m)
}

/// Registry identifier of a bundled model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    ClassicMs,
    Pvd,
    Tumor,
    PorousMedium,
    MolarMass,
}

impl ModelKind {
    pub fn parse(id: &str) -> Option<ModelKind> {
        Some(match id {
            "classic-ms" => ModelKind::ClassicMs,
            "pvd" => ModelKind::Pvd,
            "tumor" => ModelKind::Tumor,
            "porous-medium" => ModelKind::PorousMedium,
            "molar-mass" => ModelKind::MolarMass,
            _ => return None,
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            ModelKind::ClassicMs => "classic-ms",
            ModelKind::Pvd => "pvd",
            ModelKind::Tumor => "tumor",
            ModelKind::PorousMedium => "porous-medium",
            ModelKind::MolarMass => "molar-mass",
        }
    }
}

/// Model-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    None,
    Porous { gamma: f64 },
    Tumor { beta: f64, theta: f64 },
    MolarMass { masses: Vec<f64> },
}

/// A bundled model: identifier, per-species entropies, parameters, and the
/// rules for building its coupling matrices.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub entropies: Vec<EntropyModel>,
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn classic(n: usize) -> Result<Self, ThermoError> {
        Self::check_n(n)?;
        Ok(ModelSpec {
            kind: ModelKind::ClassicMs,
            n,
            entropies: vec![boltzmann_entropy(); n],
            params: ModelParams::None,
        })
    }

    pub fn pvd(n: usize) -> Result<Self, ThermoError> {
        Self::check_n(n)?;
        Ok(ModelSpec {
            kind: ModelKind::Pvd,
            n,
            entropies: vec![boltzmann_entropy(); n],
            params: ModelParams::None,
        })
    }

    pub fn porous(n: usize, gamma: f64) -> Result<Self, ThermoError> {
        Self::check_n(n)?;
        let entropy = porous_entropy(gamma)?;
        Ok(ModelSpec {
            kind: ModelKind::PorousMedium,
            n,
            entropies: vec![entropy; n],
            params: ModelParams::Porous { gamma },
        })
    }

    pub fn tumor(beta: f64, theta: f64) -> Result<Self, ThermoError> {
        if !(beta > 0.0) {
            return Err(ThermoError::InvalidParameter { name: "beta", value: beta });
        }
        if !(theta >= 0.0) {
            return Err(ThermoError::InvalidParameter { name: "theta", value: theta });
        }
        Ok(ModelSpec {
            kind: ModelKind::Tumor,
            n: 3,
            entropies: vec![boltzmann_entropy(); 3],
            params: ModelParams::Tumor { beta, theta },
        })
    }

    pub fn molar_mass(masses: &[f64]) -> Result<Self, ThermoError> {
        Self::check_n(masses.len())?;
        let entropies = masses.iter().map(|&m| molar_entropy(m)).collect::<Result<_, _>>()?;
        Ok(ModelSpec {
            kind: ModelKind::MolarMass,
            n: masses.len(),
            entropies,
            params: ModelParams::MolarMass { masses: masses.to_vec() },
        })
    }

    fn check_n(n: usize) -> Result<(), ThermoError> {
        if n < 2 {
            return Err(ThermoError::WrongSpeciesCount { expected: 2, got: n });
        }
        if n > crate::mat::MAX_DIM {
            return Err(ThermoError::WrongSpeciesCount { expected: crate::mat::MAX_DIM, got: n });
        }
        Ok(())
    }

    /// The coupling matrix `B(c)` whose structural assumptions the audit
    /// checks. `table` carries drag coefficients (`classic-ms`, `pvd`,
    /// `porous-medium`) or friction weights (`tumor`); `molar-mass` ignores it.
    pub fn audit_matrix(&self, c: &Composition, table: Option<&DiffusionTable>) -> Result<Mat, ThermoError> {
        match (&self.kind, &self.params) {
            (ModelKind::ClassicMs, _) => {
                let d = table.ok_or(ThermoError::MissingTable("classic-ms"))?;
                Ok(build_friction_matrix(c, d)?.matrix)
            }
            (ModelKind::Pvd, _) | (ModelKind::PorousMedium, _) => {
                let d = table.ok_or(ThermoError::MissingTable("pvd/porous-medium"))?;
                let fm = build_friction_matrix(c, d)?;
                Ok(bott_duffin_classic(&fm)?.matrix)
            }
            (ModelKind::Tumor, ModelParams::Tumor { beta, theta }) => {
                let k = table.ok_or(ThermoError::MissingTable("tumor"))?;
                tumor_mobility(c, *beta, *theta, k)
            }
            (ModelKind::MolarMass, ModelParams::MolarMass { masses }) => {
                molar_mass_friction(c, masses)
            }
            _ => unreachable!("params always match kind by construction"),
        }
    }

    /// Certified lower bound for the nonzero eigenvalues of the audit matrix
    /// at this composition (not defined for the asymmetric tumor coupling).
    pub fn audit_eigenvalue_floor(
        &self,
        c: &Composition,
        table: Option<&DiffusionTable>,
    ) -> Result<Option<f64>, ThermoError> {
        match (&self.kind, &self.params) {
            (ModelKind::ClassicMs, _) => {
                let d = table.ok_or(ThermoError::MissingTable("classic-ms"))?;
                Ok(Some(d.drag_eigenvalue_floor()))
            }
            (ModelKind::Pvd, _) | (ModelKind::PorousMedium, _) => {
                let d = table.ok_or(ThermoError::MissingTable("pvd/porous-medium"))?;
                Ok(Some(d.inverse_eigenvalue_floor()))
            }
            (ModelKind::Tumor, _) => Ok(None),
            (ModelKind::MolarMass, ModelParams::MolarMass { masses }) => {
                let total_c: f64 = c.values().iter().zip(masses).map(|(r, m)| r / m).sum();
                let mut max_pair = 0.0f64;
                for i in 0..self.n {
                    for j in 0..self.n {
                        if i != j {
                            max_pair = max_pair.max(masses[i] * masses[j]);
                        }
                    }
                }
                Ok(Some(1.0 / (total_c * total_c * max_pair)))
            }
            _ => unreachable!("params always match kind by construction"),
        }
    }
}

/// Structural audit of a model's coupling matrix over random interior
/// compositions: symmetry, kernel direction, boundedness with a Frobenius
/// envelope, an empirical Lipschitz quotient, and spectral floors
/// (Rayleigh-quotient positivity for the asymmetric tumor coupling).
#[derive(Debug, Clone)]
pub struct CouplingAudit {
    pub samples: usize,
    pub floor: f64,
    pub symmetry_ok: bool,
    pub max_symmetry_residual: f64,
    pub kernel_ok: bool,
    pub max_kernel_residual: f64,
    pub bounded_ok: bool,
    /// Observed sup of ‖B(c)‖_F over the sampled compositions.
    pub max_frobenius: f64,
    /// Envelope points (s, sup ‖B‖_F over samples with min c ≥ s), s ascending;
    /// the sup is monotone nonincreasing in s.
    pub envelope: Vec<(f64, f64)>,
    /// Largest observed ‖B(c) − B(c′)‖_F / ‖c − c′‖₂ over paired samples
    /// at distance ≤ 1e-3 (reported, not asserted).
    pub lipschitz_quotient: f64,
    /// Smallest observed nonzero eigenvalue (symmetric couplings only).
    pub min_nonzero: f64,
    /// Certified floor the nonzero eigenvalues are compared against.
    pub mu_reported: f64,
    pub spectral_ok: bool,
    /// Sampled infimum of `zᵀB z / |P_L z|²` (asymmetric tumor coupling).
    pub rayleigh_infimum: Option<f64>,
    pub pass: bool,
}

/// Runs the coupling-structure audit for `spec` with `samples` random
/// compositions bounded below by `floor`.
pub fn audit_coupling_structure(
    spec: &ModelSpec,
    table: Option<&DiffusionTable>,
    samples: usize,
    floor: f64,
    seed: u64,
) -> Result<CouplingAudit, ThermoError> {
    assert!(samples >= 10);
    assert!(floor > 0.0 && floor * (spec.n as f64) < 1.0);
    let mut rng = Rng::new(seed);
    let n = spec.n;
    let mut max_sym = 0.0f64;
    let mut max_kernel = 0.0f64;
    let mut max_frob = 0.0f64;
    let mut lipschitz = 0.0f64;
    let mut min_nonzero = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut worst_mu = f64::INFINITY;
    let mut rayleigh = f64::INFINITY;
    let is_tumor = spec.kind == ModelKind::Tumor;
    // Envelope buckets: thresholds from floor up to the largest possible
    // min-entry 1/n.
    let bucket_count = 8usize;
    let top = 1.0 / n as f64;
    let thresholds: Vec<f64> = (0..bucket_count)
        .map(|k| floor + (top - floor) * k as f64 / bucket_count as f64)
        .collect();
    let mut bucket_sup = vec![0.0f64; bucket_count];

    for _ in 0..samples {
        let c = Composition::new(&rng.interior_composition(n, floor))?;
        let b = spec.audit_matrix(&c, table)?;
        let scale = 1.0_f64.max(b.max_abs());
        max_sym = max_sym.max(b.symmetry_residual());
        max_kernel = max_kernel.max(crate::mat::norm_inf(&b.matvec(&c.sqrt_values())) / scale);
        let frob = b.frobenius_norm();
        max_frob = max_frob.max(frob);
        let min_c = c.min_value();
        for (k, &s) in thresholds.iter().enumerate() {
            if min_c >= s {
                bucket_sup[k] = bucket_sup[k].max(frob);
            }
        }

        // Paired sample at distance ≤ 1e-3 for the Lipschitz quotient.
        let mut shift: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mean = shift.iter().sum::<f64>() / n as f64;
        for v in shift.iter_mut() {
            *v -= mean;
        }
        let scale_shift = 1e-3 / (1.0 + crate::mat::norm_2(&shift));
        let moved: Vec<f64> = c
            .values()
            .iter()
            .zip(&shift)
            .map(|(v, s)| v + scale_shift * s)
            .collect();
        if moved.iter().all(|&v| v >= floor * 0.5) {
            let c2 = Composition::new(&moved)?;
            let b2 = spec.audit_matrix(&c2, table)?;
            let dist = crate::mat::norm_2(
                &c.values().iter().zip(c2.values()).map(|(a, b)| a - b).collect::<Vec<_>>(),
            );
            if dist > 1e-9 {
                lipschitz = lipschitz.max(b.sub(&b2).frobenius_norm() / dist);
            }
        }

        if is_tumor {
            let p = projectors(&c);
            let z: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let pz = p.p_l.matvec(&z);
            let denom = crate::mat::dot(&pz, &pz);
            if denom > 1e-12 {
                rayleigh = rayleigh.min(b.quadratic_form(&z, &z) / denom);
            }
        } else {
            let ev = b.sym_eigenvalues()?;
            min_nonzero = min_nonzero.min(ev[1]);
            if let Some(mu) = spec.audit_eigenvalue_floor(&c, table)? {
                worst_margin = worst_margin.min(ev[1] - mu);
                worst_mu = worst_mu.min(mu);
            }
        }
    }

    // Monotone envelope: the sup over {min c ≥ s} can only grow as s
    // decreases, so accumulate from the highest threshold downward.
    let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(bucket_count);
    let mut cumulative = 0.0f64;
    for k in (0..bucket_count).rev() {
        cumulative = cumulative.max(bucket_sup[k]);
        envelope.push((thresholds[k], cumulative));
    }
    envelope.reverse();

    let symmetry_ok = max_sym <= 1e-10 * (1.0 + max_frob);
    let kernel_ok = max_kernel <= 1e-10;
    let bounded_ok = max_frob.is_finite();
    let spectral_ok = if is_tumor { rayleigh > 0.0 } else { worst_margin >= -1e-9 };
    let pass = kernel_ok && bounded_ok && spectral_ok && (symmetry_ok || is_tumor);
    Ok(CouplingAudit {
        samples,
        floor,
        symmetry_ok,
        max_symmetry_residual: max_sym,
        kernel_ok,
        max_kernel_residual: max_kernel,
        bounded_ok,
        max_frobenius: max_frob,
        envelope,
        lipschitz_quotient: lipschitz,
        min_nonzero: if is_tumor { f64::NAN } else { min_nonzero },
        mu_reported: if is_tumor { f64::NAN } else { worst_mu },
        spectral_ok,
        rayleigh_infimum: if is_tumor { Some(rayleigh) } else { None },
        pass,
    })
}

/// Observed Frobenius envelope `γ̂(s)`: the sup of `‖B(c)‖_F` over `samples`
/// random compositions with `min c_i ≥ s`.
pub fn frobenius_envelope(
    spec: &ModelSpec,
    table: Option<&DiffusionTable>,
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, ThermoError> {
    assert!(s > 0.0 && s * (spec.n as f64) <= 1.0);
    let mut rng = Rng::new(seed);
    let mut sup = 0.0f64;
    for _ in 0..samples {
        let c = Composition::new(&rng.interior_composition(spec.n, s))?;
        sup = sup.max(spec.audit_matrix(&c, table)?.frobenius_norm());
    }
    Ok(sup)
}
