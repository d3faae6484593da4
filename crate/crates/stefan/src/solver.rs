//! 1-D cell-centered finite-volume evolution of simplex-valued fields.
//!
//! The scheme integrates the parabolic cross-diffusion system in its
//! flux form with no-flux boundaries:
//!
//! - faces carry the arithmetic average of the neighboring cells (which
//!   stays on the simplex) and the coupling matrix is evaluated there;
//! - the `classic-ms` model uses the square-root formulation
//!   `F_i = −2 √c_i Σ_j A^BD_ij Δ√c_j / dx`, which never evaluates a
//!   logarithm and therefore tolerates vacuum states;
//! - the generalized models (`pvd`, `porous-medium`, `molar-mass`) use
//!   `F_i = −√c_i Σ_j B^BD_ij √c_j Δh′_j / dx` and demand states bounded
//!   away from vacuum (floor `1e-12`), surfacing rather than hiding any
//!   vacuum approach;
//! - time stepping is adaptive explicit Euler: a candidate step is rejected
//!   and the step size halved whenever it produces an entry below the
//!   positivity threshold, a cell sum off the simplex by more than `1e-12`,
//!   or an entropy increase beyond the configured tolerance. Accepted steps
//!   grow the step size by 1.2 up to `safety · dx² / (2Λ̂)`, where `Λ̂`
//!   estimates the stiffest face mobility.
//!
//! Because every face flux satisfies `Σ_i F_i = 0` up to rounding (the
//! coupling matrices are annihilated by `√c` from the left), cell sums are
//! preserved structurally and per-species total mass is conserved by the
//! telescoping flux sum.

use crate::diagnostics;
use crate::simplex::{
    bott_duffin, bott_duffin_classic, build_friction_matrix, Composition, DiffusionTable,
    SimplexError,
};
use crate::thermo::{molar_mass_friction, ModelKind, ModelParams, ModelSpec, ThermoError};
use crate::mat::Mat;
use thiserror::Error;

/// Classic-model candidates may undershoot zero by at most this much.
pub const NEGATIVE_SLACK: f64 = 1e-14;
/// Generalized-model states must stay at or above this floor (the `h′`
/// evaluation floor); candidates below it are rejected, never clamped.
pub const GENERALIZED_STATE_FLOOR: f64 = 1e-12;
/// Largest tolerated per-cell deviation of `Σ c_i` from 1 in a candidate.
pub const SUM_DEVIATION_LIMIT: f64 = 1e-12;
/// Step-size growth factor applied after an accepted step.
pub const DT_GROWTH: f64 = 1.2;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cell {cell}: {source}")]
    SimplexViolation { cell: usize, source: SimplexError },
    #[error("time stepping stalled at t = {time:e} after {rejects} rejected halvings")]
    StepStalled { time: f64, rejects: usize },
    #[error("model `{0}` is not integrable by the PDE solver")]
    UnsupportedModel(&'static str),
    #[error("model `{0}` requires a drag-coefficient table")]
    MissingTable(&'static str),
    #[error("cell {cell}: state {value:e} below the generalized-model floor {floor:e}")]
    VacuumState { cell: usize, value: f64, floor: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("reference not interior enough for the perturbation: cell {cell} has {value:e}, needs {required:e}")]
    ReferenceNotInterior { cell: usize, value: f64, required: f64 },
    #[error("perturbation exits the simplex at cell {cell}")]
    PerturbationExitsSimplex { cell: usize },
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Diagnostics(Box<crate::diagnostics::DiagnosticsError>),
}

impl From<crate::diagnostics::DiagnosticsError> for SolverError {
    fn from(e: crate::diagnostics::DiagnosticsError) -> Self {
        SolverError::Diagnostics(Box::new(e))
    }
}

/// Uniform 1-D cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    cells: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(cells: usize, length: f64) -> Result<Self, SolverError> {
        if cells < 4 {
            return Err(SolverError::InvalidConfig("grid needs at least 4 cells"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(SolverError::InvalidConfig("grid length must be positive and finite"));
        }
        Ok(Grid1D { cells, length })
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Center coordinate of cell `k`.
    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dx()
    }
}

/// A spatial field of compositions at a fixed time.
///
/// Storage is cell-major: `data[k*n + i]` is species `i` in cell `k`. Every
/// cell satisfies the simplex invariants of [`Composition`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    n: usize,
    data: Vec<f64>,
    time: f64,
}

impl Field {
    pub(crate) fn from_cells(grid: Grid1D, n: usize, data: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(data.len(), grid.cells() * n);
        Field { grid, n, data, time }
    }

    #[inline]
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn cell(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    /// The cell's composition as a validated value.
    pub fn composition(&self, k: usize) -> Composition {
        Composition::from_validated(self.cell(k).to_vec())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Largest per-cell deviation of the species sum from 1.
    pub fn max_sum_deviation(&self) -> f64 {
        (0..self.grid.cells())
            .map(|k| (self.cell(k).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-species total mass `Σ_cells c_i · dx`.
    pub fn species_masses(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut masses = vec![0.0; self.n];
        for k in 0..self.grid.cells() {
            for (i, &v) in self.cell(k).iter().enumerate() {
                masses[i] += v * dx;
            }
        }
        masses
    }
}

/// Initializes a field at `t = 0` from a closed-form profile evaluated at
/// cell centers. The profile must return a valid composition everywhere.
pub fn init_field(
    grid: Grid1D,
    n: usize,
    mut profile: impl FnMut(f64) -> Vec<f64>,
) -> Result<Field, SolverError> {
    let mut data = Vec::with_capacity(grid.cells() * n);
    for k in 0..grid.cells() {
        let raw = profile(grid.center(k));
        let comp = Composition::new(&raw)
            .map_err(|source| SolverError::SimplexViolation { cell: k, source })?;
        if comp.n() != n {
            return Err(SolverError::InvalidConfig("profile species count mismatch"));
        }
        data.extend_from_slice(comp.values());
    }
    Ok(Field::from_cells(grid, n, data, 0.0))
}

/// Solver parameters; see the module docs for the acceptance rules.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub model: ModelSpec,
    /// Drag coefficients; required for `classic-ms`, `pvd`, `porous-medium`.
    pub d: Option<DiffusionTable>,
    pub dt_init: f64,
    /// Fraction of the stability estimate used as the step-size cap.
    pub safety: f64,
    pub t_end: f64,
    pub max_rejects: usize,
    /// Largest tolerated entropy increase per accepted step.
    pub entropy_tolerance: f64,
    /// Positivity threshold for candidate states; 0 means entries down to
    /// −1e-14 are accepted (classic model only).
    pub positivity_floor: f64,
}

impl SolverConfig {
    pub fn new(model: ModelSpec, d: Option<DiffusionTable>, dt_init: f64, t_end: f64) -> Self {
        SolverConfig {
            model,
            d,
            dt_init,
            safety: 0.4,
            t_end,
            max_rejects: 40,
            entropy_tolerance: 1e-10,
            positivity_floor: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt_init > 0.0) {
            return Err(SolverError::InvalidConfig("dt_init must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(SolverError::InvalidConfig("t_end must be nonnegative"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(SolverError::InvalidConfig("safety must lie in (0, 1]"));
        }
        if self.max_rejects == 0 {
            return Err(SolverError::InvalidConfig("max_rejects must be at least 1"));
        }
        if !(self.entropy_tolerance >= 0.0) {
            return Err(SolverError::InvalidConfig("entropy_tolerance must be nonnegative"));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(SolverError::InvalidConfig("positivity_floor must be nonnegative"));
        }
        match self.model.kind {
            ModelKind::Tumor => return Err(SolverError::UnsupportedModel("tumor")),
            ModelKind::ClassicMs | ModelKind::Pvd | ModelKind::PorousMedium => {
                if self.d.is_none() {
                    return Err(SolverError::MissingTable(self.model.kind.id()));
                }
            }
            ModelKind::MolarMass => {}
        }
        Ok(())
    }

    /// True for models whose flux evaluates `h′` (and therefore demands a
    /// strictly positive state).
    pub fn is_generalized(&self) -> bool {
        !matches!(self.model.kind, ModelKind::ClassicMs)
    }

    /// Smallest admissible entry in an accepted state.
    fn acceptance_floor(&self) -> f64 {
        if self.is_generalized() {
            self.positivity_floor.max(GENERALIZED_STATE_FLOOR)
        } else {
            self.positivity_floor - NEGATIVE_SLACK
        }
    }
}

/// Outcome record of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub dt_used: f64,
    pub rejected_count: usize,
    pub min_c: f64,
    pub sum_deviation_max: f64,
    pub entropy_change: f64,
}

struct FluxAssembly {
    /// `(cells+1) × n` face fluxes, boundary faces zero.
    fluxes: Vec<f64>,
    /// Largest face stiffness scale (spectral norm of mobility × curvature).
    lambda_hat: f64,
}

fn face_quantities(
    field: &Field,
    cfg: &SolverConfig,
    k: usize,
) -> Result<(Vec<f64>, f64), SolverError> {
    let n = field.n();
    let dx = field.grid().dx();
    let left = field.composition(k);
    let right = field.composition(k + 1);
    let cf = left.average(&right);
    let sf = cf.sqrt_values();
    match cfg.model.kind {
        ModelKind::ClassicMs => {
            let d = cfg.d.as_ref().expect("validated");
            let fm = build_friction_matrix(&cf, d)?;
            let inv = bott_duffin_classic(&fm)?;
            let delta_sqrt: Vec<f64> = (0..n)
                .map(|i| right.get(i).sqrt() - left.get(i).sqrt())
                .collect();
            let w = inv.matrix.matvec(&delta_sqrt);
            let flux: Vec<f64> = (0..n).map(|i| -2.0 * sf[i] * w[i] / dx).collect();
            // diag(√c)·A^BD·diag(1/√c) is similar to A^BD, so its spectrum —
            // which is what the explicit-Euler cap tracks — is bounded by the
            // largest eigenvalue of A^BD even at vacuum faces.
            Ok((flux, inv.max_inverse()))
        }
        ModelKind::Pvd | ModelKind::PorousMedium => {
            let d = cfg.d.as_ref().expect("validated");
            // For these models the drag matrix itself is the inverted
            // coupling matrix of the flux law.
            let bbd = build_friction_matrix(&cf, d)?.matrix;
            generalized_flux(field, cfg, k, &cf, &sf, &bbd)
        }
        ModelKind::MolarMass => {
            let masses = match &cfg.model.params {
                ModelParams::MolarMass { masses } => masses,
                _ => unreachable!(),
            };
            let a_tilde = molar_mass_friction(&cf, masses)?;
            let bbd = bott_duffin(&a_tilde, &cf)?.matrix;
            generalized_flux(field, cfg, k, &cf, &sf, &bbd)
        }
        ModelKind::Tumor => Err(SolverError::UnsupportedModel("tumor")),
    }
}

fn generalized_flux(
    field: &Field,
    cfg: &SolverConfig,
    k: usize,
    cf: &Composition,
    sf: &[f64],
    bbd: &Mat,
) -> Result<(Vec<f64>, f64), SolverError> {
    let n = field.n();
    let dx = field.grid().dx();
    let left = field.cell(k);
    let right = field.cell(k + 1);
    let mut weighted = vec![0.0; n];
    for j in 0..n {
        let model = &cfg.model.entropies[j];
        for (side, &v) in [left[j], right[j]].iter().enumerate() {
            if v < GENERALIZED_STATE_FLOOR {
                return Err(SolverError::VacuumState {
                    cell: k + side,
                    value: v,
                    floor: GENERALIZED_STATE_FLOOR,
                });
            }
        }
        let dh = model.h_prime(right[j])? - model.h_prime(left[j])?;
        weighted[j] = sf[j] * dh / dx;
    }
    let w = bbd.matvec(&weighted);
    let flux: Vec<f64> = (0..n).map(|i| -sf[i] * w[i]).collect();
    // Stiffness scale: ‖diag(√c)·B^BD·diag(√c)·diag(h″)‖₂ at the face.
    let mut curv = vec![0.0; n];
    for j in 0..n {
        curv[j] = cfg.model.entropies[j].h_second(cf.get(j).max(GENERALIZED_STATE_FLOOR))?;
    }
    let mut scaled = bbd.diag_scale(sf, sf);
    for i in 0..n {
        for j in 0..n {
            let v = scaled.get(i, j) * curv[j];
            scaled.set(i, j, v);
        }
    }
    let lambda = scaled.spectral_norm().map_err(SimplexError::from)?;
    Ok((flux, lambda))
}

/// Numerical flux vector at face `f` (0 and `cells` are the boundary faces,
/// which carry zero flux).
pub fn face_flux(field: &Field, cfg: &SolverConfig, f: usize) -> Result<Vec<f64>, SolverError> {
    cfg.validate()?;
    assert!(f <= field.grid().cells());
    if f == 0 || f == field.grid().cells() {
        return Ok(vec![0.0; field.n()]);
    }
    Ok(face_quantities(field, cfg, f - 1)?.0)
}

fn assemble_fluxes(field: &Field, cfg: &SolverConfig) -> Result<FluxAssembly, SolverError> {
    let n = field.n();
    let cells = field.grid().cells();
    let mut fluxes = vec![0.0; (cells + 1) * n];
    let mut lambda_hat = 0.0f64;
    for k in 0..cells - 1 {
        let (flux, lambda) = face_quantities(field, cfg, k)?;
        fluxes[(k + 1) * n..(k + 2) * n].copy_from_slice(&flux);
        lambda_hat = lambda_hat.max(lambda);
    }
    Ok(FluxAssembly { fluxes, lambda_hat })
}

/// Adaptive explicit-Euler stepper. Holds the trusted step size between
/// steps; rejections shrink it, accepted steps regrow it up to the
/// stability cap.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SolverConfig,
    dt: f64,
}

impl Stepper {
    pub fn new(cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let dt = cfg.dt_init;
        Ok(Stepper { cfg, dt })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Current trusted step size.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances the field by one accepted step of size at most `dt_cap`.
    ///
    /// Fluxes are assembled once (they do not depend on the step size);
    /// the rejection loop only re-validates the cheap explicit update.
    pub fn step(&mut self, field: &Field, dt_cap: f64) -> Result<(Field, StepReport), SolverError> {
        let assembly = assemble_fluxes(field, &self.cfg)?;
        let h_old = diagnostics::entropy(field, &self.cfg.model)?;
        let n = field.n();
        let cells = field.grid().cells();
        let dx = field.grid().dx();
        let floor = self.cfg.acceptance_floor();
        let stability_cap = if assembly.lambda_hat > 0.0 {
            self.cfg.safety * dx * dx / (2.0 * assembly.lambda_hat)
        } else {
            f64::INFINITY
        };

        let mut dt_att = self.dt.min(dt_cap);
        let mut rejects = 0usize;
        loop {
            let mut candidate = vec![0.0; cells * n];
            let mut ok = true;
            let mut min_c = f64::INFINITY;
            let mut sum_dev = 0.0f64;
            'cells: for k in 0..cells {
                let cell = field.cell(k);
                let mut sum = 0.0;
                for i in 0..n {
                    let div = (assembly.fluxes[(k + 1) * n + i] - assembly.fluxes[k * n + i]) / dx;
                    let v = cell[i] - dt_att * div;
                    if v < floor {
                        ok = false;
                        break 'cells;
                    }
                    candidate[k * n + i] = v;
                    min_c = min_c.min(v);
                    sum += v;
                }
                sum_dev = sum_dev.max((sum - 1.0).abs());
                if sum_dev > SUM_DEVIATION_LIMIT {
                    ok = false;
                    break 'cells;
                }
            }

            let mut accepted: Option<(Field, f64)> = None;
            if ok {
                // Store clamped cells (tiny classic-model undershoots go to 0).
                let mut data = Vec::with_capacity(cells * n);
                for k in 0..cells {
                    let comp = Composition::new(&candidate[k * n..(k + 1) * n])
                        .map_err(|source| SolverError::SimplexViolation { cell: k, source })?;
                    data.extend_from_slice(comp.values());
                }
                let next = Field::from_cells(field.grid(), n, data, field.time() + dt_att);
                let h_new = diagnostics::entropy(&next, &self.cfg.model)?;
                if h_new <= h_old + self.cfg.entropy_tolerance {
                    accepted = Some((next, h_new));
                }
            }

            if let Some((next, h_new)) = accepted {
                let grown = if rejects > 0 { dt_att * DT_GROWTH } else { self.dt * DT_GROWTH };
                self.dt = grown.min(stability_cap);
                let report = StepReport {
                    dt_used: dt_att,
                    rejected_count: rejects,
                    min_c,
                    sum_deviation_max: sum_dev,
                    entropy_change: h_new - h_old,
                };
                return Ok((next, report));
            }

            rejects += 1;
            if rejects > self.cfg.max_rejects {
                return Err(SolverError::StepStalled { time: field.time(), rejects });
            }
            dt_att *= 0.5;
            self.dt = dt_att;
        }
    }
}

/// A completed integration: snapshots at the requested times plus per-step
/// reports.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Snapshots at `t_j = j·t_end/stride` for `j = 0..=stride`, each with
    /// its time assigned exactly.
    pub snapshots: Vec<Field>,
    /// Step size used by the step that landed on each snapshot (0 for the
    /// initial snapshot).
    pub snapshot_dts: Vec<f64>,
    /// One report per accepted step, in order.
    pub reports: Vec<StepReport>,
}

/// Integrates `initial` to `t_end`, snapshotting at `stride` equal time
/// intervals (each hit exactly by clipping the final step into it).
pub fn run(cfg: &SolverConfig, initial: &Field, stride: usize) -> Result<Trajectory, SolverError> {
    let mut stepper = Stepper::new(cfg.clone())?;
    if cfg.is_generalized() {
        for k in 0..initial.grid().cells() {
            for &v in initial.cell(k) {
                if v < GENERALIZED_STATE_FLOOR {
                    return Err(SolverError::VacuumState {
                        cell: k,
                        value: v,
                        floor: GENERALIZED_STATE_FLOOR,
                    });
                }
            }
        }
    }
    let mut snapshots = vec![initial.clone()];
    let mut snapshot_dts = vec![0.0];
    let mut reports = Vec::new();
    if cfg.t_end == 0.0 {
        return Ok(Trajectory { snapshots, snapshot_dts, reports });
    }
    let stride = stride.max(1);
    let mut current = initial.clone();
    for j in 1..=stride {
        let target = j as f64 * cfg.t_end / stride as f64;
        let mut last_dt = 0.0;
        while current.time() < target {
            let remaining = target - current.time();
            let (next, report) = stepper.step(&current, remaining)?;
            last_dt = report.dt_used;
            let arrived = report.dt_used >= remaining;
            current = next;
            reports.push(report);
            if arrived {
                // Assign the snapshot time exactly (accumulation would end a
                // hair off target).
                current.time = target;
            }
        }
        snapshots.push(current.clone());
        snapshot_dts.push(last_dt);
    }
    Ok(Trajectory { snapshots, snapshot_dts, reports })
}

/// Adds a zero-sum perturbation `ε·φ` to a strictly interior reference
/// field: `φ` is the given per-species profile minus its species mean at
/// each point, which keeps every cell sum exactly 1.
///
/// Requires `min c ≥ 2·ε·‖mode‖∞` so the result cannot exit the simplex.
/// `ε = 0` returns the reference unchanged.
pub fn perturb_initial(
    reference: &Field,
    epsilon: f64,
    mode: impl Fn(f64, usize) -> f64,
) -> Result<Field, SolverError> {
    if epsilon == 0.0 {
        return Ok(reference.clone());
    }
    let n = reference.n();
    let cells = reference.grid().cells();
    let mut raw = vec![0.0; cells * n];
    let mut sup: f64 = 0.0;
    for k in 0..cells {
        let x = reference.grid().center(k);
        for i in 0..n {
            let v = mode(x, i);
            raw[k * n + i] = v;
            sup = sup.max(v.abs());
        }
    }
    let required = 2.0 * epsilon.abs() * sup;
    for k in 0..cells {
        for &v in reference.cell(k) {
            if v < required {
                return Err(SolverError::ReferenceNotInterior { cell: k, value: v, required });
            }
        }
    }
    let mut data = Vec::with_capacity(cells * n);
    for k in 0..cells {
        let mean = raw[k * n..(k + 1) * n].iter().sum::<f64>() / n as f64;
        let cell: Vec<f64> = (0..n)
            .map(|i| reference.cell(k)[i] + epsilon * (raw[k * n + i] - mean))
            .collect();
        let comp = Composition::new(&cell)
            .map_err(|_| SolverError::PerturbationExitsSimplex { cell: k })?;
        data.extend_from_slice(comp.values());
    }
    Ok(Field::from_cells(reference.grid(), n, data, reference.time()))
}
