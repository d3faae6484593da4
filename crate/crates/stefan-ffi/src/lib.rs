//! C ABI for the cross-diffusion toolkit: stateless linear-algebra kernels
//! plus an opaque simulation handle driven step by step.
//!
//! Conventions shared by every function:
//!
//! - matrices are dense row-major `n × n` buffers;
//! - compositions are length-`n` buffers of simplex volume fractions
//!   (nonnegative, summing to 1);
//! - drag coefficients are the strict upper triangle in row order
//!   `(0,1), (0,2), …, (n−2,n−1)`, a length `n(n−1)/2` buffer;
//! - simulation states are cell-major: species `i` of cell `k` lives at
//!   index `k·n + i`;
//! - every pointer argument is null-checked; a null yields
//!   `STEFAN_STATUS_NULL_POINTER` and nothing is written;
//! - after any status other than OK or FINISHED,
//!   [`stefan_last_error_message`] returns a human-readable description.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use stefan::config::parse_config;
use stefan::diagnostics;
use stefan::mat::{Mat, MAX_DIM};
use stefan::simplex::{
    bott_duffin, build_friction_matrix, invert_fluxes, projectors, Composition, DiffusionTable,
    SimplexError,
};
use stefan::solver::{Field, Stepper, GENERALIZED_STATE_FLOOR};

/// Outcome of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StefanStatus {
    /// The call succeeded.
    Ok = 0,
    /// The simulation already reached its time horizon; the state is
    /// unchanged.
    Finished = 1,
    /// A required pointer argument was null.
    NullPointer = 2,
    /// An argument violated a precondition (dimension, simplex constraint,
    /// matrix structure, buffer length).
    InvalidArgument = 3,
    /// The configuration text failed to parse or validate.
    InvalidConfig = 4,
    /// A numerical procedure failed (eigensolver, singular system, stalled
    /// time step).
    NumericalFailure = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NUL bytes stripped above");
    });
}

/// Returns the description of the most recent failure on the calling
/// thread, or an empty string if none occurred yet.
///
/// The pointer stays valid until the next failing call on the same thread;
/// do not free it.
#[no_mangle]
pub extern "C" fn stefan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Returns the library version as a static NUL-terminated string.
/// Do not free it.
#[no_mangle]
pub extern "C" fn stefan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn check_dim(n: usize) -> Result<(), StefanStatus> {
    if !(2..=MAX_DIM).contains(&n) {
        set_last_error(format!("species count must lie in [2, {MAX_DIM}], got {n}"));
        return Err(StefanStatus::InvalidArgument);
    }
    Ok(())
}

fn simplex_status(e: &SimplexError) -> StefanStatus {
    match e {
        SimplexError::SingularSystem { .. } | SimplexError::Linalg(_) => {
            StefanStatus::NumericalFailure
        }
        _ => StefanStatus::InvalidArgument,
    }
}

fn fail(status: StefanStatus, message: impl std::fmt::Display) -> StefanStatus {
    set_last_error(message);
    status
}

/// Builds the friction (drag) coupling matrix of a composition: diagonal
/// `Σ_{k≠i} c_k/D_ik`, off-diagonal `−√(c_i c_j)/D_ij`. Writes `n·n`
/// doubles to `out`.
///
/// # Safety
/// `composition` must point to `n` readable doubles, `d_upper` to
/// `n(n−1)/2`, and `out` to `n·n` writable doubles; the ranges must not
/// overlap `out`.
#[no_mangle]
pub unsafe extern "C" fn stefan_friction_matrix(
    n: usize,
    composition: *const f64,
    d_upper: *const f64,
    out: *mut f64,
) -> StefanStatus {
    if composition.is_null() || d_upper.is_null() || out.is_null() {
        return StefanStatus::NullPointer;
    }
    if let Err(status) = check_dim(n) {
        return status;
    }
    let c = std::slice::from_raw_parts(composition, n);
    let d = std::slice::from_raw_parts(d_upper, n * (n - 1) / 2);
    let c = match Composition::new(c) {
        Ok(c) => c,
        Err(e) => return fail(simplex_status(&e), e),
    };
    let d = match DiffusionTable::from_upper_triangle(n, d) {
        Ok(d) => d,
        Err(e) => return fail(simplex_status(&e), e),
    };
    match build_friction_matrix(&c, &d) {
        Ok(fm) => {
            write_matrix(&fm.matrix, out);
            StefanStatus::Ok
        }
        Err(e) => fail(simplex_status(&e), e),
    }
}

/// Writes the orthogonal projector onto the flux subspace (the orthogonal
/// complement of `√c`) as `n·n` doubles.
///
/// # Safety
/// `composition` must point to `n` readable doubles and `out` to `n·n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn stefan_projector(
    n: usize,
    composition: *const f64,
    out: *mut f64,
) -> StefanStatus {
    if composition.is_null() || out.is_null() {
        return StefanStatus::NullPointer;
    }
    if let Err(status) = check_dim(n) {
        return status;
    }
    let c = std::slice::from_raw_parts(composition, n);
    match Composition::new(c) {
        Ok(c) => {
            write_matrix(&projectors(&c).p_l, out);
            StefanStatus::Ok
        }
        Err(e) => fail(simplex_status(&e), e),
    }
}

/// Computes the constrained (Bott–Duffin) inverse of a symmetric positive
/// semidefinite `n × n` matrix whose kernel is spanned by `√c`. Writes
/// `n·n` doubles to `out`.
///
/// # Safety
/// `composition` must point to `n` readable doubles, `matrix` to `n·n`,
/// and `out` to `n·n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn stefan_bott_duffin(
    n: usize,
    composition: *const f64,
    matrix: *const f64,
    out: *mut f64,
) -> StefanStatus {
    if composition.is_null() || matrix.is_null() || out.is_null() {
        return StefanStatus::NullPointer;
    }
    if let Err(status) = check_dim(n) {
        return status;
    }
    let c = std::slice::from_raw_parts(composition, n);
    let raw = std::slice::from_raw_parts(matrix, n * n);
    let c = match Composition::new(c) {
        Ok(c) => c,
        Err(e) => return fail(simplex_status(&e), e),
    };
    let m = Mat::from_fn(n, |i, j| raw[i * n + j]);
    match bott_duffin(&m, &c) {
        Ok(inv) => {
            write_matrix(&inv.matrix, out);
            StefanStatus::Ok
        }
        Err(e) => fail(simplex_status(&e), e),
    }
}

/// Solves the singular force–flux relation for a composition and the
/// gradient of `√c` (which must be orthogonal to `√c`): writes the `n`
/// flux components to `out_fluxes`.
///
/// # Safety
/// `composition` and `grad_sqrt_c` must each point to `n` readable
/// doubles, `d_upper` to `n(n−1)/2`, and `out_fluxes` to `n` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn stefan_invert_fluxes(
    n: usize,
    composition: *const f64,
    d_upper: *const f64,
    grad_sqrt_c: *const f64,
    out_fluxes: *mut f64,
) -> StefanStatus {
    if composition.is_null() || d_upper.is_null() || grad_sqrt_c.is_null() || out_fluxes.is_null()
    {
        return StefanStatus::NullPointer;
    }
    if let Err(status) = check_dim(n) {
        return status;
    }
    let c = std::slice::from_raw_parts(composition, n);
    let d = std::slice::from_raw_parts(d_upper, n * (n - 1) / 2);
    let g = std::slice::from_raw_parts(grad_sqrt_c, n);
    let c = match Composition::new(c) {
        Ok(c) => c,
        Err(e) => return fail(simplex_status(&e), e),
    };
    let d = match DiffusionTable::from_upper_triangle(n, d) {
        Ok(d) => d,
        Err(e) => return fail(simplex_status(&e), e),
    };
    match invert_fluxes(&c, g, &d) {
        Ok(fluxes) => {
            std::ptr::copy_nonoverlapping(fluxes.as_ptr(), out_fluxes, n);
            StefanStatus::Ok
        }
        Err(e) => fail(simplex_status(&e), e),
    }
}

/// Writes the certified eigenvalue floors of a drag-coefficient table:
/// `out_mu` receives the lower bound for the nonzero eigenvalues of the
/// friction matrix, `out_lambda` the one for its constrained inverse.
///
/// # Safety
/// `d_upper` must point to `n(n−1)/2` readable doubles; `out_mu` and
/// `out_lambda` must each point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn stefan_spectral_floors(
    n: usize,
    d_upper: *const f64,
    out_mu: *mut f64,
    out_lambda: *mut f64,
) -> StefanStatus {
    if d_upper.is_null() || out_mu.is_null() || out_lambda.is_null() {
        return StefanStatus::NullPointer;
    }
    if let Err(status) = check_dim(n) {
        return status;
    }
    let d = std::slice::from_raw_parts(d_upper, n * (n - 1) / 2);
    match DiffusionTable::from_upper_triangle(n, d) {
        Ok(table) => {
            *out_mu = table.drag_eigenvalue_floor();
            *out_lambda = table.inverse_eigenvalue_floor();
            StefanStatus::Ok
        }
        Err(e) => fail(simplex_status(&e), e),
    }
}

unsafe fn write_matrix(m: &Mat, out: *mut f64) {
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            *out.add(i * n + j) = m.get(i, j);
        }
    }
}

/// An initialized simulation: entropy-stable finite-volume evolution of a
/// composition field, created from configuration text and advanced in
/// adaptive steps. Obtain via [`stefan_sim_new`], release via
/// [`stefan_sim_free`].
pub struct StefanSim {
    stepper: Stepper,
    field: Field,
    done: bool,
}

impl StefanSim {
    fn from_config_text(text: &str) -> Result<StefanSim, (StefanStatus, String)> {
        let config_err = |e: &dyn std::fmt::Display| (StefanStatus::InvalidConfig, e.to_string());
        let cfg = parse_config(text).map_err(|e| config_err(&e))?;
        let solver_cfg = cfg.solver_config().map_err(|e| config_err(&e))?;
        let field = cfg.initial_field().map_err(|e| config_err(&e))?;
        if solver_cfg.is_generalized() {
            for k in 0..field.grid().cells() {
                for &v in field.cell(k) {
                    if v < GENERALIZED_STATE_FLOOR {
                        return Err((
                            StefanStatus::InvalidConfig,
                            format!(
                                "cell {k}: initial state {v:e} below the generalized-model \
                                 floor {GENERALIZED_STATE_FLOOR:e}"
                            ),
                        ));
                    }
                }
            }
        }
        let done = solver_cfg.t_end <= 0.0;
        let stepper = Stepper::new(solver_cfg).map_err(|e| config_err(&e))?;
        Ok(StefanSim { stepper, field, done })
    }

    /// One accepted step toward `target`; reports whether it arrived.
    fn one_step(&mut self, target: f64) -> Result<bool, StefanStatus> {
        let remaining = target - self.field.time();
        let (next, report) = self
            .stepper
            .step(&self.field, remaining)
            .map_err(|e| fail(StefanStatus::NumericalFailure, e))?;
        self.field = next;
        Ok(report.dt_used >= remaining)
    }
}

/// Creates a simulation from NUL-terminated configuration text (the same
/// flat `key = value` format the command-line tool reads) and stores the
/// handle in `out_sim`. On failure `out_sim` receives null.
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string; `out_sim` must
/// point to one writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_new(
    config_text: *const c_char,
    out_sim: *mut *mut StefanSim,
) -> StefanStatus {
    if config_text.is_null() || out_sim.is_null() {
        return StefanStatus::NullPointer;
    }
    *out_sim = std::ptr::null_mut();
    let text = match CStr::from_ptr(config_text).to_str() {
        Ok(text) => text,
        Err(e) => return fail(StefanStatus::InvalidArgument, format!("config text: {e}")),
    };
    match StefanSim::from_config_text(text) {
        Ok(sim) => {
            *out_sim = Box::into_raw(Box::new(sim));
            StefanStatus::Ok
        }
        Err((status, message)) => fail(status, message),
    }
}

/// Releases a simulation handle. A null handle is ignored.
///
/// # Safety
/// `sim` must be a handle returned by [`stefan_sim_new`] that has not been
/// freed yet, or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_free(sim: *mut StefanSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances the simulation by one accepted adaptive step (capped so the
/// time horizon is never overshot). Returns FINISHED once the horizon is
/// reached.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`].
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_step(sim: *mut StefanSim) -> StefanStatus {
    let Some(sim) = sim.as_mut() else {
        return StefanStatus::NullPointer;
    };
    if sim.done {
        return StefanStatus::Finished;
    }
    let t_end = sim.stepper.config().t_end;
    match sim.one_step(t_end) {
        Ok(arrived) => {
            sim.done = arrived;
            StefanStatus::Ok
        }
        Err(status) => status,
    }
}

/// Advances the simulation to `t_target` (clamped to the time horizon),
/// taking as many accepted steps as needed. A target at or before the
/// current time is a no-op.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`].
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_advance(sim: *mut StefanSim, t_target: f64) -> StefanStatus {
    let Some(sim) = sim.as_mut() else {
        return StefanStatus::NullPointer;
    };
    if t_target.is_nan() {
        return fail(StefanStatus::InvalidArgument, "target time is NaN");
    }
    let t_end = sim.stepper.config().t_end;
    let target = t_target.min(t_end);
    if sim.done || target <= sim.field.time() {
        return if sim.done { StefanStatus::Finished } else { StefanStatus::Ok };
    }
    loop {
        match sim.one_step(target) {
            Ok(arrived) => {
                if arrived {
                    if target >= t_end {
                        sim.done = true;
                    }
                    return StefanStatus::Ok;
                }
            }
            Err(status) => return status,
        }
    }
}

/// Current simulation time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_time(sim: *const StefanSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |sim| sim.field.time())
}

/// The simulation's time horizon, or NaN for a null handle.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_t_end(sim: *const StefanSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |sim| sim.stepper.config().t_end)
}

/// The step size the adaptive controller currently trusts, or NaN for a
/// null handle.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_dt(sim: *const StefanSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |sim| sim.stepper.dt())
}

/// Number of grid cells, or 0 for a null handle.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_cells(sim: *const StefanSim) -> usize {
    sim.as_ref().map_or(0, |sim| sim.field.grid().cells())
}

/// Number of species, or 0 for a null handle.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`], or null.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_species(sim: *const StefanSim) -> usize {
    sim.as_ref().map_or(0, |sim| sim.field.n())
}

/// Copies the current state into `out`: `cells · species` doubles,
/// cell-major. `len` must equal that product exactly.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
/// to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_state(
    sim: *const StefanSim,
    out: *mut f64,
    len: usize,
) -> StefanStatus {
    let Some(sim) = sim.as_ref() else {
        return StefanStatus::NullPointer;
    };
    if out.is_null() {
        return StefanStatus::NullPointer;
    }
    let expected = sim.field.grid().cells() * sim.field.n();
    if len != expected {
        return fail(
            StefanStatus::InvalidArgument,
            format!("state buffer holds {len} doubles, need exactly {expected}"),
        );
    }
    std::ptr::copy_nonoverlapping(sim.field.data().as_ptr(), out, expected);
    StefanStatus::Ok
}

/// Copies the per-species masses (composition integrated over the domain)
/// into `out`. `len` must equal the species count.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
/// to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_masses(
    sim: *const StefanSim,
    out: *mut f64,
    len: usize,
) -> StefanStatus {
    let Some(sim) = sim.as_ref() else {
        return StefanStatus::NullPointer;
    };
    if out.is_null() {
        return StefanStatus::NullPointer;
    }
    let n = sim.field.n();
    if len != n {
        return fail(
            StefanStatus::InvalidArgument,
            format!("mass buffer holds {len} doubles, need exactly {n}"),
        );
    }
    let masses = sim.field.species_masses();
    std::ptr::copy_nonoverlapping(masses.as_ptr(), out, n);
    StefanStatus::Ok
}

/// Writes the current total entropy of the state to `out`.
///
/// # Safety
/// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
/// to one writable double.
#[no_mangle]
pub unsafe extern "C" fn stefan_sim_entropy(
    sim: *const StefanSim,
    out: *mut f64,
) -> StefanStatus {
    let Some(sim) = sim.as_ref() else {
        return StefanStatus::NullPointer;
    };
    if out.is_null() {
        return StefanStatus::NullPointer;
    }
    match diagnostics::entropy(&sim.field, &sim.stepper.config().model) {
        Ok(h) => {
            *out = h;
            StefanStatus::Ok
        }
        Err(e) => fail(StefanStatus::NumericalFailure, e),
    }
}
