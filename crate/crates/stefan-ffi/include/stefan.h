#ifndef STEFAN_H
#define STEFAN_H

/* Generated by cbindgen from the stefan-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a C API call.
typedef enum StefanStatus {
  // The call succeeded.
  STEFAN_STATUS_OK = 0,
  // The simulation already reached its time horizon; the state is
  // unchanged.
  STEFAN_STATUS_FINISHED = 1,
  // A required pointer argument was null.
  STEFAN_STATUS_NULL_POINTER = 2,
  // An argument violated a precondition (dimension, simplex constraint,
  // matrix structure, buffer length).
  STEFAN_STATUS_INVALID_ARGUMENT = 3,
  // The configuration text failed to parse or validate.
  STEFAN_STATUS_INVALID_CONFIG = 4,
  // A numerical procedure failed (eigensolver, singular system, stalled
  // time step).
  STEFAN_STATUS_NUMERICAL_FAILURE = 5,
} StefanStatus;

// An initialized simulation: entropy-stable finite-volume evolution of a
// composition field, created from configuration text and advanced in
// adaptive steps. Obtain via [`stefan_sim_new`], release via
// [`stefan_sim_free`].
typedef struct StefanSim StefanSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the description of the most recent failure on the calling
// thread, or an empty string if none occurred yet.
//
// The pointer stays valid until the next failing call on the same thread;
// do not free it.
const char *stefan_last_error_message(void);

// Returns the library version as a static NUL-terminated string.
// Do not free it.
const char *stefan_version(void);

// Builds the friction (drag) coupling matrix of a composition: diagonal
// `Σ_{k≠i} c_k/D_ik`, off-diagonal `−√(c_i c_j)/D_ij`. Writes `n·n`
// doubles to `out`.
//
// # Safety
// `composition` must point to `n` readable doubles, `d_upper` to
// `n(n−1)/2`, and `out` to `n·n` writable doubles; the ranges must not
// overlap `out`.
enum StefanStatus stefan_friction_matrix(size_t n,
                                         const double *composition,
                                         const double *d_upper,
                                         double *out);

// Writes the orthogonal projector onto the flux subspace (the orthogonal
// complement of `√c`) as `n·n` doubles.
//
// # Safety
// `composition` must point to `n` readable doubles and `out` to `n·n`
// writable doubles.
enum StefanStatus stefan_projector(size_t n, const double *composition, double *out);

// Computes the constrained (Bott–Duffin) inverse of a symmetric positive
// semidefinite `n × n` matrix whose kernel is spanned by `√c`. Writes
// `n·n` doubles to `out`.
//
// # Safety
// `composition` must point to `n` readable doubles, `matrix` to `n·n`,
// and `out` to `n·n` writable doubles.
enum StefanStatus stefan_bott_duffin(size_t n,
                                     const double *composition,
                                     const double *matrix,
                                     double *out);

// Solves the singular force–flux relation for a composition and the
// gradient of `√c` (which must be orthogonal to `√c`): writes the `n`
// flux components to `out_fluxes`.
//
// # Safety
// `composition` and `grad_sqrt_c` must each point to `n` readable
// doubles, `d_upper` to `n(n−1)/2`, and `out_fluxes` to `n` writable
// doubles.
enum StefanStatus stefan_invert_fluxes(size_t n,
                                       const double *composition,
                                       const double *d_upper,
                                       const double *grad_sqrt_c,
                                       double *out_fluxes);

// Writes the certified eigenvalue floors of a drag-coefficient table:
// `out_mu` receives the lower bound for the nonzero eigenvalues of the
// friction matrix, `out_lambda` the one for its constrained inverse.
//
// # Safety
// `d_upper` must point to `n(n−1)/2` readable doubles; `out_mu` and
// `out_lambda` must each point to one writable double.
enum StefanStatus stefan_spectral_floors(size_t n,
                                         const double *d_upper,
                                         double *out_mu,
                                         double *out_lambda);

// Creates a simulation from NUL-terminated configuration text (the same
// flat `key = value` format the command-line tool reads) and stores the
// handle in `out_sim`. On failure `out_sim` receives null.
//
// # Safety
// `config_text` must be a valid NUL-terminated string; `out_sim` must
// point to one writable pointer slot.
enum StefanStatus stefan_sim_new(const char *config_text, struct StefanSim **out_sim);

// Releases a simulation handle. A null handle is ignored.
//
// # Safety
// `sim` must be a handle returned by [`stefan_sim_new`] that has not been
// freed yet, or null.
void stefan_sim_free(struct StefanSim *sim);

// Advances the simulation by one accepted adaptive step (capped so the
// time horizon is never overshot). Returns FINISHED once the horizon is
// reached.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`].
enum StefanStatus stefan_sim_step(struct StefanSim *sim);

// Advances the simulation to `t_target` (clamped to the time horizon),
// taking as many accepted steps as needed. A target at or before the
// current time is a no-op.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`].
enum StefanStatus stefan_sim_advance(struct StefanSim *sim, double t_target);

// Current simulation time, or NaN for a null handle.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`], or null.
double stefan_sim_time(const struct StefanSim *sim);

// The simulation's time horizon, or NaN for a null handle.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`], or null.
double stefan_sim_t_end(const struct StefanSim *sim);

// The step size the adaptive controller currently trusts, or NaN for a
// null handle.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`], or null.
double stefan_sim_dt(const struct StefanSim *sim);

// Number of grid cells, or 0 for a null handle.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`], or null.
size_t stefan_sim_cells(const struct StefanSim *sim);

// Number of species, or 0 for a null handle.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`], or null.
size_t stefan_sim_species(const struct StefanSim *sim);

// Copies the current state into `out`: `cells · species` doubles,
// cell-major. `len` must equal that product exactly.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
// to `len` writable doubles.
enum StefanStatus stefan_sim_state(const struct StefanSim *sim, double *out, size_t len);

// Copies the per-species masses (composition integrated over the domain)
// into `out`. `len` must equal the species count.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
// to `len` writable doubles.
enum StefanStatus stefan_sim_masses(const struct StefanSim *sim, double *out, size_t len);

// Writes the current total entropy of the state to `out`.
//
// # Safety
// `sim` must be a live handle from [`stefan_sim_new`]; `out` must point
// to one writable double.
enum StefanStatus stefan_sim_entropy(const struct StefanSim *sim, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEFAN_H */
