//! Structure-preserving numerics for Maxwell–Stefan and generalized
//! cross-diffusion systems.
//!
//! The toolkit covers three layers:
//!
//! - **Singular linear algebra on the simplex** ([`simplex`], [`mat`]):
//!   force–flux coupling matrices with kernel `span{√c}`, their constrained
//!   (Bott–Duffin) inverses, and spectral certificates with closed-form
//!   eigenvalue floors.
//! - **Thermodynamic models** ([`thermo`]): per-species free energies and
//!   pressures for the five bundled models, plus structural audits of the
//!   convexity and coupling-matrix assumptions the theory rests on.
//! - **Entropy-stable evolution** ([`solver`], [`diagnostics`]): a 1-D
//!   cell-centered finite-volume scheme with adaptive explicit time stepping
//!   that preserves positivity, the simplex constraint, and a discrete
//!   entropy inequality, with diagnostics that certify dissipation
//!   identities, velocity bounds, and relative-entropy (weak–strong
//!   stability) scaling.
//!
//! The `stefan` binary exposes runs, verification suites, parameter sweeps,
//! and model audits over a flat `key = value` configuration format; see the
//! repository README for the CLI contract.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod mat;
pub mod output;
pub mod rng;
pub mod simplex;
pub mod solver;
pub mod sweep;
pub mod thermo;
pub mod verify;
