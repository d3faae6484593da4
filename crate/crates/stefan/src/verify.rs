//! Self-contained verification suites: randomized and grid-based checks of
//! the spectral floors, the constrained inverse, the pointwise entropy
//! bounds, the velocity bound, and the dissipation lower bound.
//!
//! Each suite draws its own deterministic sample stream from a fixed
//! default seed, counts failures, and reports the worst margin it saw (the
//! smallest certified slack; negative beyond the suite tolerance means
//! failure). A `distortion` parameter lowers every computed margin by
//! `distortion · (1 + |margin|)` — at 1.0 this emulates a sign-flip-sized
//! defect at every case, the mutant-mode hook tests use to prove each suite
//! can detect a corrupted build. Production callers pass `0.0`.

use crate::diagnostics::{
    dissipation_bound_constants, dissipation_lower_bound_check, velocity_bound_check,
};
use crate::mat::{norm_2, norm_inf, Mat};
use crate::rng::Rng;
use crate::simplex::{
    bott_duffin, build_friction_matrix, projectors, solve_constrained_oracle,
    spectral_certificate, Composition, DiffusionTable,
};
use crate::solver::{init_field, Field, Grid1D};
use crate::thermo::{
    entropy_quadratic_floor, molar_mass_friction, boltzmann_entropy, pointwise_bound_check,
    ModelSpec,
};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

/// Fixed default seed; every `stefan verify` invocation without an explicit
/// seed checks the same sample set.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// The six suite names, in execution order.
pub const SUITE_NAMES: [&str; 6] = [
    "spectral",
    "bott-duffin-oracle",
    "pointwise-bounds",
    "reciprocal-eigenvalue",
    "velocity-bound",
    "dissipation-lower-bound",
];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

/// Outcome of one suite: drawn cases, failures among them, and the smallest
/// margin observed (suite docs state what the margin measures).
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst_margin: f64,
}

/// Results of all executed suites.
#[derive(Debug, Clone)]
pub struct VerifySummary {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl VerifySummary {
    pub fn total_failures(&self) -> usize {
        self.suites.iter().map(|s| s.failures).sum()
    }

    pub fn pass(&self) -> bool {
        self.total_failures() == 0
    }

    /// One line per suite plus a final verdict line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            writeln!(
                out,
                "suite {:<24} {:>6} cases  {:>3} failures  worst margin {:+.3e}",
                s.name, s.cases, s.failures, s.worst_margin
            )
            .unwrap();
        }
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "verification: {verdict} ({} suites, {} failures, seed {})",
            self.suites.len(),
            self.total_failures(),
            self.seed
        )
        .unwrap();
        out
    }
}

/// Accumulates cases with a uniform margin convention: a case passes iff
/// its margin (minus the mutant distortion) stays above `-tolerance`.
struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
    tolerance: f64,
    distortion: f64,
}

impl Tally {
    fn new(tolerance: f64, distortion: f64) -> Self {
        Tally { cases: 0, failures: 0, worst: f64::INFINITY, tolerance, distortion }
    }

    fn case(&mut self, margin: f64) {
        let margin = margin - self.distortion * (1.0 + margin.abs());
        self.cases += 1;
        self.worst = self.worst.min(margin);
        if !(margin >= -self.tolerance) {
            self.failures += 1;
        }
    }

    /// A draw that errored out counts as a failed case.
    fn error_case(&mut self) {
        self.cases += 1;
        self.failures += 1;
        self.worst = f64::NEG_INFINITY;
    }

    fn finish(self, name: &'static str) -> SuiteResult {
        let worst = if self.cases == 0 { 0.0 } else { self.worst };
        SuiteResult { name, cases: self.cases, failures: self.failures, worst_margin: worst }
    }
}

/// Spectral floors on random drag systems: 1000 draws over `n ∈ 2..=6` and
/// `D_ij ∈ [0.1, 10]` with boundary-biased compositions. Margin: smallest
/// distance of a nonzero eigenvalue above its closed-form floor.
fn suite_spectral(seed: u64, distortion: f64) -> SuiteResult {
    let mut rng = Rng::new(seed);
    let mut tally = Tally::new(1e-9, distortion);
    for draw in 0..1000 {
        let n = 2 + draw % 5;
        let c = Composition::new(&rng.boundary_biased_composition(n)).unwrap();
        let upper: Vec<f64> =
            (0..n * (n - 1) / 2).map(|_| rng.uniform(0.1, 10.0)).collect();
        let table = DiffusionTable::from_upper_triangle(n, &upper).unwrap();
        match build_friction_matrix(&c, &table).and_then(|fm| spectral_certificate(&fm)) {
            Ok(cert) => {
                let margin = (cert.min_nonzero_forward - cert.mu)
                    .min(cert.min_nonzero_inverse - cert.lambda);
                tally.case(margin);
            }
            Err(_) => tally.error_case(),
        }
    }
    tally.finish("spectral")
}

/// Random symmetric PSD matrix with kernel exactly `span{√c}`:
/// `P_L (GᵀG + ridge·I) P_L`, symmetrized.
fn random_psd_with_kernel(rng: &mut Rng, c: &Composition) -> Mat {
    let n = c.n();
    let g = Mat::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
    let core = g.transpose().matmul(&g).add(&Mat::identity(n).scale(0.1));
    let p = projectors(c);
    let m = p.p_l.matmul(&core).matmul(&p.p_l);
    m.add(&m.transpose()).scale(0.5)
}

/// Constrained inversion against the independent single-solve oracle:
/// 500 random PSD matrices with the right kernel. Margin: smallest slack of
/// (a) forward–inverse residual under 1e-10 for a unit right-hand side in
/// the flux subspace, (b) the inverse annihilating `√c` under 1e-12, and
/// (c) agreement with the oracle solution under 1e-10.
fn suite_bott_duffin_oracle(seed: u64, distortion: f64) -> SuiteResult {
    let mut rng = Rng::new(seed);
    let mut tally = Tally::new(0.0, distortion);
    for draw in 0..500 {
        let n = 2 + draw % 5;
        let c = Composition::new(&rng.interior_composition(n, 1e-3)).unwrap();
        let m = random_psd_with_kernel(&mut rng, &c);
        let outcome = (|| -> Result<f64, crate::simplex::SimplexError> {
            let inv = bott_duffin(&m, &c)?;
            // Unit right-hand side inside the flux subspace.
            let p = projectors(&c);
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mut b = p.p_l.matvec(&raw);
            let norm = norm_2(&b).max(1e-300);
            for v in b.iter_mut() {
                *v /= norm;
            }
            let x = inv.matrix.matvec(&b);
            let mx = m.matvec(&x);
            let forward_residual =
                norm_inf(&mx.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
            let sqrt_c = c.sqrt_values();
            let perp_norm = norm_2(&inv.matrix.matvec(&sqrt_c));
            let (oracle_x, _) = solve_constrained_oracle(&m, &c, &b)?;
            let oracle_dev =
                norm_inf(&x.iter().zip(&oracle_x).map(|(a, b)| a - b).collect::<Vec<_>>());
            Ok((1e-10 - forward_residual).min(1e-12 - perp_norm).min(1e-10 - oracle_dev))
        })();
        match outcome {
            Ok(margin) => tally.case(margin),
            Err(_) => tally.error_case(),
        }
    }
    tally.finish("bott-duffin-oracle")
}

/// Pointwise Boltzmann bounds on a 100×100 grid over `(0,1]²`, the
/// quadratic-floor constants `κ_m` for `m ∈ {0.1, 0.5, 1}`, and the floor
/// inequality `h(c|c̄) ≥ κ_m (c−c̄)²` over the same grid restricted to
/// `c̄ ≥ m`. Margin: smallest inequality slack (κ positivity enters as the
/// value of κ itself).
fn suite_pointwise_bounds(distortion: f64) -> SuiteResult {
    let mut tally = Tally::new(1e-12, distortion);
    let grid = 100usize;
    for i in 1..=grid {
        for j in 1..=grid {
            let c = i as f64 / grid as f64;
            let cbar = j as f64 / grid as f64;
            tally.case(pointwise_bound_check(c, cbar).margin);
        }
    }
    let model = boltzmann_entropy();
    for &m in &[0.1, 0.5, 1.0] {
        match entropy_quadratic_floor(&model, m) {
            Ok(kappa) => {
                tally.case(kappa);
                for i in 1..=grid {
                    for j in 1..=grid {
                        let c = i as f64 / grid as f64;
                        let cbar = j as f64 / grid as f64;
                        if cbar < m {
                            continue;
                        }
                        let lhs = model.relative_density(c, cbar).unwrap();
                        tally.case(lhs - kappa * (c - cbar) * (c - cbar));
                    }
                }
            }
            Err(_) => tally.error_case(),
        }
    }
    tally.finish("pointwise-bounds")
}

/// Reciprocal pairing of nonzero eigenvalues between a coupling matrix and
/// its constrained inverse: 200 drag systems (boundary-biased compositions)
/// and 200 mass-based systems. Margin: `1e-9 −` the worst relative deviation
/// of paired eigenvalue products from 1.
fn suite_reciprocal_eigenvalue(seed: u64, distortion: f64) -> SuiteResult {
    let mut rng = Rng::new(seed);
    let mut tally = Tally::new(0.0, distortion);
    for draw in 0..200 {
        let n = 2 + draw % 5;
        let c = Composition::new(&rng.boundary_biased_composition(n)).unwrap();
        let upper: Vec<f64> =
            (0..n * (n - 1) / 2).map(|_| rng.uniform(0.1, 10.0)).collect();
        let table = DiffusionTable::from_upper_triangle(n, &upper).unwrap();
        match build_friction_matrix(&c, &table).and_then(|fm| spectral_certificate(&fm)) {
            Ok(cert) => tally.case(1e-9 - cert.max_reciprocal_error),
            Err(_) => tally.error_case(),
        }
    }
    for draw in 0..200 {
        let n = 2 + draw % 5;
        let rho = Composition::new(&rng.interior_composition(n, 1e-3)).unwrap();
        let masses: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 3.0)).collect();
        let outcome = molar_mass_friction(&rho, &masses)
            .map_err(|_| ())
            .and_then(|m| bott_duffin(&m, &rho).map_err(|_| ()));
        match outcome {
            Ok(inv) => {
                let fwd = &inv.forward_eigenvalues;
                let back = &inv.inverse_eigenvalues;
                let mut worst: f64 = 0.0;
                for i in 1..fwd.len() {
                    let product = fwd[i] * back[fwd.len() - i];
                    worst = worst.max((product - 1.0).abs());
                }
                tally.case(1e-9 - worst);
            }
            Err(()) => tally.error_case(),
        }
    }
    tally.finish("reciprocal-eigenvalue")
}

/// A deterministic smooth strictly interior field from low cosine modes.
fn random_smooth_field(rng: &mut Rng, n: usize, cells: usize) -> Field {
    let grid = Grid1D::new(cells, 1.0).unwrap();
    let coeff: Vec<Vec<f64>> =
        (0..n).map(|_| (0..2).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
    // Zero-sum deviations scaled to keep every entry at least 1/(2n).
    let mut sup: f64 = 0.0;
    let raw = |x: f64, i: usize| -> f64 {
        (0..2).map(|k| coeff[i][k] * ((k as f64 + 1.0) * PI * x).cos()).sum()
    };
    for k in 0..cells {
        let x = grid.center(k);
        let mean = (0..n).map(|i| raw(x, i)).sum::<f64>() / n as f64;
        for i in 0..n {
            sup = sup.max((raw(x, i) - mean).abs());
        }
    }
    let scale = 0.5 / (n as f64) / sup.max(1e-12);
    init_field(grid, n, move |x| {
        let mean = (0..n).map(|i| raw(x, i)).sum::<f64>() / n as f64;
        (0..n).map(|i| 1.0 / n as f64 + scale * (raw(x, i) - mean)).collect()
    })
    .unwrap()
}

/// Velocity bound `Σ c_i|u_i|² ≤ (4/μ²)·Σ|∇√c_i|²` on 50 random smooth
/// fields with random drag tables. Margin: smallest face-wise `rhs − lhs`.
fn suite_velocity_bound(seed: u64, distortion: f64) -> SuiteResult {
    let mut rng = Rng::new(seed);
    let mut tally = Tally::new(1e-10, distortion);
    for draw in 0..50 {
        let n = 2 + draw % 2;
        let field = random_smooth_field(&mut rng, n, 32);
        let upper: Vec<f64> =
            (0..n * (n - 1) / 2).map(|_| rng.uniform(0.5, 2.0)).collect();
        let table = DiffusionTable::from_upper_triangle(n, &upper).unwrap();
        match velocity_bound_check(&field, &table) {
            Ok(worst) => tally.case(-worst),
            Err(_) => tally.error_case(),
        }
    }
    tally.finish("velocity-bound")
}

/// Away-from-vacuum dissipation lower bound with certified constants at
/// `m = 0.2`: 500 draws each for `n ∈ {2, 3}` of compositions bounded below
/// by `m/2` with random zero-sum gradients. Margin: `lhs − rhs`.
fn suite_dissipation_lower_bound(seed: u64, distortion: f64) -> SuiteResult {
    let mut rng = Rng::new(seed);
    let mut tally = Tally::new(1e-10, distortion);
    let m = 0.2;
    for n in [2usize, 3] {
        let model = ModelSpec::classic(n).unwrap();
        let table = DiffusionTable::uniform(n, 1.0).unwrap();
        let constants = match dissipation_bound_constants(
            &model,
            Some(&table),
            m,
            2000,
            seed.wrapping_add(n as u64),
        ) {
            Ok(k) => k,
            Err(_) => {
                tally.error_case();
                continue;
            }
        };
        for _ in 0..500 {
            let c = Composition::new(&rng.interior_composition(n, m / 2.0)).unwrap();
            let mut g: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mean = g.iter().sum::<f64>() / n as f64;
            for v in g.iter_mut() {
                *v -= mean;
            }
            match dissipation_lower_bound_check(&c, &g, &model, Some(&table), &constants) {
                Ok(bound) => tally.case(bound.lhs - bound.rhs),
                Err(_) => tally.error_case(),
            }
        }
    }
    tally.finish("dissipation-lower-bound")
}

/// Runs one suite by name.
pub fn run_suite(name: &str, seed: u64, distortion: f64) -> Result<SuiteResult, VerifyError> {
    let idx = SUITE_NAMES
        .iter()
        .position(|&s| s == name)
        .ok_or_else(|| VerifyError::UnknownSuite(name.to_string()))?;
    let suite_seed = seed.wrapping_add(idx as u64);
    Ok(match name {
        "spectral" => suite_spectral(suite_seed, distortion),
        "bott-duffin-oracle" => suite_bott_duffin_oracle(suite_seed, distortion),
        "pointwise-bounds" => suite_pointwise_bounds(distortion),
        "reciprocal-eigenvalue" => suite_reciprocal_eigenvalue(suite_seed, distortion),
        "velocity-bound" => suite_velocity_bound(suite_seed, distortion),
        "dissipation-lower-bound" => suite_dissipation_lower_bound(suite_seed, distortion),
        _ => unreachable!("name validated above"),
    })
}

/// Runs all suites, or only the named one. `distortion` is the mutant-mode
/// corruption; pass 0 for a faithful verification.
pub fn run_verification(
    filter: Option<&str>,
    seed: u64,
    distortion: f64,
) -> Result<VerifySummary, VerifyError> {
    let names: Vec<&str> = match filter {
        Some(name) => {
            if !SUITE_NAMES.contains(&name) {
                return Err(VerifyError::UnknownSuite(name.to_string()));
            }
            vec![SUITE_NAMES[SUITE_NAMES.iter().position(|&s| s == name).unwrap()]]
        }
        None => SUITE_NAMES.to_vec(),
    };
    let mut suites = Vec::new();
    for name in names {
        suites.push(run_suite(name, seed, distortion)?);
    }
    Ok(VerifySummary { seed, suites })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_without_distortion() {
        let summary = run_verification(None, DEFAULT_SEED, 0.0).unwrap();
        assert_eq!(summary.suites.len(), 6);
        for s in &summary.suites {
            assert_eq!(s.failures, 0, "suite {} failed: worst margin {}", s.name, s.worst_margin);
            assert!(s.cases > 0);
        }
        assert!(summary.pass());
    }

    #[test]
    fn mutant_distortion_is_detected_by_every_suite() {
        let summary = run_verification(None, DEFAULT_SEED, 1.0).unwrap();
        for s in &summary.suites {
            assert!(s.failures > 0, "suite {} missed the injected corruption", s.name);
        }
        assert!(!summary.pass());
    }

    #[test]
    fn suite_filter_and_unknown_names() {
        let summary = run_verification(Some("spectral"), DEFAULT_SEED, 0.0).unwrap();
        assert_eq!(summary.suites.len(), 1);
        assert_eq!(summary.suites[0].name, "spectral");
        assert_eq!(summary.suites[0].cases, 1000);
        assert!(matches!(
            run_verification(Some("nope"), DEFAULT_SEED, 0.0),
            Err(VerifyError::UnknownSuite(_))
        ));
    }

    #[test]
    fn fixed_seed_reproduces_margins() {
        let a = run_suite("spectral", 7, 0.0).unwrap();
        let b = run_suite("spectral", 7, 0.0).unwrap();
        assert_eq!(a.worst_margin, b.worst_margin);
        let c = run_suite("spectral", 8, 0.0).unwrap();
        assert!(a.worst_margin != c.worst_margin || a.cases == c.cases);
    }

    #[test]
    fn render_mentions_every_suite_and_verdict() {
        let summary = run_verification(None, DEFAULT_SEED, 0.0).unwrap();
        let text = summary.render();
        for name in SUITE_NAMES {
            assert!(text.contains(name), "missing {name}");
        }
        assert!(text.contains("verification: PASS"));
    }
}
