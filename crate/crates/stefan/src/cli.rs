//! The `stefan` command-line harness: integrations (`run`), verification
//! suites (`verify`), perturbation sweeps (`sweep`), and model audits
//! (`audit`) over the flat `key = value` configuration format.
//!
//! Exit codes: 0 on success (for `verify`, zero failures), 1 on runtime or
//! verification failure, 2 on usage errors (bad arguments, malformed or
//! invalid configuration, malformed ε families).

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::diagnostics::{record, DiagnosticsError};
use crate::output::render_csv;
use crate::simplex::DiffusionTable;
use crate::solver::{run, SolverError};
use crate::sweep::{cmd_sweep, SweepError};
use crate::thermo::{
    audit_coupling_structure, audit_entropy_bounds, CouplingAudit, ModelKind, ModelSpec,
    ThermoError,
};
use crate::verify::{run_verification, VerifyError, VerifySummary, DEFAULT_SEED};
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("reference run incompatible: {0}")]
    IncompatibleReference(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

impl CliError {
    /// 2 for usage-class errors, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Config(_)
            | CliError::Verify(VerifyError::UnknownSuite(_))
            | CliError::IncompatibleReference(_)
            | CliError::Sweep(SweepError::Usage(_))
            | CliError::Sweep(SweepError::Config(_))
            | CliError::Sweep(SweepError::Diagnostics(
                DiagnosticsError::TooFewEpsilons { .. },
            ))
            | CliError::Sweep(SweepError::Diagnostics(
                DiagnosticsError::EpsilonsNotHalving { .. },
            )) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stefan",
    version,
    about = "Structure-preserving numerics for Maxwell-Stefan and generalized cross-diffusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the self-verification suites and report per-suite failures.
    Verify {
        /// Run only this suite (spectral, bott-duffin-oracle,
        /// pointwise-bounds, reciprocal-eigenvalue, velocity-bound,
        /// dissipation-lower-bound).
        #[arg(long)]
        suite: Option<String>,
        /// Seed for the randomized suites (fixed default).
        #[arg(long)]
        seed: Option<u64>,
        /// Test scaffolding: lower every margin by this relative amount to
        /// prove the suites catch a corrupted build.
        #[arg(long, hide = true, default_value_t = 0.0)]
        mutant_distortion: f64,
    },
    /// Integrate a configured system; write per-snapshot diagnostics CSV.
    Run {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Second configuration whose trajectory serves as the
        /// relative-entropy reference (same model, grid, and time grid).
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Perturbation sweep: reference run plus halving perturbation sizes.
    Sweep {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated perturbation sizes; at least 3 positive entries,
        /// each half the previous.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        epsilons: Vec<f64>,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit a model's structural hypotheses (entropy convexity bounds and
    /// coupling-matrix assumptions).
    Audit {
        /// Model id: classic-ms, pvd, porous-medium, molar-mass, or tumor.
        model: String,
        /// Species count (ignored for tumor, taken from masses for
        /// molar-mass).
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Pressure exponent for porous-medium.
        #[arg(long)]
        gamma: Option<f64>,
        /// Tumor pressure coefficient.
        #[arg(long)]
        beta: Option<f64>,
        /// Tumor pressure exponent offset.
        #[arg(long)]
        theta: Option<f64>,
        /// Uniform tumor friction weight k_ij.
        #[arg(long)]
        k: Option<f64>,
        /// Comma-separated molar masses.
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
        /// Uniform diffusion coefficient for drag-table models.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Random compositions sampled by the coupling audit.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Seed for the coupling audit.
        #[arg(long)]
        seed: Option<u64>,
        /// Lower bound on sampled compositions (default 1e-3; 0.05 for
        /// tumor).
        #[arg(long)]
        floor: Option<f64>,
    },
}

/// A command's result: text for stdout and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    Ok(parse_config(&text)?)
}

/// Completed run: where the CSV went and how many data rows it holds.
#[derive(Debug)]
pub struct RunOutput {
    pub path: PathBuf,
    pub rows: usize,
    pub csv: String,
}

fn check_reference_compat(cfg: &RunConfig, reference: &RunConfig) -> Result<(), CliError> {
    if reference.model != cfg.model || reference.n != cfg.n {
        return Err(CliError::IncompatibleReference("model differs"));
    }
    if reference.d != cfg.d
        || reference.gamma != cfg.gamma
        || reference.beta != cfg.beta
        || reference.theta != cfg.theta
        || reference.masses != cfg.masses
    {
        return Err(CliError::IncompatibleReference("model parameters differ"));
    }
    if reference.cells != cfg.cells || reference.length != cfg.length {
        return Err(CliError::IncompatibleReference("grid differs"));
    }
    if reference.t_end != cfg.t_end || reference.snapshot_stride != cfg.snapshot_stride {
        return Err(CliError::IncompatibleReference("time grid differs"));
    }
    Ok(())
}

/// Integrates the configured system and writes the diagnostics CSV to the
/// configuration's `output` path. With a reference configuration, both are
/// integrated and the `H_rel` column carries the per-snapshot relative
/// entropy against the reference trajectory.
pub fn cmd_run(cfg: &RunConfig, reference: Option<&RunConfig>) -> Result<RunOutput, CliError> {
    let model = cfg.model_spec()?;
    let table = cfg.diffusion_table()?;
    let solver_cfg = cfg.solver_config()?;
    let initial = cfg.initial_field()?;
    let trajectory = run(&solver_cfg, &initial, cfg.snapshot_stride)?;

    let reference_trajectory = match reference {
        Some(ref_cfg) => {
            check_reference_compat(cfg, ref_cfg)?;
            let ref_solver = ref_cfg.solver_config()?;
            let ref_initial = ref_cfg.initial_field()?;
            Some(run(&ref_solver, &ref_initial, ref_cfg.snapshot_stride)?)
        }
        None => None,
    };

    let mut records = Vec::with_capacity(trajectory.snapshots.len());
    for (j, snapshot) in trajectory.snapshots.iter().enumerate() {
        let ref_field = reference_trajectory.as_ref().map(|r| &r.snapshots[j]);
        records.push(record(snapshot, ref_field, &model, table.as_ref())?);
    }
    let csv = render_csv(&records, &trajectory.snapshot_dts, cfg.n);
    let path = PathBuf::from(&cfg.output);
    std::fs::write(&path, &csv)
        .map_err(|source| CliError::Write { path: path.clone(), source })?;
    Ok(RunOutput { path, rows: records.len(), csv })
}

/// One audited model: entropy convexity constants plus the coupling audit.
#[derive(Debug)]
pub struct AuditReport {
    pub kind: ModelKind,
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    pub entropy_pass: bool,
    pub coupling: CouplingAudit,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.entropy_pass && self.coupling.pass
    }
}

const AUDIT_GRID_POINTS: usize = 4096;

/// Builds the model from audit arguments and runs both audits.
#[allow(clippy::too_many_arguments)]
pub fn cmd_audit(
    model_id: &str,
    n: usize,
    gamma: Option<f64>,
    beta: Option<f64>,
    theta: Option<f64>,
    k: Option<f64>,
    masses: Option<&[f64]>,
    d: f64,
    samples: usize,
    seed: u64,
    floor: Option<f64>,
) -> Result<AuditReport, CliError> {
    let kind = ModelKind::parse(model_id)
        .ok_or_else(|| CliError::Usage(format!("unknown model `{model_id}`")))?;
    let spec = match kind {
        ModelKind::ClassicMs => ModelSpec::classic(n)?,
        ModelKind::Pvd => ModelSpec::pvd(n)?,
        ModelKind::PorousMedium => {
            let gamma = gamma
                .ok_or_else(|| CliError::Usage("porous-medium requires --gamma".into()))?;
            ModelSpec::porous(n, gamma)?
        }
        ModelKind::Tumor => {
            let beta =
                beta.ok_or_else(|| CliError::Usage("tumor requires --beta".into()))?;
            let theta =
                theta.ok_or_else(|| CliError::Usage("tumor requires --theta".into()))?;
            ModelSpec::tumor(beta, theta)?
        }
        ModelKind::MolarMass => {
            let masses = masses
                .ok_or_else(|| CliError::Usage("molar-mass requires --masses".into()))?;
            ModelSpec::molar_mass(masses)?
        }
    };
    if !(d > 0.0) {
        return Err(CliError::Usage("--d must be positive".into()));
    }
    let table = match kind {
        ModelKind::MolarMass => None,
        ModelKind::Tumor => Some(DiffusionTable::uniform(3, k.unwrap_or(1.0)).map_err(
            |e| CliError::Usage(format!("bad tumor friction weight: {e}")),
        )?),
        _ => Some(
            DiffusionTable::uniform(spec.n, d)
                .map_err(|e| CliError::Usage(format!("bad diffusion coefficient: {e}")))?,
        ),
    };
    let floor = floor.unwrap_or(if kind == ModelKind::Tumor { 0.05 } else { 1e-3 });

    let mut k1 = f64::NEG_INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    let mut entropy_pass = true;
    for entropy in &spec.entropies {
        let audit = audit_entropy_bounds(entropy, AUDIT_GRID_POINTS);
        k1 = k1.max(audit.k1_estimate);
        k2 = k2.max(audit.k2_estimate);
        entropy_pass &= audit.pass;
    }
    let coupling = audit_coupling_structure(&spec, table.as_ref(), samples, floor, seed)?;
    Ok(AuditReport { kind, n: spec.n, k1, k2, entropy_pass, coupling })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Renders the audit as one line per checked clause plus a final verdict.
pub fn render_audit(report: &AuditReport) -> String {
    let mut out = String::new();
    writeln!(out, "model {} (n = {})", report.kind.id(), report.n).unwrap();
    writeln!(
        out,
        "entropy bounds        {}  K1 = {:.6e}, K2 = {:.6e} ({} grid points)",
        verdict(report.entropy_pass),
        report.k1,
        report.k2,
        AUDIT_GRID_POINTS
    )
    .unwrap();
    let c = &report.coupling;
    let is_tumor = report.kind == ModelKind::Tumor;
    let symmetry_note = if is_tumor && !c.symmetry_ok {
        " (expected: asymmetric coupling)"
    } else {
        ""
    };
    writeln!(
        out,
        "coupling symmetry     {}  max residual {:.3e}{}",
        verdict(c.symmetry_ok),
        c.max_symmetry_residual,
        symmetry_note
    )
    .unwrap();
    writeln!(
        out,
        "coupling kernel       {}  max residual {:.3e}",
        verdict(c.kernel_ok),
        c.max_kernel_residual
    )
    .unwrap();
    writeln!(
        out,
        "coupling bounded      {}  sup ||B||_F = {:.6e} ({} samples, floor {:.1e})",
        verdict(c.bounded_ok),
        c.max_frobenius,
        c.samples,
        c.floor
    )
    .unwrap();
    match c.rayleigh_infimum {
        Some(inf) => {
            writeln!(
                out,
                "positivity on L       {}  Rayleigh infimum {:.6e}",
                verdict(c.spectral_ok),
                inf
            )
            .unwrap();
        }
        None => {
            writeln!(
                out,
                "spectral floor        {}  min nonzero {:.6e} >= mu {:.6e}",
                verdict(c.spectral_ok),
                c.min_nonzero,
                c.mu_reported
            )
            .unwrap();
        }
    }
    writeln!(out, "audit: {}", verdict(report.pass())).unwrap();
    out
}

fn handle_verify(
    suite: Option<&str>,
    seed: u64,
    distortion: f64,
) -> Result<Outcome, CliError> {
    let summary: VerifySummary = run_verification(suite, seed, distortion)?;
    let code = if summary.pass() { 0 } else { 1 };
    Ok(Outcome { stdout: summary.render(), code })
}

/// Executes one parsed command.
pub fn execute(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Verify { suite, seed, mutant_distortion } => {
            handle_verify(suite.as_deref(), seed.unwrap_or(DEFAULT_SEED), mutant_distortion)
        }
        Command::Run { config, reference } => {
            let cfg = read_config(&config)?;
            let ref_cfg = match &reference {
                Some(path) => Some(read_config(path)?),
                None => None,
            };
            let output = cmd_run(&cfg, ref_cfg.as_ref())?;
            Ok(Outcome {
                stdout: format!("wrote {} ({} rows)\n", output.path.display(), output.rows),
                code: 0,
            })
        }
        Command::Sweep { config, epsilons, seed } => {
            let cfg = read_config(&config)?;
            let outcome = cmd_sweep(&cfg, &epsilons, seed)?;
            let mut stdout = crate::output::render_report(&outcome.report);
            writeln!(stdout, "reference_csv = {}", outcome.reference_csv.display()).unwrap();
            for (eps, path) in epsilons.iter().zip(outcome.run_csvs.iter()) {
                writeln!(stdout, "run_csv {} = {}", eps, path.display()).unwrap();
            }
            writeln!(stdout, "report = {}", outcome.report_path.display()).unwrap();
            Ok(Outcome { stdout, code: 0 })
        }
        Command::Audit { model, n, gamma, beta, theta, k, masses, d, samples, seed, floor } => {
            let report = cmd_audit(
                &model,
                n,
                gamma,
                beta,
                theta,
                k,
                masses.as_deref(),
                d,
                samples,
                seed.unwrap_or(DEFAULT_SEED),
                floor,
            )?;
            let code = if report.pass() { 0 } else { 1 };
            Ok(Outcome { stdout: render_audit(&report), code })
        }
    }
}

/// Full entry point: parses arguments, executes, prints, and returns the
/// process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.code
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run_config(dir: &Path, extra: &str) -> RunConfig {
        let output = dir.join("out.csv");
        let text = format!(
            r#"
model = "classic-ms"
n = 2
d = [1.0]
cells = 32
length = 1.0
dt_init = 1e-5
t_end = 0.002
snapshot_stride = 2
output = "{}"
profile = "cosine"
base = [0.5, 0.5]
amplitude = [0.1, -0.1]
{extra}
"#,
            output.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn run_writes_csv_with_schema_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_config(dir.path(), "");
        let out = cmd_run(&cfg, None).unwrap();
        assert_eq!(out.rows, 3);
        let text = std::fs::read_to_string(&out.path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,H,D,H_rel,rS_min,min_c,sum_dev,dt,mass_1,mass_2");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn run_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_config(dir.path(), "");
        let a = cmd_run(&cfg, None).unwrap().csv;
        let b = cmd_run(&cfg, None).unwrap().csv;
        assert_eq!(a, b);
    }

    #[test]
    fn run_against_itself_gives_exact_zero_h_rel() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_config(dir.path(), "");
        let out = cmd_run(&cfg, Some(&cfg)).unwrap();
        for line in out.csv.lines().skip(1) {
            let h_rel: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(h_rel, 0.0);
        }
    }

    #[test]
    fn run_zero_t_end_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = run_config(dir.path(), "");
        cfg.t_end = 0.0;
        let out = cmd_run(&cfg, None).unwrap();
        assert_eq!(out.rows, 1);
        let row = out.csv.lines().nth(1).unwrap();
        assert!(row.starts_with("0.0000000000000000e0,"));
    }

    #[test]
    fn incompatible_reference_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_config(dir.path(), "");
        let mut other = cfg.clone();
        other.cells = 64;
        match cmd_run(&cfg, Some(&other)) {
            Err(CliError::IncompatibleReference(which)) => assert_eq!(which, "grid differs"),
            other => panic!("expected incompatibility, got {other:?}"),
        }
        let mut wrong_time = cfg.clone();
        wrong_time.snapshot_stride = 5;
        assert!(matches!(
            cmd_run(&cfg, Some(&wrong_time)),
            Err(CliError::IncompatibleReference("time grid differs"))
        ));
    }

    #[test]
    fn tumor_run_is_rejected_by_the_solver() {
        let dir = tempfile::tempdir().unwrap();
        let output = dir.path().join("t.csv");
        let text = format!(
            r#"
model = "tumor"
n = 3
beta = 1.0
theta = 0.5
cells = 16
length = 1.0
dt_init = 1e-5
t_end = 0.001
output = "{}"
base = [0.4, 0.3, 0.3]
"#,
            output.display()
        );
        let cfg = parse_config(&text).unwrap();
        match cmd_run(&cfg, None) {
            Err(CliError::Solver(SolverError::UnsupportedModel(id))) => assert_eq!(id, "tumor"),
            other => panic!("expected tumor rejection, got {other:?}"),
        }
    }

    #[test]
    fn audit_classic_constants() {
        let report =
            cmd_audit("classic-ms", 3, None, None, None, None, None, 1.0, 200, 1, None).unwrap();
        assert!((report.k1 - 1.0).abs() <= 1e-9, "K1 = {}", report.k1);
        assert!(report.k2.abs() <= 1e-12, "K2 = {}", report.k2);
        assert!(report.pass());
        let text = render_audit(&report);
        assert!(text.contains("audit: PASS"));
    }

    #[test]
    fn audit_porous_constants() {
        let report = cmd_audit(
            "porous-medium",
            3,
            Some(2.0),
            None,
            None,
            None,
            None,
            1.0,
            200,
            1,
            None,
        )
        .unwrap();
        assert!((report.k1 - 2.0).abs() <= 1e-6, "K1 = {}", report.k1);
        assert!((report.k2 - 1.0).abs() <= 1e-9, "K2 = {}", report.k2);
        assert!(report.pass());
    }

    #[test]
    fn audit_tumor_flags_asymmetry_but_passes() {
        let report = cmd_audit(
            "tumor",
            3,
            None,
            Some(1.0),
            Some(0.5),
            Some(1.0),
            None,
            1.0,
            500,
            1,
            None,
        )
        .unwrap();
        assert!(!report.coupling.symmetry_ok);
        assert!(report.coupling.spectral_ok);
        assert!(report.coupling.rayleigh_infimum.unwrap() > 0.0);
        assert!(report.pass());
        let text = render_audit(&report);
        assert!(text.contains("coupling symmetry     FAIL"));
        assert!(text.contains("expected: asymmetric"));
        assert!(text.contains("positivity on L       PASS"));
        assert!(text.contains("audit: PASS"));
    }

    #[test]
    fn audit_usage_errors() {
        assert!(matches!(
            cmd_audit("porous-medium", 3, None, None, None, None, None, 1.0, 100, 1, None),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            cmd_audit("unknown", 3, None, None, None, None, None, 1.0, 100, 1, None),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn exit_codes_partition_usage_and_runtime() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::Verify(VerifyError::UnknownSuite("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::Solver(SolverError::UnsupportedModel("tumor")).exit_code(),
            1
        );
    }

    #[test]
    fn main_entry_runs_verify_single_suite() {
        let code = main_entry(["stefan", "verify", "--suite", "velocity-bound"]);
        assert_eq!(code, 0);
    }
}
