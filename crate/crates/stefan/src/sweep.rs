//! Perturbation sweeps: one reference trajectory plus a family of
//! perturbed runs at halving sizes, analyzed into a relative-entropy
//! scaling report and written out as per-run CSVs.
//!
//! Perturbed runs are independent and execute on a bounded worker pool
//! (`STEFAN_THREADS` overrides the width); results are merged back in the
//! caller's ε order, so the emitted files and report are deterministic
//! regardless of scheduling.

use crate::config::{ConfigError, RunConfig};
use crate::diagnostics::{
    gronwall_report, record, validate_epsilons, DiagnosticsError, RelEntropyReport,
};
use crate::output::{render_csv, render_report};
use crate::solver::{perturb_initial, run, SolverError, Trajectory};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("perturbed run (ε = {epsilon:e}) failed: {source}")]
    Run { epsilon: f64, source: SolverError },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Completed sweep: the scaling report and the files written.
#[derive(Debug)]
pub struct SweepOutcome {
    pub report: RelEntropyReport,
    pub reference_csv: PathBuf,
    /// Per-ε CSV paths, in the caller's ε order.
    pub run_csvs: Vec<PathBuf>,
    pub report_path: PathBuf,
}

/// Worker-pool width: `STEFAN_THREADS` when set to a positive integer,
/// otherwise the machine's available parallelism, capped by `jobs`.
fn pool_width(jobs: usize) -> usize {
    let configured = std::env::var("STEFAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    let width = configured.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1)
    });
    width.max(1).min(jobs.max(1))
}

fn derived_path(output: &str, suffix: &str) -> PathBuf {
    let path = Path::new(output);
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let name = format!("{stem}-{suffix}");
    match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.join(name),
        _ => PathBuf::from(name),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), SweepError> {
    std::fs::write(path, text)
        .map_err(|source| SweepError::Io { path: path.to_path_buf(), source })
}

/// Runs the sweep: the reference once, one perturbed run per ε (in
/// parallel), then the Grönwall-style scaling analysis. Writes the
/// reference CSV, one CSV per ε with the `H_rel` column filled, and the
/// `key = value` report; paths derive from the configuration's `output`.
///
/// `seed_override` replaces the configuration seed for the initial-profile
/// construction, letting one config file serve several sweep draws.
pub fn cmd_sweep(
    cfg: &RunConfig,
    epsilons: &[f64],
    seed_override: Option<u64>,
) -> Result<SweepOutcome, SweepError> {
    if epsilons.is_empty() {
        return Err(SweepError::Usage("at least 3 halving perturbation sizes required".into()));
    }
    for &eps in epsilons {
        if !eps.is_finite() || eps < 0.0 {
            return Err(SweepError::Usage(format!(
                "perturbation sizes must be finite and nonnegative, got {eps}"
            )));
        }
    }
    // Fail on a malformed family before spending any solver time.
    validate_epsilons(epsilons)?;

    let mut cfg = cfg.clone();
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let model = cfg.model_spec()?;
    let table = cfg.diffusion_table()?;
    let solver_cfg = cfg.solver_config()?;
    let reference_initial = cfg.initial_field()?;
    let reference = run(&solver_cfg, &reference_initial, cfg.snapshot_stride)?;

    let slots: Vec<Mutex<Option<Result<Trajectory, SolverError>>>> =
        epsilons.iter().map(|_| Mutex::new(None)).collect();
    let next_job = AtomicUsize::new(0);
    let workers = pool_width(epsilons.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next_job.fetch_add(1, Ordering::Relaxed);
                if idx >= epsilons.len() {
                    break;
                }
                let outcome = perturb_initial(
                    &reference_initial,
                    epsilons[idx],
                    cfg.perturbation_mode(),
                )
                .and_then(|initial| run(&solver_cfg, &initial, cfg.snapshot_stride));
                *slots[idx].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut runs: Vec<(f64, Trajectory)> = Vec::with_capacity(epsilons.len());
    for (idx, slot) in slots.into_iter().enumerate() {
        let outcome = slot.into_inner().unwrap().expect("worker pool covered every job");
        let traj =
            outcome.map_err(|source| SweepError::Run { epsilon: epsilons[idx], source })?;
        runs.push((epsilons[idx], traj));
    }

    let report = gronwall_report(&runs, &reference, &model)?;

    let reference_csv = derived_path(&cfg.output, "reference.csv");
    let reference_records = reference
        .snapshots
        .iter()
        .map(|f| record(f, None, &model, table.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&reference_csv, &render_csv(&reference_records, &reference.snapshot_dts, cfg.n))?;

    let mut run_csvs = Vec::with_capacity(runs.len());
    for (idx, (_, traj)) in runs.iter().enumerate() {
        let records = traj
            .snapshots
            .iter()
            .zip(reference.snapshots.iter())
            .map(|(f, r)| record(f, Some(r), &model, table.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let path = derived_path(&cfg.output, &format!("eps{idx}.csv"));
        write_file(&path, &render_csv(&records, &traj.snapshot_dts, cfg.n))?;
        run_csvs.push(path);
    }

    let report_path = derived_path(&cfg.output, "report.txt");
    write_file(&report_path, &render_report(&report))?;

    Ok(SweepOutcome { report, reference_csv, run_csvs, report_path })
}
