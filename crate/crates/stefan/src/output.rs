//! Deterministic text output: the per-snapshot CSV and the key=value
//! relative-entropy report.
//!
//! Every floating-point value is printed with 17 significant digits
//! (`{:.16e}`), which round-trips `f64` exactly, and lines end with `\n`
//! on every platform — identical inputs produce byte-identical files.

use crate::diagnostics::{DiagnosticsRecord, RelEntropyReport};
use std::fmt::Write as _;

/// Formats one value with 17 significant digits.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header for a run CSV with `n` species:
/// `t,H,D,H_rel,rS_min,min_c,sum_dev,dt,mass_1,...,mass_n`.
pub fn csv_header(n: usize) -> String {
    let mut h = String::from("t,H,D,H_rel,rS_min,min_c,sum_dev,dt");
    for i in 1..=n {
        write!(h, ",mass_{i}").unwrap();
    }
    h
}

/// Renders per-snapshot diagnostics as CSV. `dts[j]` is the step size that
/// produced snapshot `j` (0 for the initial snapshot). A record without a
/// relative entropy leaves the `H_rel` column empty.
pub fn render_csv(records: &[DiagnosticsRecord], dts: &[f64], n: usize) -> String {
    assert_eq!(records.len(), dts.len(), "one dt per record");
    let mut out = csv_header(n);
    out.push('\n');
    for (rec, &dt) in records.iter().zip(dts.iter()) {
        assert_eq!(rec.mass.len(), n, "record species count mismatch");
        let h_rel = rec.rel_entropy.map(sig17).unwrap_or_default();
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig17(rec.t),
            sig17(rec.entropy),
            sig17(rec.dissipation),
            h_rel,
            sig17(rec.rs_min),
            sig17(rec.min_c),
            sig17(rec.sum_dev),
            sig17(dt),
        )
        .unwrap();
        for &m in &rec.mass {
            out.push(',');
            out.push_str(&sig17(m));
        }
        out.push('\n');
    }
    out
}

/// Renders a relative-entropy report as `key = value` lines; list values
/// are comma-separated in descending-ε order.
pub fn render_report(report: &RelEntropyReport) -> String {
    let join = |vs: &[f64]| vs.iter().map(|&v| sig17(v)).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    writeln!(out, "epsilons = {}", join(&report.epsilons)).unwrap();
    writeln!(out, "h0 = {}", join(&report.h0)).unwrap();
    writeln!(out, "sup_ratio = {}", join(&report.sup_ratio)).unwrap();
    writeln!(out, "fitted_order = {}", sig17(report.fitted_order)).unwrap();
    out
}
