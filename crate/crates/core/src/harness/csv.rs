//! CSV writers. UTF-8, LF line endings, header row mandatory, floats in
//! Rust's shortest round-trip decimal form.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::{AggregateRow, RunRecord};
use crate::solver::InnerRecord;

pub const RECORD_HEADER: &str = "scheme,profile,sweep_kind,sweep_value,seed,wsr_bps_hz,scnr_in_db,scnr_out_db,feasible,outer_iters,inner_iters_total,wall_time_ms,status";

/// Renders the per-run records CSV as a string.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.profile,
            r.sweep_kind,
            r.sweep_value,
            r.seed,
            r.wsr_bps_hz,
            r.scnr_in_db,
            r.scnr_out_db,
            r.feasible,
            r.outer_iters,
            r.inner_iters_total,
            r.wall_time_ms,
            r.status.as_str()
        )
        .expect("string write");
    }
    out
}

fn write_with_context(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                io::Error::new(e.kind(), format!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| io::Error::new(e.kind(), format!("writing {}: {e}", path.display())))
}

/// Writes the per-run records CSV.
pub fn write_csv(records: &[RunRecord], path: &Path) -> io::Result<()> {
    write_with_context(path, &records_to_csv(records))
}

pub fn aggregates_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("scheme,profile,sweep_kind,sweep_value,n_seeds,wsr_mean,wsr_stddev\n");
    for a in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.scheme, a.profile, a.sweep_kind, a.sweep_value, a.n_seeds, a.wsr_mean, a.wsr_stddev
        )
        .expect("string write");
    }
    out
}

/// Writes the aggregate (mean/stddev) table.
pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> io::Result<()> {
    write_with_context(path, &aggregates_to_csv(rows))
}

pub fn trace_to_csv(trace: &[InnerRecord]) -> String {
    let mut out = String::from("m,t,al_objective,h,rho,wsr,scnr_in\n");
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.outer_iter, r.inner_iter, r.al_objective, r.violation, r.penalty, r.wsr, r.scnr_in
        )
        .expect("string write");
    }
    out
}

/// Writes one solver run's per-iteration trace.
pub fn write_trace_csv(trace: &[InnerRecord], path: &Path) -> io::Result<()> {
    write_with_context(path, &trace_to_csv(trace))
}
