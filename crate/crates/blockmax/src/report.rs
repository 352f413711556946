//! On-disk artifact formats.
//!
//! Everything is plain text: JSON Lines for run logs and evaluation records,
//! tab-separated tables for fronts, trajectories, validation reports, and
//! comparisons. Floats are printed with Rust's shortest round-trip
//! representation, so files written from identical runs are identical bytes
//! and parse back exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::Comparison;
use crate::error::{Error, Result};
use crate::mobo::IterationRecord;
use crate::objectives::{BlockSpec, EvalRecord};
use crate::pareto::ParetoArchive;
use crate::validate::ValidationReport;

/// Run log: one JSON object per line, in iteration order.
pub fn write_run_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in log {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Report(format!("serializing run log: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_run_log(path: &Path) -> Result<Vec<IterationRecord>> {
    let content = std::fs::read_to_string(path)?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Report(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Evaluation records: one JSON object per line, in evaluation order.
pub fn write_evaluations(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Report(format!("serializing evaluations: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_evaluations(path: &Path) -> Result<Vec<EvalRecord>> {
    let content = std::fs::read_to_string(path)?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Report(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Archive table: `spec<TAB>f1<TAB>f2`, rows sorted by f1.
pub fn write_archive_tsv(path: &Path, archive: &ParetoArchive) -> Result<()> {
    let mut out = String::from("spec\tf1\tf2\n");
    for (spec, point) in archive.entries() {
        writeln!(out, "{spec}\t{}\t{}", point[0], point[1]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Front table in the same layout as [`write_archive_tsv`], from raw rows.
pub fn write_front_tsv(path: &Path, rows: &[(BlockSpec, [f64; 2])]) -> Result<()> {
    let mut out = String::from("spec\tf1\tf2\n");
    for (spec, point) in rows {
        writeln!(out, "{spec}\t{}\t{}", point[0], point[1]).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a front/archive table back into `(spec, [f1, f2])` rows.
pub fn read_front_tsv(path: &Path) -> Result<Vec<(BlockSpec, [f64; 2])>> {
    let content = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("spec")) {
            continue;
        }
        let mut cols = line.split('\t');
        let bad = |what: &str| {
            Error::Report(format!("{}:{}: missing {what}", path.display(), i + 1))
        };
        let spec: BlockSpec = cols.next().ok_or_else(|| bad("spec"))?.parse()?;
        let f1: f64 = cols
            .next()
            .ok_or_else(|| bad("f1"))?
            .parse()
            .map_err(|e| Error::Report(format!("{}:{}: f1: {e}", path.display(), i + 1)))?;
        let f2: f64 = cols
            .next()
            .ok_or_else(|| bad("f2"))?
            .parse()
            .map_err(|e| Error::Report(format!("{}:{}: f2: {e}", path.display(), i + 1)))?;
        rows.push((spec, [f1, f2]));
    }
    if rows.is_empty() {
        return Err(Error::Report(format!("{}: no front rows", path.display())));
    }
    Ok(rows)
}

/// Hypervolume trajectory: `iteration<TAB>hv`, starting at iteration 0.
pub fn write_trajectory_tsv(path: &Path, trajectory: &[f64]) -> Result<()> {
    let mut out = String::from("iteration\thv\n");
    for (i, hv) in trajectory.iter().enumerate() {
        writeln!(out, "{i}\t{hv}").expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Validation report in the layout of the out-of-sample tables:
/// `spec, mean/std of f1, mean/std of f2, counts`.
pub fn write_validation_tsv(path: &Path, report: &ValidationReport) -> Result<()> {
    let mut out = String::from("spec\tmean_f1\tstd_f1\tmean_f2\tstd_f2\treplications\tinfeasible\n");
    for row in &report.rows {
        let std1 = row.std_f1.map(|v| v.to_string()).unwrap_or_default();
        let std2 = row.std_f2.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.spec, row.mean_f1, std1, row.mean_f2, std2, row.replications, row.infeasible
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-replication raw values behind a validation report.
pub fn write_validation_raw_tsv(path: &Path, report: &ValidationReport) -> Result<()> {
    let mut out = String::from("spec\treplication\tf1\tf2\n");
    for row in &report.rows {
        for (idx, point) in &row.raw {
            writeln!(out, "{}\t{idx}\t{}\t{}", row.spec, point[0], point[1])
                .expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Comparison table: one row per run with final HV and the optimizer's
/// advantage in percent.
pub fn write_comparison_tsv(path: &Path, comparison: &Comparison) -> Result<()> {
    let mut out = String::from("run\tfinal_hv\tmobo_advantage_pct\tevaluations\n");
    for row in &comparison.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.label, row.final_hv, row.mobo_advantage_pct, row.evaluations
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Long-format HV curves for plotting: `run<TAB>iteration<TAB>hv`.
pub fn write_hv_curves_tsv(path: &Path, curves: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::from("run\titeration\thv\n");
    for (label, trajectory) in curves {
        for (i, hv) in trajectory.iter().enumerate() {
            writeln!(out, "{label}\t{i}\t{hv}").expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Cumulative evaluation wall time per run (timing-mode runs only):
/// `run<TAB>evaluation<TAB>cumulative_ms`.
pub fn write_time_curves_tsv(path: &Path, curves: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::from("run\tevaluation\tcumulative_ms\n");
    for (label, cumulative) in curves {
        for (i, ms) in cumulative.iter().enumerate() {
            writeln!(out, "{label}\t{}\t{ms}", i + 1).expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
