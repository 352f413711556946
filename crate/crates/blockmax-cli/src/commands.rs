//! Subcommand implementations and their artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use blockmax::baselines::{self, BaselineRun, Comparison, ComparisonRow, Strategy};
use blockmax::grid::{self, GridFormat};
use blockmax::mobo::{self, OptimizerConfig, PhaseTimings, StopReason};
use blockmax::objectives::BlockSpec;
use blockmax::report;
use blockmax::validate;
use blockmax::{Error, Result};

use crate::config::{RunConfig, SourceKind};

/// Machine-readable run summary, shared by optimize/enumerate/baseline.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub label: String,
    pub reference: [f64; 2],
    pub final_hv: f64,
    pub archive_size: usize,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall: Option<PhaseTimings>,
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Report(format!("serializing summary: {e}")))?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
}

fn read_trajectory(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("hv_trajectory.tsv");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let hv = line
            .split('\t')
            .nth(1)
            .ok_or_else(|| Error::Report(format!("{}:{}: missing hv", path.display(), i + 1)))?;
        out.push(hv.parse().map_err(|e| {
            Error::Report(format!("{}:{}: hv: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

/// Resolve the baseline reference point: explicit config value, or the
/// reference of a previous run's summary via `--ref-from`.
fn resolve_reference(config: &RunConfig, ref_from: Option<&Path>) -> Result<[f64; 2]> {
    if let Some(dir) = ref_from {
        return Ok(read_summary(dir)?.reference);
    }
    config
        .baseline
        .as_ref()
        .and_then(|b| b.reference)
        .ok_or_else(|| {
            Error::Config(
                "baseline runs need a reference point: set baseline.reference or pass --ref-from <optimize output dir>"
                    .into(),
            )
        })
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_optimize(
    config: &RunConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    timing: bool,
) -> Result<()> {
    let problem = config.build_problem(None)?;
    let optimizer: OptimizerConfig = config.optimizer_config(seed_override, timing);
    let result = mobo::run(&problem, &optimizer)?;

    ensure_out_dir(out_dir)?;
    report::write_run_log(&out_dir.join("run_log.jsonl"), &result.log)?;
    report::write_evaluations(&out_dir.join("evaluations.jsonl"), &result.evaluations)?;
    report::write_archive_tsv(&out_dir.join("archive.tsv"), &result.archive)?;
    report::write_trajectory_tsv(&out_dir.join("hv_trajectory.tsv"), &result.hv_trajectory)?;
    // The archive keeps only points inside the reference box; the front over
    // all evaluations is worth reporting too.
    let front = baselines::exact_front(
        result
            .evaluations
            .iter()
            .filter_map(|rec| rec.pair.map(|p| (rec.spec.clone(), p)))
            .collect(),
    );
    let front_rows: Vec<(BlockSpec, [f64; 2])> =
        front.iter().map(|(s, p)| (s.clone(), p.point())).collect();
    report::write_front_tsv(&out_dir.join("front.tsv"), &front_rows)?;
    write_summary(
        out_dir,
        &RunSummary {
            command: "optimize".into(),
            label: "mobo".into(),
            reference: result.reference,
            final_hv: result.archive.hypervolume(),
            archive_size: result.archive.len(),
            evaluations: result.evaluations.len(),
            iterations: Some(result.iterations),
            stop: Some(result.stop),
            wall: timing.then_some(result.wall),
        },
    )?;
    println!(
        "optimize: {} iterations, archive {}, hv {}, stop {:?}",
        result.iterations,
        result.archive.len(),
        result.archive.hypervolume(),
        result.stop
    );
    Ok(())
}

fn write_baseline_artifacts(out_dir: &Path, run: &BaselineRun, command: &str) -> Result<()> {
    ensure_out_dir(out_dir)?;
    report::write_evaluations(&out_dir.join("evaluations.jsonl"), &run.evaluations)?;
    report::write_archive_tsv(&out_dir.join("archive.tsv"), &run.archive)?;
    report::write_trajectory_tsv(&out_dir.join("hv_trajectory.tsv"), &run.hv_trajectory)?;
    write_summary(
        out_dir,
        &RunSummary {
            command: command.into(),
            label: run.label.clone(),
            reference: run.reference,
            final_hv: run.archive.hypervolume(),
            archive_size: run.archive.len(),
            evaluations: run.evaluations.len(),
            iterations: None,
            stop: None,
            wall: None,
        },
    )?;
    Ok(())
}

pub fn cmd_enumerate(
    config: &RunConfig,
    out_dir: &Path,
    ref_from: Option<&Path>,
    timing: bool,
) -> Result<()> {
    let problem = config.build_problem(None)?;
    let reference = resolve_reference(config, ref_from)?;
    let cap = config.baseline.as_ref().and_then(|b| b.enumeration_cap);
    let result = baselines::enumerate_all(&problem, reference, cap, timing)?;

    write_baseline_artifacts(out_dir, &result.run, "enumerate")?;
    let front_rows: Vec<(BlockSpec, [f64; 2])> = result
        .front
        .iter()
        .map(|(s, p)| (s.clone(), p.point()))
        .collect();
    report::write_front_tsv(&out_dir.join("front.tsv"), &front_rows)?;
    println!(
        "enumerate: {} evaluations, exact front {}, hv {}",
        result.run.evaluations.len(),
        result.front.len(),
        result.run.archive.hypervolume()
    );
    Ok(())
}

pub fn cmd_baseline(
    config: &RunConfig,
    out_dir: &Path,
    strategy: Strategy,
    budget_override: Option<usize>,
    seed_override: Option<u64>,
    ref_from: Option<&Path>,
    timing: bool,
) -> Result<()> {
    let problem = config.build_problem(None)?;
    let reference = resolve_reference(config, ref_from)?;
    let section = config.baseline.as_ref();
    let budget = budget_override
        .or(section.and_then(|b| b.budget))
        .ok_or_else(|| Error::Config("baseline budget missing (baseline.budget or --budget)".into()))?;
    let run = match strategy {
        Strategy::Random => {
            let seed = seed_override.unwrap_or(section.map(|b| b.seed).unwrap_or(0));
            baselines::random_baseline(&problem, reference, budget, seed, timing)?
        }
        Strategy::Structured => baselines::structured_grid(&problem, reference, budget, timing)?,
        Strategy::Enumeration => {
            return Err(Error::Config("use the `enumerate` subcommand for enumeration".into()))
        }
    };
    write_baseline_artifacts(out_dir, &run, "baseline")?;
    println!(
        "baseline {}: {} evaluations, hv {}",
        run.label,
        run.evaluations.len(),
        run.archive.hypervolume()
    );
    Ok(())
}

pub fn cmd_validate(
    config: &RunConfig,
    out_dir: &Path,
    front_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<()> {
    let section = config
        .validate
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [validate] section".into()))?;
    let front_path = front_override
        .map(PathBuf::from)
        .or_else(|| section.front.clone())
        .ok_or_else(|| Error::Config("front table missing (validate.front or --front)".into()))?;
    let front = report::read_front_tsv(&front_path)?;
    let specs: Vec<BlockSpec> = front.into_iter().map(|(s, _)| s).collect();

    let use_regions = section.use_regions;
    let report_out = if !section.test_files.is_empty() {
        let files = section.test_files.clone();
        let base = config.clone();
        validate::out_of_sample_streamed(
            &specs,
            |idx| {
                let mut cfg = base.clone();
                cfg.data.source = SourceKind::File;
                cfg.data.path = Some(files[idx].clone());
                cfg.data.shape = None;
                cfg.data.stddev = None;
                cfg.build_validation_problem(None, use_regions)
            },
            files.len(),
        )?
    } else {
        let count = section.replications.ok_or_else(|| {
            Error::Config("validate needs test_files or replications".into())
        })?;
        if config.data.source != SourceKind::Synthetic {
            return Err(Error::Config(
                "synthetic replications require data.source = \"synthetic\"".into(),
            ));
        }
        let base = seed_override.unwrap_or(section.replication_seed_base);
        validate::out_of_sample_streamed(
            &specs,
            |idx| config.build_validation_problem(Some(base + idx as u64), use_regions),
            count,
        )?
    };

    ensure_out_dir(out_dir)?;
    report::write_validation_tsv(&out_dir.join("validation.tsv"), &report_out)?;
    report::write_validation_raw_tsv(&out_dir.join("validation_raw.tsv"), &report_out)?;
    println!("validate: {} specs aggregated", report_out.rows.len());
    Ok(())
}

pub fn cmd_compare(mobo_dir: &Path, baseline_dirs: &[PathBuf], out_dir: &Path) -> Result<()> {
    let mobo = read_summary(mobo_dir)?;
    if mobo.command != "optimize" {
        return Err(Error::Comparison(format!(
            "{} holds a `{}` run, expected an optimize run",
            mobo_dir.display(),
            mobo.command
        )));
    }
    let mobo_traj = read_trajectory(mobo_dir)?;

    let mut rows = vec![ComparisonRow {
        label: mobo.label.clone(),
        final_hv: mobo.final_hv,
        mobo_advantage_pct: 0.0,
        evaluations: mobo.evaluations,
    }];
    let mut trajectories = vec![(mobo.label.clone(), mobo_traj)];
    for dir in baseline_dirs {
        let summary = read_summary(dir)?;
        if summary.reference != mobo.reference {
            return Err(Error::Comparison(format!(
                "{} used reference {:?}, optimizer used {:?}; hypervolumes are not comparable",
                dir.display(),
                summary.reference,
                mobo.reference
            )));
        }
        let advantage = if summary.final_hv > 0.0 {
            (mobo.final_hv - summary.final_hv) / summary.final_hv * 100.0
        } else {
            f64::INFINITY
        };
        rows.push(ComparisonRow {
            label: summary.label.clone(),
            final_hv: summary.final_hv,
            mobo_advantage_pct: advantage,
            evaluations: summary.evaluations,
        });
        trajectories.push((summary.label, read_trajectory(dir)?));
    }

    let comparison = Comparison { reference: mobo.reference, rows, trajectories };
    ensure_out_dir(out_dir)?;
    report::write_comparison_tsv(&out_dir.join("comparison.tsv"), &comparison)?;
    report::write_hv_curves_tsv(&out_dir.join("hv_curves.tsv"), &comparison.trajectories)?;

    // Runs produced in timing mode carry per-evaluation wall times; turn
    // those into cumulative cost curves.
    let mut time_curves: Vec<(String, Vec<f64>)> = Vec::new();
    for dir in std::iter::once(mobo_dir).chain(baseline_dirs.iter().map(|d| d.as_path())) {
        let eval_path = dir.join("evaluations.jsonl");
        if !eval_path.exists() {
            continue;
        }
        let records = report::read_evaluations(&eval_path)?;
        let mut cumulative = Vec::with_capacity(records.len());
        let mut total = 0.0;
        let mut timed = true;
        for rec in &records {
            match rec.wall_ms {
                Some(ms) => {
                    total += ms;
                    cumulative.push(total);
                }
                None => {
                    timed = false;
                    break;
                }
            }
        }
        if timed && !cumulative.is_empty() {
            let label = read_summary(dir)?.label;
            time_curves.push((label, cumulative));
        }
    }
    if !time_curves.is_empty() {
        report::write_time_curves_tsv(&out_dir.join("time_curves.tsv"), &time_curves)?;
    }

    println!("compare: {} run(s) against mobo", comparison.rows.len() - 1);
    Ok(())
}

pub fn cmd_simulate(
    config: &RunConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    binary: bool,
) -> Result<()> {
    if config.data.source != SourceKind::Synthetic {
        return Err(Error::Config("simulate requires data.source = \"synthetic\"".into()));
    }
    let shape = config.data.shape.as_ref().expect("validated");
    let stddev = config.data.stddev.expect("validated");
    let seed = seed_override.unwrap_or(config.data.seed);
    let domain = grid::generate_synthetic(shape, config.data.mean, stddev, seed)?;

    ensure_out_dir(out_dir)?;
    let (name, format) = if binary {
        ("synthetic.bgrid", GridFormat::Binary)
    } else {
        ("synthetic.grid", GridFormat::Text)
    };
    let path = out_dir.join(name);
    grid::write_grid(&domain, &path, format)?;
    println!("simulate: wrote {} values to {}", domain.len(), path.display());
    Ok(())
}

