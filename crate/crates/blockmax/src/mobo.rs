//! The multi-objective Bayesian optimization driver.
//!
//! One run proceeds in three stages:
//!
//! 1. **Init**: evaluate `k` space-filling specs (scrambled Halton points
//!    rounded to the lattice, re-drawn on collision). These train the
//!    surrogates but are never archived directly.
//! 2. **Reference placement**: the reference point starts at the origin,
//!    where nothing can improve the (empty) archive. While the archive is
//!    empty and the evaluated candidate would not improve it, both reference
//!    coordinates grow by `beta * min(f1, f2)` of that candidate and the
//!    iteration counter resets. The first candidate the reference box
//!    dominates is archived, and the reference freezes permanently.
//! 3. **Optimization**: fit a GP per objective on all feasible evaluations,
//!    pick the lattice point maximizing exact EHVI (excluding anything
//!    already evaluated), evaluate it, offer it to the archive, and stop
//!    when the moving average of absolute hypervolume increments over the
//!    last `window` iterations drops to the tolerance, or the iteration cap
//!    is hit, or the candidate pool runs out.
//!
//! Identical problem, configuration, and seed reproduce the run bit for bit,
//! including the hypervolume trajectory; internal parallelism (the two GP
//! fits, the acquisition scan) never changes results.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ehvi::AcquisitionContext;
use crate::error::{Error, Result};
use crate::gp::{GpHyperparams, GpModel, GpOptions};
use crate::objectives::{BlockSpec, EvalRecord, ObjectivePair, Problem};
use crate::pareto::{would_improve, ParetoArchive};
use crate::rng::seeded;
use rand::Rng;

/// Above this many lattice points the acquisition scan switches from the
/// full lattice to a seeded random subset of this size.
pub const FULL_LATTICE_LIMIT: usize = 200_000;

/// Candidate pool strategy for the acquisition maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidatePool {
    FullLattice,
    RandomSubset(usize),
}

/// Settings for [`run`].
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Number of space-filling initial evaluations (`k`).
    pub init_points: usize,
    /// Window `N` of the moving-average stopping rule.
    pub window: usize,
    /// Tolerance `epsilon` of the stopping rule.
    pub tolerance: f64,
    /// Reference-point growth factor `beta` in (0, 1].
    pub growth_factor: f64,
    /// Hard cap on loop iterations (safety net; the stopping rule is the
    /// intended exit).
    pub max_iterations: usize,
    pub seed: u64,
    /// Candidate pool override; `None` picks the full lattice when it has at
    /// most [`FULL_LATTICE_LIMIT`] points and a random subset otherwise.
    pub pool: Option<CandidatePool>,
    /// Record per-iteration wall times in the run log. Off by default so
    /// artifacts are byte-reproducible.
    pub timing: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            init_points: 5,
            window: 10,
            tolerance: 1e-5,
            growth_factor: 0.5,
            max_iterations: 500,
            seed: 0,
            pool: None,
            timing: false,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self, problem: &Problem) -> Result<()> {
        if self.init_points < 2 {
            return Err(Error::Config(format!(
                "need at least 2 initial points, got {}",
                self.init_points
            )));
        }
        if self.init_points > problem.lattice_size() {
            return Err(Error::Config(format!(
                "{} initial points exceed the {}-point lattice",
                self.init_points,
                problem.lattice_size()
            )));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if !(self.growth_factor > 0.0 && self.growth_factor <= 1.0) {
            return Err(Error::Config(format!(
                "growth factor must lie in (0, 1], got {}",
                self.growth_factor
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which stage produced a log record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    ReferencePlacement,
    Optimization,
}

/// Why the run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum StopReason {
    /// The moving-average criterion dropped to the tolerance.
    Converged { c_epsilon: f64 },
    /// The iteration cap was reached first.
    BudgetExhausted,
    /// Every pool candidate was already evaluated.
    PoolExhausted,
}

/// Hyperparameters of one surrogate as logged per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpLogEntry {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub lml: f64,
}

impl GpLogEntry {
    fn from_model(m: &GpModel) -> Self {
        let h = m.hyperparams();
        Self {
            length_scales: h.length_scales.clone(),
            signal_variance: h.signal_variance,
            noise_variance: h.noise_variance,
            lml: m.log_marginal_likelihood(),
        }
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub phase: Phase,
    pub reference: [f64; 2],
    pub candidate: BlockSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objectives: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<String>,
    /// EHVI of the selected candidate (0 for init records).
    pub acquisition: f64,
    /// True when every candidate scored zero and the lexicographically
    /// smallest unevaluated spec was taken instead.
    pub exploration_fallback: bool,
    pub hvi: f64,
    pub hv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gp_f1: Option<GpLogEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gp_f2: Option<GpLogEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

/// Wall time spent per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub init_ms: f64,
    pub placement_ms: f64,
    pub optimization_ms: f64,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub archive: ParetoArchive,
    pub reference: [f64; 2],
    /// Hypervolume after each optimization-phase iteration, with a leading
    /// zero for the state before the first insertion. Non-decreasing.
    pub hv_trajectory: Vec<f64>,
    pub log: Vec<IterationRecord>,
    /// Every evaluation in order, feasible or not (init included).
    pub evaluations: Vec<EvalRecord>,
    /// Loop iterations performed (init evaluations not counted).
    pub iterations: usize,
    pub stop: StopReason,
    pub wall: PhaseTimings,
}

/// Grow both reference coordinates by `beta * min(f1, f2)` of the candidate.
pub fn update_reference_point(r: [f64; 2], cand: &ObjectivePair, beta: f64) -> [f64; 2] {
    let step = beta * cand.f1.min(cand.f2);
    [r[0] + step, r[1] + step]
}

/// Moving-average stopping rule over a hypervolume trajectory
/// `[HV_0, .., HV_t]`: undefined while `t <= window`, otherwise the mean
/// absolute increment over the last `window` steps, stopping at `<= eps`.
pub fn check_convergence(trajectory: &[f64], window: usize, eps: f64) -> (Option<f64>, bool) {
    if trajectory.len() < window + 2 {
        return (None, false);
    }
    let t = trajectory.len() - 1;
    let sum: f64 = (t - window + 1..=t)
        .map(|a| (trajectory[a] - trajectory[a - 1]).abs())
        .sum();
    let c = sum / window as f64;
    (Some(c), c <= eps)
}

/// The chosen candidate and how it was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub spec: BlockSpec,
    pub ehvi: f64,
    pub fallback: bool,
}

/// Maximize a score over the pool minus exclusions; ties break toward the
/// lexicographically smallest spec. Zero everywhere falls back to the
/// smallest unevaluated spec.
fn select_by<F>(pool: &[BlockSpec], excluded: &HashSet<BlockSpec>, score: F) -> Result<Selected>
where
    F: Fn(&BlockSpec) -> f64 + Sync,
{
    let best = pool
        .par_iter()
        .filter(|s| !excluded.contains(*s))
        .map(|s| (score(s), s))
        .reduce_with(|a, b| {
            // Total order: higher score wins, then smaller spec.
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });
    let Some((ehvi, spec)) = best else {
        return Err(Error::Optimization("candidate pool exhausted".into()));
    };
    if ehvi > 0.0 {
        return Ok(Selected { spec: spec.clone(), ehvi, fallback: false });
    }
    let smallest = pool
        .par_iter()
        .filter(|s| !excluded.contains(*s))
        .min()
        .expect("non-empty checked above");
    Ok(Selected { spec: smallest.clone(), ehvi: 0.0, fallback: true })
}

/// Argmax of exact EHVI over the pool, minus already-evaluated specs.
pub fn select_candidate(
    ctx: &AcquisitionContext<'_>,
    pool: &[BlockSpec],
    excluded: &HashSet<BlockSpec>,
) -> Result<Selected> {
    select_by(pool, excluded, |s| ctx.ehvi_exact(s))
}

/// Enumerate the full decision lattice in lexicographic order.
pub fn full_lattice(bounds: &[usize]) -> Vec<BlockSpec> {
    let mut out = Vec::with_capacity(bounds.iter().product());
    let mut counts = vec![1usize; bounds.len()];
    loop {
        out.push(BlockSpec::new(counts.clone()).expect("positive counts"));
        let mut dim = bounds.len() - 1;
        loop {
            counts[dim] += 1;
            if counts[dim] <= bounds[dim] {
                break;
            }
            counts[dim] = 1;
            if dim == 0 {
                return out;
            }
            dim -= 1;
        }
    }
}

/// Build the candidate pool for this problem and configuration.
fn build_pool(
    problem: &Problem,
    config: &OptimizerConfig,
    archive: &ParetoArchive,
    iteration_seed: u64,
) -> Vec<BlockSpec> {
    let choice = config.pool.unwrap_or({
        if problem.lattice_size() <= FULL_LATTICE_LIMIT {
            CandidatePool::FullLattice
        } else {
            CandidatePool::RandomSubset(FULL_LATTICE_LIMIT)
        }
    });
    match choice {
        CandidatePool::FullLattice => full_lattice(problem.bounds()),
        CandidatePool::RandomSubset(size) => {
            let bounds = problem.bounds();
            let mut rng = seeded(iteration_seed);
            let mut set: HashSet<Vec<usize>> = HashSet::with_capacity(size);
            let cap = size.min(problem.lattice_size());
            let mut tries = 0usize;
            while set.len() < cap && tries < size * 20 {
                let counts: Vec<usize> =
                    bounds.iter().map(|&u| 1 + rng.random_range(0..u)).collect();
                set.insert(counts);
                tries += 1;
            }
            // Local moves around archived solutions keep refinement possible
            // even when the random subset misses the incumbent region.
            let mut neighbors: Vec<Vec<usize>> = Vec::new();
            for (spec, _) in archive.entries() {
                for dim in 0..bounds.len() {
                    for delta in [-1isize, 1] {
                        let c = spec.counts()[dim] as isize + delta;
                        if c >= 1 && c as usize <= bounds[dim] {
                            let mut counts = spec.counts().to_vec();
                            counts[dim] = c as usize;
                            neighbors.push(counts);
                        }
                    }
                }
            }
            neighbors.sort();
            neighbors.dedup();
            for counts in neighbors.into_iter().take(50) {
                set.insert(counts);
            }
            let mut pool: Vec<BlockSpec> = set
                .into_iter()
                .map(|c| BlockSpec::new(c).expect("positive counts"))
                .collect();
            pool.sort();
            pool
        }
    }
}

/// Radical-inverse Halton point in the given prime base.
fn halton(mut index: usize, base: usize) -> f64 {
    let mut fraction = 1.0;
    let mut value = 0.0;
    while index > 0 {
        fraction /= base as f64;
        value += fraction * (index % base) as f64;
        index /= base;
    }
    value
}

/// `k` distinct lattice points from a seeded, scrambled Halton sequence.
fn initial_specs(k: usize, bounds: &[usize], seed: u64) -> Vec<BlockSpec> {
    const BASES: [usize; 3] = [2, 3, 5];
    let mut rng = seeded(seed);
    let shifts: Vec<f64> = bounds.iter().map(|_| rng.random::<f64>()).collect();

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::with_capacity(k);
    let mut index = 1usize;
    while out.len() < k {
        let counts: Vec<usize> = bounds
            .iter()
            .enumerate()
            .map(|(dim, &u)| {
                let u01 = (halton(index, BASES[dim]) + shifts[dim]).fract();
                ((u01 * u as f64).floor() as usize + 1).min(u)
            })
            .collect();
        if seen.insert(counts.clone()) {
            out.push(BlockSpec::new(counts).expect("positive counts"));
        }
        index += 1;
    }
    out
}

struct GpFitSchedule {
    fits_done: usize,
    last_f1: Option<GpHyperparams>,
    last_f2: Option<GpHyperparams>,
}

impl GpFitSchedule {
    fn new() -> Self {
        Self { fits_done: 0, last_f1: None, last_f2: None }
    }

    /// Full multi-start search periodically; cheap warm-started refits in
    /// between. Keeps per-iteration cost flat as the training set grows.
    fn options(&self, base_seed: u64, warm: &Option<GpHyperparams>) -> GpOptions {
        let full = self.fits_done.is_multiple_of(10) || warm.is_none();
        GpOptions {
            starts: if full { 8 } else { 2 },
            seed: base_seed.wrapping_add(self.fits_done as u64).wrapping_mul(0x9E37_79B9),
            warm_start: warm.clone(),
            ..GpOptions::default()
        }
    }
}

/// Execute one optimization run.
pub fn run(problem: &Problem, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate(problem)?;
    let mut wall = PhaseTimings::default();
    let run_start = Instant::now();

    let mut log: Vec<IterationRecord> = Vec::new();
    let mut evaluations: Vec<EvalRecord> = Vec::new();
    let mut evaluated: HashSet<BlockSpec> = HashSet::new();
    let mut feasible: Vec<(BlockSpec, ObjectivePair)> = Vec::new();

    let mut archive = ParetoArchive::new([0.0, 0.0])?;
    let mut trajectory = vec![0.0];
    let mut t = 1usize;
    let mut phase = Phase::ReferencePlacement;

    // --- Init: k space-filling evaluations -------------------------------
    for spec in initial_specs(config.init_points, problem.bounds(), config.seed) {
        let started = Instant::now();
        let outcome = problem.evaluate(&spec)?;
        let wall_ms = config.timing.then(|| started.elapsed().as_secs_f64() * 1e3);
        evaluations.push(EvalRecord::new(problem, &spec, &outcome, wall_ms)?);
        evaluated.insert(spec.clone());
        log.push(IterationRecord {
            t: 0,
            phase: Phase::Init,
            reference: archive.reference(),
            candidate: spec.clone(),
            objectives: outcome.as_ref().ok().map(|p| p.point()),
            infeasible: outcome.as_ref().err().map(|r| r.to_string()),
            acquisition: 0.0,
            exploration_fallback: false,
            hvi: 0.0,
            hv: 0.0,
            c_epsilon: None,
            gp_f1: None,
            gp_f2: None,
            wall_ms,
        });
        if let Ok(pair) = outcome {
            feasible.push((spec, pair));
        }
    }
    wall.init_ms = run_start.elapsed().as_secs_f64() * 1e3;

    if feasible.len() < 2 {
        return Err(Error::Optimization(format!(
            "only {} of {} initial evaluations were feasible; cannot fit surrogates",
            feasible.len(),
            config.init_points
        )));
    }

    // The full lattice never changes; random subsets are rebuilt each
    // iteration around the current archive.
    let static_pool = (config.pool == Some(CandidatePool::FullLattice)
        || (config.pool.is_none() && problem.lattice_size() <= FULL_LATTICE_LIMIT))
        .then(|| full_lattice(problem.bounds()));

    let mut schedule = GpFitSchedule::new();
    let mut iterations = 0usize;
    let phase_start = Instant::now();
    let mut placement_done_at: Option<f64> = None;

    let stop = loop {
        if iterations >= config.max_iterations {
            break StopReason::BudgetExhausted;
        }
        iterations += 1;
        let iter_start = Instant::now();

        // (b) Fit both surrogates on every feasible evaluation so far.
        let inputs: Vec<BlockSpec> = feasible.iter().map(|(s, _)| s.clone()).collect();
        let targets_f1: Vec<f64> = feasible.iter().map(|(_, p)| p.f1).collect();
        let targets_f2: Vec<f64> = feasible.iter().map(|(_, p)| p.f2).collect();
        let opts_f1 = schedule.options(config.seed ^ 0xF1, &schedule.last_f1);
        let opts_f2 = schedule.options(config.seed ^ 0xF2, &schedule.last_f2);
        let bounds = problem.bounds();
        let (model_f1, model_f2) = rayon::join(
            || GpModel::fit(&inputs, &targets_f1, bounds, &opts_f1),
            || GpModel::fit(&inputs, &targets_f2, bounds, &opts_f2),
        );
        let (model_f1, model_f2) = (model_f1?, model_f2?);
        schedule.fits_done += 1;
        schedule.last_f1 = Some(model_f1.hyperparams().clone());
        schedule.last_f2 = Some(model_f2.hyperparams().clone());

        // (c) Candidate = argmax EHVI over the pool minus evaluated specs.
        let pool_storage;
        let pool: &[BlockSpec] = match &static_pool {
            Some(p) => p,
            None => {
                pool_storage = build_pool(
                    problem,
                    config,
                    &archive,
                    config.seed.wrapping_add(iterations as u64 * 611),
                );
                &pool_storage
            }
        };
        let ctx = AcquisitionContext {
            model_f1: &model_f1,
            model_f2: &model_f2,
            archive: archive.points(),
            reference: archive.reference(),
        };
        let selected = match select_candidate(&ctx, pool, &evaluated) {
            Ok(s) => s,
            Err(Error::Optimization(_)) => break StopReason::PoolExhausted,
            Err(e) => return Err(e),
        };

        // (d) Evaluate the candidate.
        let eval_start = Instant::now();
        let outcome = problem.evaluate(&selected.spec)?;
        let eval_ms = config.timing.then(|| eval_start.elapsed().as_secs_f64() * 1e3);
        evaluations.push(EvalRecord::new(problem, &selected.spec, &outcome, eval_ms)?);
        evaluated.insert(selected.spec.clone());

        let mut record = IterationRecord {
            t,
            phase,
            reference: archive.reference(),
            candidate: selected.spec.clone(),
            objectives: None,
            infeasible: None,
            acquisition: selected.ehvi,
            exploration_fallback: selected.fallback,
            hvi: 0.0,
            hv: *trajectory.last().expect("non-empty"),
            c_epsilon: None,
            gp_f1: Some(GpLogEntry::from_model(&model_f1)),
            gp_f2: Some(GpLogEntry::from_model(&model_f2)),
            wall_ms: None,
        };
        let finish_record = |mut rec: IterationRecord| -> IterationRecord {
            if config.timing {
                rec.wall_ms = Some(iter_start.elapsed().as_secs_f64() * 1e3);
            }
            rec
        };

        match outcome {
            Err(reason) => {
                // Infeasible: consumes the iteration, joins the exclusion
                // set, trains nothing.
                record.infeasible = Some(reason.to_string());
                if phase == Phase::Optimization {
                    trajectory.push(*trajectory.last().expect("non-empty"));
                    let (c, stop_now) =
                        check_convergence(&trajectory, config.window, config.tolerance);
                    record.c_epsilon = c;
                    log.push(finish_record(record));
                    t += 1;
                    if stop_now {
                        break StopReason::Converged {
                            c_epsilon: c.expect("stop implies defined"),
                        };
                    }
                } else {
                    log.push(finish_record(record));
                    t += 1;
                }
            }
            Ok(pair) => {
                record.objectives = Some(pair.point());
                feasible.push((selected.spec.clone(), pair));

                // (e) Reference placement: while nothing has been archived
                // and the candidate's HVI against the current reference is
                // zero, grow the reference and restart the counter.
                if archive.is_empty()
                    && !would_improve(&[], archive.reference(), pair.point())
                {
                    log.push(finish_record(record));
                    let grown = update_reference_point(
                        archive.reference(),
                        &pair,
                        config.growth_factor,
                    );
                    archive.set_reference(grown)?;
                    t = 1;
                    trajectory = vec![0.0];
                    continue;
                }

                // (f) Optimization step: offer to the archive, track HV.
                if phase == Phase::ReferencePlacement {
                    phase = Phase::Optimization;
                    record.phase = Phase::Optimization;
                    placement_done_at = Some(phase_start.elapsed().as_secs_f64() * 1e3);
                }
                let report = archive.insert(selected.spec.clone(), pair.point());
                record.hvi = report.hvi;
                trajectory.push(archive.hypervolume());
                record.hv = *trajectory.last().expect("non-empty");
                let (c, stop_now) =
                    check_convergence(&trajectory, config.window, config.tolerance);
                record.c_epsilon = c;
                log.push(finish_record(record));
                t += 1;
                if stop_now {
                    break StopReason::Converged { c_epsilon: c.expect("stop implies defined") };
                }
            }
        }
    };

    let loop_ms = phase_start.elapsed().as_secs_f64() * 1e3;
    wall.placement_ms = placement_done_at.unwrap_or(loop_ms);
    wall.optimization_ms = loop_ms - wall.placement_ms;

    Ok(OptimizationResult {
        reference: archive.reference(),
        hv_trajectory: trajectory,
        archive,
        log,
        evaluations,
        iterations,
        stop,
        wall,
    })
}

/// Rebuild the final archive by replaying a run log through archive
/// insertion. Init records never insert; placement-phase records are
/// rejected by their own recorded reference, exactly as they were live.
pub fn replay_archive(log: &[IterationRecord]) -> Result<ParetoArchive> {
    let mut archive = ParetoArchive::new([0.0, 0.0])?;
    for rec in log {
        if rec.phase == Phase::Init {
            continue;
        }
        if archive.is_empty() && archive.reference() != rec.reference {
            archive.set_reference(rec.reference)?;
        }
        if let Some(point) = rec.objectives {
            archive.insert(rec.candidate.clone(), point);
        }
    }
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_synthetic;
    use crate::objectives::ProblemOptions;

    fn small_problem(seed: u64) -> Problem {
        let domain = generate_synthetic(&[40, 40], 0.0, 5.0, seed).unwrap();
        let q = domain.global_max();
        Problem::new(domain, q, vec![20, 20], ProblemOptions::default()).unwrap()
    }

    fn fast_config() -> OptimizerConfig {
        OptimizerConfig {
            init_points: 5,
            window: 4,
            tolerance: 1e-4,
            max_iterations: 40,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn reference_growth_arithmetic() {
        let pair = |f1: f64, f2: f64| ObjectivePair {
            f1,
            f2,
            params: crate::gumbel::GumbelParams::new(0.0, 1.0).unwrap(),
            m: 10,
            q_hat: 0.0,
        };
        let r = update_reference_point([0.0, 0.0], &pair(0.3, 0.1), 0.5);
        assert_eq!(r, [0.05, 0.05]);
        let r = update_reference_point([0.0, 0.0], &pair(0.2, 0.2), 1.0);
        assert_eq!(r, [0.2, 0.2]);

        // Repeated growth dominates the candidate within
        // ceil(max(f) / (beta * min(f))) steps.
        let p = pair(0.3, 0.1);
        let beta = 0.5;
        let bound = (p.f1.max(p.f2) / (beta * p.f1.min(p.f2))).ceil() as usize;
        let mut r = [0.0, 0.0];
        let mut steps = 0;
        while !(r[0] > p.f1 && r[1] > p.f2) {
            r = update_reference_point(r, &p, beta);
            steps += 1;
            assert!(steps <= bound + 1, "no dominance after {steps} steps");
        }
    }

    #[test]
    fn convergence_rule_cases() {
        // Constant trajectory after one jump: C = 0, stop.
        let traj = [0.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let (c, stop) = check_convergence(&traj, 5, 1e-5);
        assert_eq!(c, Some(0.0));
        assert!(stop);

        // Too short: undefined, no stop.
        let traj = [0.0, 0.1, 0.2, 0.3];
        let (c, stop) = check_convergence(&traj, 5, 1e-5);
        assert_eq!(c, None);
        assert!(!stop);

        // Direct arithmetic.
        let traj = [0.0, 0.10, 0.15, 0.18, 0.20, 0.21, 0.215];
        let (c, stop) = check_convergence(&traj, 5, 1e-5);
        let expect = (0.05 + 0.03 + 0.02 + 0.01 + 0.005) / 5.0;
        assert!((c.unwrap() - expect).abs() < 1e-12, "c = {c:?}");
        assert!(!stop);
    }

    #[test]
    fn selection_tie_break_and_fallback() {
        let pool = full_lattice(&[3, 3]);
        let excluded = HashSet::new();

        // Pool of one.
        let single = vec![BlockSpec::new(vec![2, 2]).unwrap()];
        let got = select_by(&single, &excluded, |_| 1.0).unwrap();
        assert_eq!(got.spec, single[0]);

        // All-zero scores: smallest lexicographic spec, flagged.
        let got = select_by(&pool, &excluded, |_| 0.0).unwrap();
        assert_eq!(got.spec, BlockSpec::new(vec![1, 1]).unwrap());
        assert!(got.fallback);

        // Ties at the top: smallest of the tied specs.
        let got =
            select_by(&pool, &excluded, |s| if s.counts()[0] == 2 { 5.0 } else { 1.0 }).unwrap();
        assert_eq!(got.spec, BlockSpec::new(vec![2, 1]).unwrap());
        assert!(!got.fallback);

        // Exhausted pool.
        let all: HashSet<BlockSpec> = pool.iter().cloned().collect();
        assert!(select_by(&pool, &all, |_| 1.0).is_err());
    }

    #[test]
    fn selection_matches_exhaustive_scan() {
        let pool = full_lattice(&[50]);
        let excluded: HashSet<BlockSpec> =
            [BlockSpec::new(vec![7]).unwrap()].into_iter().collect();
        let score = |s: &BlockSpec| ((s.counts()[0] as f64 * 0.7).sin() * 100.0).abs();
        let got = select_by(&pool, &excluded, score).unwrap();
        let brute = pool
            .iter()
            .filter(|s| !excluded.contains(*s))
            .map(|s| (score(s), s.clone()))
            .fold((f64::NEG_INFINITY, None::<BlockSpec>), |acc, (v, s)| {
                if v > acc.0 {
                    (v, Some(s))
                } else {
                    acc
                }
            });
        assert_eq!(got.spec, brute.1.unwrap());
        assert_eq!(got.ehvi, brute.0);
    }

    #[test]
    fn initial_specs_are_distinct_and_deterministic() {
        let a = initial_specs(7, &[20, 20], 3);
        let b = initial_specs(7, &[20, 20], 3);
        assert_eq!(a, b);
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 7);
        for s in &a {
            assert!(s.counts().iter().zip(&[20usize, 20]).all(|(&c, &u)| c >= 1 && c <= u));
        }
        let c = initial_specs(7, &[20, 20], 4);
        assert_ne!(a, c);
    }

    #[test]
    fn full_lattice_is_lexicographic_and_complete() {
        let l = full_lattice(&[2, 3]);
        assert_eq!(l.len(), 6);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l[0], BlockSpec::new(vec![1, 1]).unwrap());
        assert_eq!(l[5], BlockSpec::new(vec![2, 3]).unwrap());
    }

    #[test]
    fn run_terminates_with_consistent_state() {
        let problem = small_problem(42);
        let result = run(&problem, &fast_config()).unwrap();

        assert!(!result.archive.is_empty(), "archive should not be empty");
        assert!(result.archive.is_mutually_non_dominated());
        assert!(result.hv_trajectory.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(result.hv_trajectory[0], 0.0);

        // No spec evaluated twice.
        let mut seen = HashSet::new();
        for rec in &result.evaluations {
            assert!(seen.insert(rec.spec.clone()), "{} evaluated twice", rec.spec);
        }

        // Reference stayed put across the optimization phase.
        let frozen = result.reference;
        let mut insertion_seen = false;
        for rec in &result.log {
            if rec.phase == Phase::Optimization {
                insertion_seen = true;
                assert_eq!(rec.reference, frozen);
            }
        }
        assert!(insertion_seen);
    }

    #[test]
    fn identical_seeds_reproduce_the_run() {
        let problem_a = small_problem(7);
        let problem_b = small_problem(7);
        let config = fast_config();
        let a = run(&problem_a, &config).unwrap();
        let b = run(&problem_b, &config).unwrap();

        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.reference, b.reference);
        assert_eq!(a.hv_trajectory, b.hv_trajectory);
        assert_eq!(a.log, b.log);
        assert_eq!(a.archive.entries(), b.archive.entries());
        assert_eq!(a.stop, b.stop);
    }

    #[test]
    fn different_seeds_explore_differently() {
        let problem = small_problem(7);
        let a = run(&problem, &fast_config()).unwrap();
        let mut other = fast_config();
        other.seed = 12;
        let b = run(&problem, &other).unwrap();
        let specs_a: Vec<_> = a.evaluations.iter().map(|e| e.spec.clone()).collect();
        let specs_b: Vec<_> = b.evaluations.iter().map(|e| e.spec.clone()).collect();
        assert_ne!(specs_a, specs_b);
    }

    #[test]
    fn replay_reconstructs_archive() {
        let problem = small_problem(19);
        let result = run(&problem, &fast_config()).unwrap();
        let replayed = replay_archive(&result.log).unwrap();
        assert_eq!(replayed.entries(), result.archive.entries());
        assert_eq!(replayed.reference(), result.reference);
    }

    #[test]
    fn pool_exhaustion_stops_cleanly() {
        let domain = generate_synthetic(&[12], 0.0, 5.0, 3).unwrap();
        let q = domain.global_max();
        let problem = Problem::new(domain, q, vec![6], ProblemOptions::default()).unwrap();
        let config = OptimizerConfig {
            init_points: 3,
            window: 50, // unreachable within the tiny lattice
            tolerance: 1e-12,
            max_iterations: 100,
            seed: 2,
            ..Default::default()
        };
        let result = run(&problem, &config).unwrap();
        assert_eq!(result.stop, StopReason::PoolExhausted);
        assert_eq!(result.evaluations.len(), 6, "entire lattice evaluated");
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let problem = small_problem(1);
        for bad in [
            OptimizerConfig { init_points: 1, ..Default::default() },
            OptimizerConfig { window: 0, ..Default::default() },
            OptimizerConfig { tolerance: 0.0, ..Default::default() },
            OptimizerConfig { growth_factor: 0.0, ..Default::default() },
            OptimizerConfig { growth_factor: 1.5, ..Default::default() },
            OptimizerConfig { max_iterations: 0, ..Default::default() },
            OptimizerConfig { init_points: 500, ..Default::default() },
        ] {
            assert!(run(&problem, &bad).is_err());
        }
    }
}
