//! Comparison strategies sharing the optimizer's evaluation pipeline.
//!
//! Three ways to spend the same evaluation budget: exhaustive enumeration
//! (the exact answer, when affordable), uniform random sampling without
//! replacement, and a deterministic structured grid. Each run records its
//! evaluations in a canonical order and scores them by hypervolume against a
//! supplied reference point — for a fair comparison that reference should be
//! the one the optimizer run settled on.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mobo::{full_lattice, OptimizationResult};
use crate::objectives::{BlockSpec, EvalRecord, ObjectivePair, Problem};
use crate::pareto::{dominates, ParetoArchive};
use crate::rng::seeded;
use rand::Rng;

/// Default ceiling on enumeration size.
pub const ENUMERATION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Enumeration,
    Random,
    Structured,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Enumeration => write!(f, "enumeration"),
            Strategy::Random => write!(f, "random"),
            Strategy::Structured => write!(f, "structured"),
        }
    }
}

/// One baseline execution: ordered evaluations plus the hypervolume
/// bookkeeping under a fixed reference point.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub strategy: Strategy,
    pub label: String,
    pub reference: [f64; 2],
    pub evaluations: Vec<EvalRecord>,
    /// Archive of the evaluated points under `reference`.
    pub archive: ParetoArchive,
    /// Hypervolume after each evaluation, leading zero included.
    pub hv_trajectory: Vec<f64>,
    pub budget_used: usize,
}

/// Evaluate `specs` in order (concurrently; order restored afterwards) and
/// fold them into an archive under `reference`.
fn execute(
    problem: &Problem,
    specs: &[BlockSpec],
    reference: [f64; 2],
    strategy: Strategy,
    label: String,
    timing: bool,
) -> Result<BaselineRun> {
    let outcomes: Vec<(EvalRecord, Option<ObjectivePair>)> = specs
        .par_iter()
        .map(|spec| {
            let started = std::time::Instant::now();
            let outcome = problem.evaluate(spec)?;
            let wall_ms = timing.then(|| started.elapsed().as_secs_f64() * 1e3);
            let record = EvalRecord::new(problem, spec, &outcome, wall_ms)?;
            Ok((record, outcome.ok()))
        })
        .collect::<Result<_>>()?;

    let mut archive = ParetoArchive::new(reference)?;
    let mut hv_trajectory = Vec::with_capacity(specs.len() + 1);
    hv_trajectory.push(0.0);
    for (record, pair) in &outcomes {
        if let Some(pair) = pair {
            archive.insert(record.spec.clone(), pair.point());
        }
        hv_trajectory.push(archive.hypervolume());
    }
    Ok(BaselineRun {
        strategy,
        label,
        reference,
        evaluations: outcomes.into_iter().map(|(r, _)| r).collect(),
        archive,
        hv_trajectory,
        budget_used: specs.len(),
    })
}

/// Enumeration output: the run plus the exact (unconstrained) Pareto front.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub run: BaselineRun,
    /// Non-dominated set over every feasible evaluation, independent of the
    /// reference point.
    pub front: Vec<(BlockSpec, ObjectivePair)>,
}

/// Strictly non-dominated subset of evaluated pairs, independent of any
/// reference point (duplicates of a front point are kept).
pub fn exact_front(mut pairs: Vec<(BlockSpec, ObjectivePair)>) -> Vec<(BlockSpec, ObjectivePair)> {
    pairs.sort_by(|a, b| {
        (a.1.f1, a.1.f2)
            .partial_cmp(&(b.1.f1, b.1.f2))
            .expect("finite objectives")
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut front: Vec<(BlockSpec, ObjectivePair)> = Vec::new();
    for (spec, pair) in pairs {
        let dominated = front
            .last()
            .map(|(_, best)| dominates(best.point(), pair.point()))
            .unwrap_or(false);
        if !dominated {
            front.push((spec, pair));
        }
    }
    front
}

/// Evaluate every spec in the decision box (within the cap) and return both
/// the exact front and the hypervolume bookkeeping under `reference`.
pub fn enumerate_all(
    problem: &Problem,
    reference: [f64; 2],
    cap: Option<usize>,
    timing: bool,
) -> Result<EnumerationResult> {
    let cap = cap.unwrap_or(ENUMERATION_CAP);
    let size = problem.lattice_size();
    if size > cap {
        return Err(Error::Baseline(format!(
            "enumeration of {size} specs exceeds the cap of {cap}"
        )));
    }
    let specs = full_lattice(problem.bounds());
    let run = execute(
        problem,
        &specs,
        reference,
        Strategy::Enumeration,
        "enumeration".into(),
        timing,
    )?;
    let feasible: Vec<(BlockSpec, ObjectivePair)> = run
        .evaluations
        .iter()
        .filter_map(|r| r.pair.map(|p| (r.spec.clone(), p)))
        .collect();
    let front = exact_front(feasible);
    Ok(EnumerationResult { run, front })
}

/// `budget` distinct specs drawn uniformly without replacement, evaluated in
/// draw order.
pub fn random_baseline(
    problem: &Problem,
    reference: [f64; 2],
    budget: usize,
    seed: u64,
    timing: bool,
) -> Result<BaselineRun> {
    if budget == 0 {
        return Err(Error::Baseline("zero budget".into()));
    }
    let size = problem.lattice_size();
    if budget > size {
        return Err(Error::Baseline(format!(
            "budget {budget} exceeds the {size}-point lattice"
        )));
    }
    let bounds = problem.bounds();
    let mut rng = seeded(seed);
    let specs: Vec<BlockSpec> = if budget * 2 >= size {
        // Dense draw: partial Fisher-Yates over the whole lattice.
        let mut all = full_lattice(bounds);
        for i in 0..budget {
            let j = i + rng.random_range(0..all.len() - i);
            all.swap(i, j);
        }
        all.truncate(budget);
        all
    } else {
        let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(budget);
        let mut out = Vec::with_capacity(budget);
        while out.len() < budget {
            let counts: Vec<usize> =
                bounds.iter().map(|&u| 1 + rng.random_range(0..u)).collect();
            if seen.insert(counts.clone()) {
                out.push(BlockSpec::new(counts)?);
            }
        }
        out
    };
    execute(
        problem,
        &specs,
        reference,
        Strategy::Random,
        format!("random-{seed}"),
        timing,
    )
}

/// Level counts per dimension: start at the ceiling of the budget's n-th
/// root and shave dimensions front to back while the grid still covers the
/// budget.
fn grid_levels(budget: usize, dims: usize) -> Vec<usize> {
    let root = (budget as f64).powf(1.0 / dims as f64).ceil() as usize;
    let mut levels = vec![root.max(1); dims];
    loop {
        let mut reduced = false;
        for dim in 0..dims {
            while levels[dim] > 1 {
                levels[dim] -= 1;
                let product: usize = levels.iter().product();
                if product >= budget {
                    reduced = true;
                } else {
                    levels[dim] += 1;
                    break;
                }
            }
        }
        if !reduced {
            return levels;
        }
    }
}

/// Equidistant integer levels across `1..=bound`.
fn level_values(bound: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![bound.div_ceil(2)];
    }
    (0..count)
        .map(|i| {
            let v = 1.0 + i as f64 * (bound as f64 - 1.0) / (count as f64 - 1.0);
            (v.round() as usize).clamp(1, bound)
        })
        .collect()
}

/// Deterministic structured point set.
///
/// One dimension places `budget` points starting at 2 with stride
/// `bound / budget`. Higher dimensions lay a near-square grid of
/// at least `budget` points and trim the excess: the corner points first,
/// then the grid's center point, then points from the largest index tuple
/// downward.
pub fn structured_grid(
    problem: &Problem,
    reference: [f64; 2],
    budget: usize,
    timing: bool,
) -> Result<BaselineRun> {
    if budget == 0 {
        return Err(Error::Baseline("zero budget".into()));
    }
    let bounds = problem.bounds();
    let specs: Vec<BlockSpec> = if bounds.len() == 1 {
        let u = bounds[0];
        let step = (u / budget).max(1);
        let mut points: Vec<usize> =
            (0..budget).map(|i| (2 + i * step).min(u)).collect();
        points.dedup();
        if points.len() < budget {
            return Err(Error::Baseline(format!(
                "structured 1-D rule cannot place {budget} distinct points in 1..={u}"
            )));
        }
        points
            .into_iter()
            .map(|d| BlockSpec::new(vec![d]))
            .collect::<Result<_>>()?
    } else {
        let levels = grid_levels(budget, bounds.len());
        for (dim, (&g, &u)) in levels.iter().zip(bounds).enumerate() {
            if g > u {
                return Err(Error::Baseline(format!(
                    "structured grid needs {g} levels in dimension {dim}, bound is {u}"
                )));
            }
        }
        let axes: Vec<Vec<usize>> = levels
            .iter()
            .zip(bounds)
            .map(|(&g, &u)| level_values(u, g))
            .collect();

        // Cartesian product of level indices, lexicographic.
        let mut grid: Vec<Vec<usize>> = vec![Vec::new()];
        for axis_len in levels.iter() {
            let mut next = Vec::with_capacity(grid.len() * axis_len);
            for prefix in &grid {
                for i in 0..*axis_len {
                    let mut idx = prefix.clone();
                    idx.push(i);
                    next.push(idx);
                }
            }
            grid = next;
        }

        let excess = grid.len() - budget;
        if excess > 0 {
            // Skip priority: corner points in lexicographic order, then the
            // center point, then the largest index tuples.
            let mut priority: Vec<Vec<usize>> = vec![Vec::new()];
            for &g in &levels {
                let mut next = Vec::new();
                for prefix in &priority {
                    for &i in &[0, g - 1] {
                        let mut idx = prefix.clone();
                        idx.push(i);
                        next.push(idx);
                    }
                }
                priority = next;
            }
            priority.sort();
            priority.dedup();
            let center: Vec<usize> = levels.iter().map(|&g| g / 2).collect();
            if !priority.contains(&center) {
                priority.push(center);
            }
            let skip: HashSet<Vec<usize>> = priority.into_iter().take(excess).collect();
            let skipped = skip.len();
            grid.retain(|idx| !skip.contains(idx));
            grid.truncate(grid.len() - (excess - skipped));
        }

        grid.into_iter()
            .map(|idx| {
                BlockSpec::new(
                    idx.iter().zip(&axes).map(|(&i, axis)| axis[i]).collect(),
                )
            })
            .collect::<Result<_>>()?
    };

    execute(
        problem,
        &specs,
        reference,
        Strategy::Structured,
        "structured".into(),
        timing,
    )
}

/// One comparison table row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub final_hv: f64,
    /// Percent by which the optimizer's final HV exceeds this run's.
    pub mobo_advantage_pct: f64,
    pub evaluations: usize,
}

/// HV comparison of baseline runs against an optimizer run.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub reference: [f64; 2],
    pub rows: Vec<ComparisonRow>,
    /// Labelled hypervolume trajectories for plotting.
    pub trajectories: Vec<(String, Vec<f64>)>,
}

/// Compare baselines to an optimizer run. Refuses mismatched reference
/// points: hypervolumes under different references are not comparable.
pub fn compare_hv(runs: &[BaselineRun], mobo: &OptimizationResult) -> Result<Comparison> {
    for run in runs {
        if run.reference != mobo.reference {
            return Err(Error::Comparison(format!(
                "run `{}` used reference {:?}, optimizer used {:?}",
                run.label, run.reference, mobo.reference
            )));
        }
    }
    let mobo_hv = mobo.archive.hypervolume();
    let advantage = |hv: f64| {
        if hv == mobo_hv {
            0.0
        } else if hv > 0.0 {
            (mobo_hv - hv) / hv * 100.0
        } else {
            f64::INFINITY
        }
    };
    let mut rows = vec![ComparisonRow {
        label: "mobo".into(),
        final_hv: mobo_hv,
        mobo_advantage_pct: 0.0,
        evaluations: mobo.evaluations.len(),
    }];
    let mut trajectories = vec![("mobo".to_string(), mobo.hv_trajectory.clone())];
    for run in runs {
        let hv = run.archive.hypervolume();
        rows.push(ComparisonRow {
            label: run.label.clone(),
            final_hv: hv,
            mobo_advantage_pct: advantage(hv),
            evaluations: run.budget_used,
        });
        trajectories.push((run.label.clone(), run.hv_trajectory.clone()));
    }
    Ok(Comparison { reference: mobo.reference, rows, trajectories })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_synthetic;
    use crate::mobo::{run, OptimizerConfig};
    use crate::objectives::ProblemOptions;

    fn problem_1d(bound: usize, seed: u64) -> Problem {
        let domain = generate_synthetic(&[400], 0.0, 5.0, seed).unwrap();
        let q = domain.global_max();
        Problem::new(domain, q, vec![bound], ProblemOptions::default()).unwrap()
    }

    #[test]
    fn enumeration_covers_the_lattice() {
        let p = problem_1d(50, 1);
        let result = enumerate_all(&p, [0.5, 0.5], None, false).unwrap();
        assert_eq!(result.run.evaluations.len(), 50);
        // D = 1 gives a single block, below the floor: infeasible.
        let infeasible: Vec<_> =
            result.run.evaluations.iter().filter(|r| r.pair.is_none()).collect();
        assert_eq!(infeasible.len(), 1);
        assert_eq!(infeasible[0].spec, BlockSpec::new(vec![1]).unwrap());
        assert!(!result.front.is_empty());

        // The front is mutually non-dominated and no feasible point
        // dominates a front member.
        for (i, (_, a)) in result.front.iter().enumerate() {
            for (j, (_, b)) in result.front.iter().enumerate() {
                if i != j {
                    assert!(!dominates(a.point(), b.point()));
                }
            }
        }
        for rec in &result.run.evaluations {
            if let Some(pair) = rec.pair {
                let on_front =
                    result.front.iter().any(|(_, fp)| fp.point() == pair.point());
                let dominated = result
                    .front
                    .iter()
                    .any(|(_, fp)| dominates(fp.point(), pair.point()));
                assert!(on_front || dominated, "{} escaped the front", rec.spec);
            }
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let p = problem_1d(50, 1);
        assert!(enumerate_all(&p, [0.5, 0.5], Some(10), false).is_err());
    }

    #[test]
    fn random_baseline_is_seeded_and_distinct() {
        let p = problem_1d(200, 3);
        let a = random_baseline(&p, [0.5, 0.5], 20, 7, false).unwrap();
        let b = random_baseline(&p, [0.5, 0.5], 20, 7, false).unwrap();
        let specs =
            |r: &BaselineRun| r.evaluations.iter().map(|e| e.spec.clone()).collect::<Vec<_>>();
        assert_eq!(specs(&a), specs(&b));

        let c = random_baseline(&p, [0.5, 0.5], 20, 8, false).unwrap();
        assert_ne!(specs(&a), specs(&c));

        let set: HashSet<_> = specs(&a).into_iter().collect();
        assert_eq!(set.len(), 20, "draws must be distinct");

        assert!(a.hv_trajectory.windows(2).all(|w| w[1] >= w[0]));
        assert!(random_baseline(&p, [0.5, 0.5], 0, 1, false).is_err());
        assert!(random_baseline(&p, [0.5, 0.5], 201, 1, false).is_err());
    }

    #[test]
    fn dense_random_draw_covers_whole_lattice() {
        let p = problem_1d(30, 4);
        let r = random_baseline(&p, [0.5, 0.5], 30, 5, false).unwrap();
        let set: HashSet<_> = r.evaluations.iter().map(|e| e.spec.clone()).collect();
        assert_eq!(set.len(), 30);
    }

    #[test]
    fn structured_1d_reference_points() {
        let p = problem_1d(200, 5);
        let run = structured_grid(&p, [0.5, 0.5], 20, false).unwrap();
        let got: Vec<usize> =
            run.evaluations.iter().map(|e| e.spec.counts()[0]).collect();
        let expect: Vec<usize> = (0..20).map(|i| 2 + 10 * i).collect();
        assert_eq!(got, expect, "20 equidistant points from 2 to 192");
    }

    #[test]
    fn structured_2d_skips_corners_and_center() {
        let domain = generate_synthetic(&[210, 210], 0.0, 5.0, 6).unwrap();
        let q = domain.global_max();
        let p =
            Problem::new(domain, q, vec![200, 200], ProblemOptions::default()).unwrap();
        let run = structured_grid(&p, [0.5, 0.5], 67, false).unwrap();
        assert_eq!(run.evaluations.len(), 67);

        // An 8x9 grid loses its 4 corners and center.
        let levels = grid_levels(67, 2);
        assert_eq!(levels.iter().product::<usize>(), 72);
        let mut sorted_levels = levels.clone();
        sorted_levels.sort();
        assert_eq!(sorted_levels, vec![8, 9]);

        let specs: HashSet<Vec<usize>> =
            run.evaluations.iter().map(|e| e.spec.counts().to_vec()).collect();
        assert_eq!(specs.len(), 67);
        for corner in [[1, 1], [1, 200], [200, 1], [200, 200]] {
            assert!(!specs.contains(corner.as_slice()), "corner {corner:?} not skipped");
        }
    }

    #[test]
    fn structured_3d_levels_factorization() {
        let levels = grid_levels(75, 3);
        let mut sorted = levels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![3, 5, 5]);
        assert_eq!(levels.iter().product::<usize>(), 75);

        let domain = generate_synthetic(&[60, 60, 60], 0.0, 5.0, 7).unwrap();
        let q = domain.global_max();
        let p =
            Problem::new(domain, q, vec![50, 50, 50], ProblemOptions::default()).unwrap();
        let run = structured_grid(&p, [0.5, 0.5], 75, false).unwrap();
        assert_eq!(run.evaluations.len(), 75);
    }

    #[test]
    fn structured_is_deterministic() {
        let p = problem_1d(100, 8);
        let a = structured_grid(&p, [0.4, 0.4], 10, false).unwrap();
        let b = structured_grid(&p, [0.4, 0.4], 10, false).unwrap();
        let specs =
            |r: &BaselineRun| r.evaluations.iter().map(|e| e.spec.clone()).collect::<Vec<_>>();
        assert_eq!(specs(&a), specs(&b));
        assert!(structured_grid(&p, [0.4, 0.4], 0, false).is_err());
    }

    #[test]
    fn full_budget_random_equals_enumeration_front() {
        let p = problem_1d(25, 11);
        let r = [0.6, 0.6];
        let enumeration = enumerate_all(&p, r, None, false).unwrap();
        let random = random_baseline(&p, r, 25, 9, false).unwrap();
        // Same evaluations in a different order: identical archive under the
        // same reference, and the same non-dominated set.
        assert_eq!(random.archive.entries(), enumeration.run.archive.entries());
        let front_points: Vec<[f64; 2]> =
            enumeration.front.iter().map(|(_, p)| p.point()).collect();
        let random_front = exact_front(
            random
                .evaluations
                .iter()
                .filter_map(|rec| rec.pair.map(|p| (rec.spec.clone(), p)))
                .collect(),
        );
        let random_points: Vec<[f64; 2]> =
            random_front.iter().map(|(_, p)| p.point()).collect();
        assert_eq!(random_points, front_points);
    }

    #[test]
    fn comparison_requires_shared_reference() {
        let p = problem_1d(40, 9);
        let config = OptimizerConfig {
            init_points: 4,
            window: 3,
            tolerance: 1e-3,
            max_iterations: 15,
            seed: 5,
            ..Default::default()
        };
        let mobo = run(&p, &config).unwrap();
        let matching = random_baseline(&p, mobo.reference, 10, 1, false).unwrap();
        let mismatched = random_baseline(&p, [0.9, 0.9], 10, 1, false).unwrap();

        assert!(compare_hv(&[mismatched], &mobo).is_err());

        let cmp = compare_hv(&[matching], &mobo).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        assert_eq!(cmp.rows[0].label, "mobo");
        assert_eq!(cmp.rows[0].mobo_advantage_pct, 0.0);
        assert_eq!(cmp.trajectories.len(), 2);
    }

    #[test]
    fn enumeration_front_dominates_optimizer_archive() {
        let p = problem_1d(40, 10);
        let config = OptimizerConfig {
            init_points: 4,
            window: 3,
            tolerance: 1e-4,
            max_iterations: 20,
            seed: 3,
            ..Default::default()
        };
        let mobo = run(&p, &config).unwrap();
        let enumeration = enumerate_all(&p, mobo.reference, None, false).unwrap();

        // Enumeration's HV under the shared reference is an upper bound.
        assert!(
            enumeration.run.archive.hypervolume() >= mobo.archive.hypervolume() - 1e-12
        );
        // No archived point strictly dominates a true-front point.
        for (_, pair) in &enumeration.front {
            for (_, archived) in mobo.archive.entries() {
                assert!(!dominates(*archived, pair.point()));
            }
        }
    }
}
