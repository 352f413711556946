//! Out-of-sample evaluation of chosen block counts.
//!
//! Apply a list of specs (typically a Pareto front) to held-out problems —
//! fresh synthetic replications or new measured domains — and aggregate the
//! objective values per spec. Infeasible (spec, problem) pairs are counted
//! and excluded from the aggregates rather than aborting the report.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{BlockSpec, Problem};

/// Aggregates for one spec, raw values retained.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub spec: BlockSpec,
    pub mean_f1: f64,
    /// Unbiased (n-1) standard deviation; absent with fewer than 2 values.
    pub std_f1: Option<f64>,
    pub mean_f2: f64,
    pub std_f2: Option<f64>,
    /// Feasible replication count behind the aggregates.
    pub replications: usize,
    pub infeasible: usize,
    /// `(problem index, [f1, f2])` for every feasible replication.
    pub raw: Vec<(usize, [f64; 2])>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    // Constant inputs get exact aggregates (sum/n can be one ulp off).
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], (values.len() >= 2).then_some(0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Evaluate every spec on every test problem and aggregate per spec.
pub fn out_of_sample(specs: &[BlockSpec], problems: &[Problem]) -> Result<ValidationReport> {
    if problems.is_empty() {
        return Err(Error::Validation("no test problems".into()));
    }
    out_of_sample_with(specs, |idx| Ok(&problems[idx]), problems.len())
}

/// Streaming form of [`out_of_sample`]: test problems are produced on demand
/// in small batches and dropped afterwards, so hundreds of large synthetic
/// replications never coexist in memory. `make_problem(idx)` must be
/// deterministic in `idx`; results are ordered by replication index either
/// way.
pub fn out_of_sample_streamed<F>(
    specs: &[BlockSpec],
    make_problem: F,
    count: usize,
) -> Result<ValidationReport>
where
    F: Fn(usize) -> Result<Problem> + Sync,
{
    struct Slot(Problem);
    out_of_sample_with_owned(specs, |idx| make_problem(idx).map(Slot), count, |s| &s.0)
}

fn out_of_sample_with_owned<T, F, G>(
    specs: &[BlockSpec],
    make: F,
    count: usize,
    as_problem: G,
) -> Result<ValidationReport>
where
    F: Fn(usize) -> Result<T> + Sync,
    G: Fn(&T) -> &Problem + Sync,
    T: Send + Sync,
{
    if specs.is_empty() {
        return Err(Error::Validation("no specs to validate".into()));
    }
    if count == 0 {
        return Err(Error::Validation("no test problems".into()));
    }

    let batch = rayon::current_num_threads().max(2);
    // raw[spec_idx] accumulates (problem index, point); infeasible counts too.
    let mut raw: Vec<Vec<(usize, [f64; 2])>> = vec![Vec::new(); specs.len()];
    let mut infeasible = vec![0usize; specs.len()];

    let mut start = 0;
    while start < count {
        let end = (start + batch).min(count);
        let problems: Vec<T> =
            (start..end).map(&make).collect::<Result<_>>()?;
        let outcomes: Vec<(usize, Vec<Option<[f64; 2]>>)> = problems
            .par_iter()
            .enumerate()
            .map(|(offset, holder)| {
                let problem = as_problem(holder);
                let per_spec = specs
                    .iter()
                    .map(|spec| problem.evaluate(spec).map(|o| o.ok().map(|p| p.point())))
                    .collect::<Result<Vec<_>>>()?;
                Ok((start + offset, per_spec))
            })
            .collect::<Result<_>>()?;
        for (idx, per_spec) in outcomes {
            for (spec_idx, outcome) in per_spec.into_iter().enumerate() {
                match outcome {
                    Some(point) => raw[spec_idx].push((idx, point)),
                    None => infeasible[spec_idx] += 1,
                }
            }
        }
        start = end;
    }

    let rows = specs
        .iter()
        .enumerate()
        .map(|(spec_idx, spec)| {
            let mut raw_rows = std::mem::take(&mut raw[spec_idx]);
            raw_rows.sort_by_key(|(idx, _)| *idx);
            if raw_rows.is_empty() {
                return ValidationRow {
                    spec: spec.clone(),
                    mean_f1: f64::NAN,
                    std_f1: None,
                    mean_f2: f64::NAN,
                    std_f2: None,
                    replications: 0,
                    infeasible: infeasible[spec_idx],
                    raw: raw_rows,
                };
            }
            let f1: Vec<f64> = raw_rows.iter().map(|(_, p)| p[0]).collect();
            let f2: Vec<f64> = raw_rows.iter().map(|(_, p)| p[1]).collect();
            let (mean_f1, std_f1) = mean_std(&f1);
            let (mean_f2, std_f2) = mean_std(&f2);
            ValidationRow {
                spec: spec.clone(),
                mean_f1,
                std_f1,
                mean_f2,
                std_f2,
                replications: raw_rows.len(),
                infeasible: infeasible[spec_idx],
                raw: raw_rows,
            }
        })
        .collect();

    Ok(ValidationReport { rows })
}

fn out_of_sample_with<'a, F>(
    specs: &[BlockSpec],
    get: F,
    count: usize,
) -> Result<ValidationReport>
where
    F: Fn(usize) -> Result<&'a Problem> + Sync,
{
    struct Ref<'a>(&'a Problem);
    out_of_sample_with_owned(specs, |idx| get(idx).map(Ref), count, |r| r.0)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "paired samples required");
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Average rank over the tie group, 1-based.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_synthetic;
    use crate::objectives::ProblemOptions;

    fn test_problem(seed: u64) -> Problem {
        let domain = generate_synthetic(&[30, 30], 0.0, 5.0, seed).unwrap();
        let q = domain.global_max();
        Problem::new(domain, q, vec![30, 30], ProblemOptions::default()).unwrap()
    }

    fn spec(counts: &[usize]) -> BlockSpec {
        BlockSpec::new(counts.to_vec()).unwrap()
    }

    #[test]
    fn single_problem_gives_means_without_std() {
        let problems = vec![test_problem(1)];
        let report = out_of_sample(&[spec(&[5, 6])], &problems).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.replications, 1);
        assert!(row.std_f1.is_none() && row.std_f2.is_none());
        let direct = problems[0].eval_objectives(&spec(&[5, 6])).unwrap();
        assert_eq!(row.mean_f1, direct.f1);
        assert_eq!(row.mean_f2, direct.f2);
    }

    #[test]
    fn identical_replications_have_zero_std() {
        // Same seed: deterministic evaluation makes replicas identical.
        let problems: Vec<Problem> = (0..5).map(|_| test_problem(9)).collect();
        let report = out_of_sample(&[spec(&[4, 5])], &problems).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.replications, 5);
        assert_eq!(row.std_f1, Some(0.0));
        assert_eq!(row.std_f2, Some(0.0));
    }

    #[test]
    fn aggregates_recomputable_from_raw() {
        let problems: Vec<Problem> = (0..6).map(test_problem).collect();
        let report = out_of_sample(&[spec(&[3, 7]), spec(&[10, 2])], &problems).unwrap();
        for row in &report.rows {
            let f1: Vec<f64> = row.raw.iter().map(|(_, p)| p[0]).collect();
            let (mean, std) = mean_std(&f1);
            assert_eq!(mean, row.mean_f1);
            assert_eq!(std, row.std_f1);
        }
    }

    #[test]
    fn infeasible_pairs_are_footnoted_not_fatal() {
        // 40 blocks on a 30-length dimension: infeasible for this domain.
        let problems = vec![test_problem(2), test_problem(3)];
        let report =
            out_of_sample(&[spec(&[40, 2]), spec(&[5, 5])], &problems).unwrap();
        assert_eq!(report.rows[0].replications, 0);
        assert_eq!(report.rows[0].infeasible, 2);
        assert_eq!(report.rows[1].replications, 2);
        assert_eq!(report.rows[1].infeasible, 0);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let problems = vec![test_problem(1)];
        assert!(out_of_sample(&[], &problems).is_err());
        assert!(out_of_sample(&[spec(&[2, 2])], &[]).is_err());
    }

    #[test]
    fn replication_means_show_the_block_count_tradeoff() {
        // Across specs of increasing block count, mean prediction error
        // rises and mean KS falls on held-out replications.
        let specs: Vec<BlockSpec> = [
            vec![2usize, 3, 3],
            vec![3, 4, 4],
            vec![4, 6, 5],
            vec![6, 8, 6],
            vec![8, 10, 8],
        ]
        .into_iter()
        .map(|c| BlockSpec::new(c).unwrap())
        .collect();
        let report = out_of_sample_streamed(
            &specs,
            |idx| {
                let d = crate::grid::generate_synthetic(&[64, 64, 64], 0.0, 5.0, 400 + idx as u64)?;
                let q = d.global_max();
                Problem::new(d, q, vec![30, 30, 30], ProblemOptions::default())
            },
            12,
        )
        .unwrap();
        let ms: Vec<f64> = specs.iter().map(|s| s.block_count() as f64).collect();
        let f1: Vec<f64> = report.rows.iter().map(|r| r.mean_f1).collect();
        let f2: Vec<f64> = report.rows.iter().map(|r| r.mean_f2).collect();
        assert!(spearman(&ms, &f1) > 0.0, "f1 trend: {f1:?}");
        assert!(spearman(&ms, &f2) < 0.0, "f2 trend: {f2:?}");
    }

    #[test]
    fn spearman_reference_values() {
        // Perfect monotone increasing.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        // Perfect monotone decreasing.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Monotone but nonlinear: rank correlation is still exactly 1.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 256.0]) - 1.0).abs() < 1e-12);
        // Ties get averaged ranks.
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!(rho > 0.9 && rho <= 1.0, "rho {rho}");
        // Constant input: correlation undefined, reported as 0.
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }
}
