//! From block counts to objective values.
//!
//! A [`BlockSpec`] says how many blocks to cut along each dimension. Given a
//! [`Problem`] (fit domain, reference extreme, bounds, estimator), evaluating
//! a spec extracts the block maxima, fits a Gumbel distribution, and produces
//! the bi-objective pair
//!
//! - `f1 = |(q - q_hat)/q|`, the relative error of the predicted extreme
//!   `q_hat` against the observed reference extreme `q`, and
//! - `f2`, the Kolmogorov–Smirnov statistic of the fit.
//!
//! Evaluations are cached per spec so repeated queries (optimizer, baselines,
//! reports) never redo the work, and infeasible outcomes (too few blocks,
//! degenerate fits) are recorded as data rather than raised as failures.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, InfeasibleReason, Result};
use crate::grid::GriddedDomain;
use crate::gumbel::{
    self, Estimator, GumbelParams, MaximaSample, SolverOptions,
};

/// Per-dimension block counts: the integer decision variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockSpec(Vec<usize>);

impl BlockSpec {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Problem("empty block spec".into()));
        }
        if counts.contains(&0) {
            return Err(Error::Problem(format!("zero block count in {counts:?}")));
        }
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    /// Total number of blocks, `m = prod(counts)`.
    pub fn block_count(&self) -> usize {
        self.0.iter().product()
    }
}

impl std::fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl std::str::FromStr for BlockSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counts: Vec<usize> = s
            .split('x')
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Problem(format!("bad block spec component `{tok}`")))
            })
            .collect::<Result<_>>()?;
        Self::new(counts)
    }
}

/// Objective values for one evaluated spec, with the fit behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    /// Relative prediction error, `|(q - q_hat)/q|`.
    pub f1: f64,
    /// Kolmogorov–Smirnov statistic, in [0, 1].
    pub f2: f64,
    /// Fitted Gumbel parameters.
    pub params: GumbelParams,
    /// Number of block maxima the fit used.
    pub m: usize,
    /// Predicted extreme (return level at 1/m).
    pub q_hat: f64,
}

impl ObjectivePair {
    pub fn point(&self) -> [f64; 2] {
        [self.f1, self.f2]
    }
}

/// Outcome of evaluating one spec: a pair, or the reason none exists.
pub type EvalOutcome = std::result::Result<ObjectivePair, InfeasibleReason>;

/// Tuning knobs for [`Problem`] construction.
#[derive(Debug, Clone)]
pub struct ProblemOptions {
    pub estimator: Estimator,
    /// Minimum admissible number of blocks. At least 2 (the return level is
    /// undefined below that); raise it to demand more maxima per fit.
    pub block_count_floor: usize,
    /// Per-dimension multipliers tying the full spec to a single decision
    /// value: `counts[j] = factors[j] * d`. When set, the decision space is
    /// one-dimensional regardless of the domain dimension.
    pub coupling: Option<Vec<usize>>,
    /// How many fit-region-sized tiles cover the reference region. The
    /// predicted extreme targets the reference region's block population,
    /// so the return level is taken at `multiple * m` blocks. Leave at 1
    /// whenever the reference region is the fit region itself.
    pub reference_block_multiple: usize,
    pub solver: SolverOptions,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::default(),
            block_count_floor: 2,
            coupling: None,
            reference_block_multiple: 1,
            solver: SolverOptions::default(),
        }
    }
}

/// A fully specified block-size selection problem.
///
/// Holds the fit domain, the reference extreme `q` (computed once from the
/// designated reference region, not from the fit region), the per-dimension
/// upper bounds of the decision space, and the evaluation cache.
#[derive(Debug)]
pub struct Problem {
    fit_domain: GriddedDomain,
    reference_extreme_q: f64,
    bounds: Vec<usize>,
    opts: ProblemOptions,
    cache: Mutex<HashMap<BlockSpec, EvalOutcome>>,
}

impl Problem {
    pub fn new(
        fit_domain: GriddedDomain,
        reference_extreme_q: f64,
        bounds: Vec<usize>,
        opts: ProblemOptions,
    ) -> Result<Self> {
        if !reference_extreme_q.is_finite() {
            return Err(Error::Problem(format!(
                "reference extreme must be finite, got {reference_extreme_q}"
            )));
        }
        if opts.block_count_floor < 2 {
            return Err(Error::Problem(format!(
                "block count floor must be at least 2, got {}",
                opts.block_count_floor
            )));
        }
        if opts.reference_block_multiple < 1 {
            return Err(Error::Problem("reference block multiple must be at least 1".into()));
        }
        let shape = fit_domain.shape();
        match &opts.coupling {
            None => {
                if bounds.len() != shape.len() {
                    return Err(Error::Problem(format!(
                        "{} bounds for a {}-dimensional domain",
                        bounds.len(),
                        shape.len()
                    )));
                }
                for (dim, (&u, &l)) in bounds.iter().zip(shape).enumerate() {
                    if u < 1 || u > l {
                        return Err(Error::Problem(format!(
                            "bound {u} outside 1..={l} in dimension {dim}"
                        )));
                    }
                }
            }
            Some(factors) => {
                if factors.len() != shape.len() {
                    return Err(Error::Problem(format!(
                        "coupling has {} factors for a {}-dimensional domain",
                        factors.len(),
                        shape.len()
                    )));
                }
                if factors.contains(&0) {
                    return Err(Error::Problem("zero coupling factor".into()));
                }
                if bounds.len() != 1 {
                    return Err(Error::Problem(format!(
                        "coupled problems take a single decision bound, got {}",
                        bounds.len()
                    )));
                }
                let u = bounds[0];
                if u < 1 {
                    return Err(Error::Problem("decision bound must be at least 1".into()));
                }
                for (dim, (&f, &l)) in factors.iter().zip(shape).enumerate() {
                    if f * u > l {
                        return Err(Error::Problem(format!(
                            "coupling factor {f} times bound {u} exceeds length {l} in dimension {dim}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            fit_domain,
            reference_extreme_q,
            bounds,
            opts,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn fit_domain(&self) -> &GriddedDomain {
        &self.fit_domain
    }

    pub fn reference_extreme(&self) -> f64 {
        self.reference_extreme_q
    }

    /// Upper bounds of the decision space (length 1 when coupled).
    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    /// Dimension of the decision space.
    pub fn decision_dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn estimator(&self) -> Estimator {
        self.opts.estimator
    }

    pub fn block_count_floor(&self) -> usize {
        self.opts.block_count_floor
    }

    pub fn is_coupled(&self) -> bool {
        self.opts.coupling.is_some()
    }

    /// Number of points in the decision lattice.
    pub fn lattice_size(&self) -> usize {
        self.bounds.iter().product()
    }

    /// Expand a decision spec to full per-dimension block counts.
    ///
    /// Identity for uncoupled problems; applies the coupling multipliers to
    /// the single decision value otherwise.
    pub fn expand(&self, spec: &BlockSpec) -> Result<BlockSpec> {
        match &self.opts.coupling {
            None => {
                if spec.ndim() != self.fit_domain.ndim() {
                    return Err(Error::Problem(format!(
                        "spec {spec} has {} dimensions, domain has {}",
                        spec.ndim(),
                        self.fit_domain.ndim()
                    )));
                }
                Ok(spec.clone())
            }
            Some(factors) => {
                if spec.ndim() != 1 {
                    return Err(Error::Problem(format!(
                        "coupled problems take a scalar decision, got {spec}"
                    )));
                }
                let d = spec.counts()[0];
                BlockSpec::new(factors.iter().map(|&f| f * d).collect())
            }
        }
    }

    /// Evaluate a decision spec, consulting and filling the cache.
    ///
    /// The outer `Result` carries structural errors (wrong dimensionality);
    /// the inner [`EvalOutcome`] distinguishes usable pairs from infeasible
    /// evaluations.
    pub fn evaluate(&self, spec: &BlockSpec) -> Result<EvalOutcome> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(spec) {
            return Ok(hit.clone());
        }
        let outcome = self.evaluate_uncached(spec)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(spec.clone(), outcome.clone());
        Ok(outcome)
    }

    /// Spec-contract form of [`Self::evaluate`]: infeasible outcomes surface
    /// as [`Error::Infeasible`].
    pub fn eval_objectives(&self, spec: &BlockSpec) -> Result<ObjectivePair> {
        self.evaluate(spec)?.map_err(Error::Infeasible)
    }

    fn evaluate_uncached(&self, spec: &BlockSpec) -> Result<EvalOutcome> {
        let full = self.expand(spec)?;
        let shape = self.fit_domain.shape();
        for (dim, (&count, &len)) in full.counts().iter().zip(shape).enumerate() {
            if count > len {
                return Ok(Err(InfeasibleReason::SpecExceedsLattice { dim, count, len }));
            }
        }
        let m = full.block_count();
        if m < self.opts.block_count_floor {
            return Ok(Err(InfeasibleReason::BlockCountBelowFloor {
                m,
                floor: self.opts.block_count_floor,
            }));
        }
        if self.reference_extreme_q == 0.0 {
            return Ok(Err(InfeasibleReason::ZeroReferenceExtreme));
        }

        let sample = extract_block_maxima(&self.fit_domain, &full)?;
        let fit = match self.opts.estimator {
            Estimator::Mle => gumbel::fit_mle(&sample, self.opts.solver),
            Estimator::Map => gumbel::fit_map(&sample, self.opts.solver),
        };
        let report = match fit {
            Ok(report) => report,
            Err(Error::Estimation(_)) => return Ok(Err(InfeasibleReason::DegenerateSample)),
            Err(other) => return Err(other),
        };
        if !report.converged {
            return Ok(Err(InfeasibleReason::FitDidNotConverge));
        }

        let q_hat =
            gumbel::return_level(report.params, self.opts.reference_block_multiple * m)?;
        let q = self.reference_extreme_q;
        let f1 = ((q - q_hat) / q).abs();
        let f2 = gumbel::ks_statistic(&sample, report.params);
        Ok(Ok(ObjectivePair { f1, f2, params: report.params, m, q_hat }))
    }

    /// Expand a scalar decision through the configured coupling.
    pub fn coupled_to_full_spec(&self, d: usize) -> Result<BlockSpec> {
        if self.opts.coupling.is_none() {
            return Err(Error::Problem("no coupling configured".into()));
        }
        self.expand(&BlockSpec::new(vec![d])?)
    }

    /// Drop all cached evaluations (cold-cache timing runs).
    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

/// Split `0..length` into `parts` contiguous ranges whose sizes differ by at
/// most one: boundaries `b_k = round(k * length / parts)`, `k = 0..=parts`.
pub fn partition_boundaries(length: usize, parts: usize) -> Result<Vec<usize>> {
    if parts == 0 {
        return Err(Error::Problem("zero parts".into()));
    }
    if parts > length {
        return Err(Error::Problem(format!(
            "cannot cut length {length} into {parts} parts"
        )));
    }
    // Integer round-half-up of k*length/parts.
    Ok((0..=parts).map(|k| (2 * k * length + parts) / (2 * parts)).collect())
}

/// Extract the row-major sequence of per-block maxima.
///
/// The block for index tuple `(k_1..k_n)` covers the Cartesian product of the
/// per-dimension ranges from `partition_boundaries`; every lattice point
/// belongs to exactly one block.
pub fn extract_block_maxima(domain: &GriddedDomain, spec: &BlockSpec) -> Result<MaximaSample> {
    let shape = domain.shape();
    if spec.ndim() != shape.len() {
        return Err(Error::Problem(format!(
            "spec {spec} has {} dimensions, domain has {}",
            spec.ndim(),
            shape.len()
        )));
    }
    let bounds: Vec<Vec<usize>> = spec
        .counts()
        .iter()
        .zip(shape)
        .map(|(&d, &l)| partition_boundaries(l, d))
        .collect::<Result<_>>()?;

    let values = domain.values();
    let counts = spec.counts();
    let mut maxima = Vec::with_capacity(spec.block_count());

    match shape.len() {
        1 => {
            let b = &bounds[0];
            for k in 0..counts[0] {
                let block = &values[b[k]..b[k + 1]];
                maxima.push(block.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
        2 => {
            let (b0, b1) = (&bounds[0], &bounds[1]);
            let stride = shape[1];
            for k0 in 0..counts[0] {
                for k1 in 0..counts[1] {
                    let mut best = f64::NEG_INFINITY;
                    for row in b0[k0]..b0[k0 + 1] {
                        let base = row * stride;
                        for v in &values[base + b1[k1]..base + b1[k1 + 1]] {
                            best = best.max(*v);
                        }
                    }
                    maxima.push(best);
                }
            }
        }
        3 => {
            let (b0, b1, b2) = (&bounds[0], &bounds[1], &bounds[2]);
            let (s0, s1) = (shape[1] * shape[2], shape[2]);
            for k0 in 0..counts[0] {
                for k1 in 0..counts[1] {
                    for k2 in 0..counts[2] {
                        let mut best = f64::NEG_INFINITY;
                        for i0 in b0[k0]..b0[k0 + 1] {
                            for i1 in b1[k1]..b1[k1 + 1] {
                                let base = i0 * s0 + i1 * s1;
                                for v in &values[base + b2[k2]..base + b2[k2 + 1]] {
                                    best = best.max(*v);
                                }
                            }
                        }
                        maxima.push(best);
                    }
                }
            }
        }
        n => return Err(Error::Problem(format!("unsupported dimension count {n}"))),
    }

    MaximaSample::new(maxima)
}

/// One exported evaluation row: the substrate of run logs and result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Decision-space spec (what the optimizer chose).
    pub spec: BlockSpec,
    /// Expanded per-dimension block counts.
    pub full_spec: BlockSpec,
    pub m: usize,
    pub estimator: Estimator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<ObjectivePair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<String>,
    /// Present only in timing mode; omitted otherwise so artifacts are
    /// reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl EvalRecord {
    pub fn new(
        problem: &Problem,
        spec: &BlockSpec,
        outcome: &EvalOutcome,
        wall_ms: Option<f64>,
    ) -> Result<Self> {
        let full = problem.expand(spec)?;
        let m = full.block_count();
        Ok(match outcome {
            Ok(pair) => Self {
                spec: spec.clone(),
                full_spec: full,
                m,
                estimator: problem.estimator(),
                pair: Some(*pair),
                infeasible: None,
                wall_ms,
            },
            Err(reason) => Self {
                spec: spec.clone(),
                full_spec: full,
                m,
                estimator: problem.estimator(),
                pair: None,
                infeasible: Some(reason.to_string()),
                wall_ms,
            },
        })
    }
}
