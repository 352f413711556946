//! Expected Hypervolume Improvement for two minimized objectives.
//!
//! The candidate's objectives are modeled by independent Gaussian posteriors
//! `(mu1, var1)` and `(mu2, var2)` from the two surrogate models. The exact
//! expectation of the hypervolume improvement decomposes over the vertical
//! strips cut by the archive's staircase: with archive points sorted by f1
//! and sentinels `x_0 = -inf`, `x_{k+1} = r_1`, `y_0 = r_2`,
//!
//! ```text
//! EHVI = sum_i [Psi1(x_i, x_i) - Psi1(x_i, x_{i-1})] * Psi2(y_{i-1}, y_{i-1})
//!      + [Phi1(x_i) - Phi1(x_{i-1})] * sum_{j>=i} (x_{j+1} - x_j) * Psi2(y_j, y_j)
//! ```
//!
//! where `Psi(a, b, mu, s) = s phi((b-mu)/s) + (a-mu) Phi((b-mu)/s)` is the
//! Gaussian partial expectation and `Phi` the standard normal CDF. The inner
//! sums are suffix sums, so the cost is `O(k)` after sorting. A Monte-Carlo
//! estimator over the same posteriors serves as the independent oracle; it
//! computes improvements through the literal hypervolume difference, not
//! through this decomposition.

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::objectives::BlockSpec;
use crate::pareto::hypervolume_2d;
use crate::rng::NormalSampler;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF via `erf`.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Partial expectation `integral_{-inf}^{b} (a - z) dN(z; mu, s^2)`.
/// For `s = 0` the mass sits at `mu`: `(a - mu) * [mu <= b]`.
fn psi(a: f64, b: f64, mu: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if mu <= b { a - mu } else { 0.0 };
    }
    let beta = (b - mu) / s;
    s * normal_pdf(beta) + (a - mu) * normal_cdf(beta)
}

/// CDF of the (possibly degenerate) posterior at `x`.
fn cdf(x: f64, mu: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if mu <= x { 1.0 } else { 0.0 };
    }
    normal_cdf((x - mu) / s)
}

/// Reduce arbitrary points to the non-dominated staircase strictly inside the
/// reference box: f1 strictly increasing, f2 strictly decreasing.
fn staircase(points: &[[f64; 2]], r: [f64; 2]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < r[0] && p[1] < r[1])
        .collect();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .expect("finite objectives")
            .then(a[1].partial_cmp(&b[1]).expect("finite objectives"))
    });
    let mut nd: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    let mut best_f2 = f64::INFINITY;
    for p in pts {
        if p[1] < best_f2 {
            nd.push(p);
            best_f2 = p[1];
        }
    }
    nd
}

/// Exact EHVI of a candidate with independent Gaussian posteriors.
pub fn ehvi_exact_at(
    mean: [f64; 2],
    variance: [f64; 2],
    points: &[[f64; 2]],
    r: [f64; 2],
) -> f64 {
    let (mu1, s1) = (mean[0], variance[0].max(0.0).sqrt());
    let (mu2, s2) = (mean[1], variance[1].max(0.0).sqrt());
    let nd = staircase(points, r);
    let k = nd.len();

    // Strip x-edges: x[0] = -inf, x[1..=k] = point f1s, x[k+1] = r1.
    let mut x = Vec::with_capacity(k + 2);
    x.push(f64::NEG_INFINITY);
    x.extend(nd.iter().map(|p| p[0]));
    x.push(r[0]);
    // y[i] bounds strip i+1 from above: y[0] = r2, y[i] = f2 of point i.
    let mut y = Vec::with_capacity(k + 1);
    y.push(r[1]);
    y.extend(nd.iter().map(|p| p[1]));

    // Suffix sums: tail[i] = sum_{j >= i} (x[j+1] - x[j]) * Psi2(y[j], y[j]),
    // for j = 1..=k (the strips to the right of strip i's left edge).
    let mut tail = vec![0.0; k + 2];
    for j in (1..=k).rev() {
        tail[j] = tail[j + 1] + (x[j + 1] - x[j]) * psi(y[j], y[j], mu2, s2);
    }

    let mut total = 0.0;
    for i in 1..=k + 1 {
        let first = (psi(x[i], x[i], mu1, s1) - psi(x[i], x[i - 1], mu1, s1))
            * psi(y[i - 1], y[i - 1], mu2, s2);
        let second = (cdf(x[i], mu1, s1) - cdf(x[i - 1], mu1, s1)) * tail[i];
        total += first + second;
    }
    total.max(0.0)
}

/// Monte-Carlo EHVI estimate and its standard error: improvements computed
/// as literal hypervolume differences over seeded posterior draws.
pub fn ehvi_mc_at(
    mean: [f64; 2],
    variance: [f64; 2],
    points: &[[f64; 2]],
    r: [f64; 2],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 1_000 {
        return Err(Error::Config(format!(
            "Monte-Carlo EHVI needs at least 1000 samples, got {samples}"
        )));
    }
    let (s1, s2) = (variance[0].max(0.0).sqrt(), variance[1].max(0.0).sqrt());
    let base = hypervolume_2d(points, r);
    let mut buffer = points.to_vec();
    buffer.push([0.0, 0.0]);
    let last = buffer.len() - 1;

    let mut sampler = NormalSampler::new(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let y1 = mean[0] + s1 * sampler.standard();
        let y2 = mean[1] + s2 * sampler.standard();
        buffer[last] = [y1, y2];
        let improvement = (hypervolume_2d(&buffer, r) - base).max(0.0);
        sum += improvement;
        sum_sq += improvement * improvement;
    }
    let n = samples as f64;
    let mean_est = sum / n;
    let var_est = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    Ok((mean_est, (var_est / n).sqrt()))
}

/// Surrogates plus an archive snapshot: everything acquisition needs.
pub struct AcquisitionContext<'a> {
    pub model_f1: &'a GpModel,
    pub model_f2: &'a GpModel,
    /// Non-dominated archive points (snapshot).
    pub archive: Vec<[f64; 2]>,
    pub reference: [f64; 2],
}

impl AcquisitionContext<'_> {
    fn posteriors(&self, spec: &BlockSpec) -> ([f64; 2], [f64; 2]) {
        let (m1, v1) = self.model_f1.predict(spec);
        let (m2, v2) = self.model_f2.predict(spec);
        ([m1, m2], [v1, v2])
    }

    /// Exact expected hypervolume improvement at a spec.
    pub fn ehvi_exact(&self, spec: &BlockSpec) -> f64 {
        let (mean, var) = self.posteriors(spec);
        ehvi_exact_at(mean, var, &self.archive, self.reference)
    }

    /// Monte-Carlo estimate (testing oracle), deterministic for a seed.
    pub fn ehvi_mc(&self, spec: &BlockSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
        let (mean, var) = self.posteriors(spec);
        ehvi_mc_at(mean, var, &self.archive, self.reference, samples, seed)
    }
}
