//! Gaussian-process surrogates over the integer decision lattice.
//!
//! One independent GP per objective. Inputs are block specs normalized to
//! `[0, 1]` per dimension using the decision bounds; targets are standardized
//! to zero mean and unit variance, with a constant-zero prior mean in that
//! standardized space. The covariance is a squared-exponential (RBF) kernel
//! with per-dimension length-scales, a signal variance, and a noise variance,
//! all chosen by maximizing the log marginal likelihood with multi-start
//! projected gradient ascent in log-space.
//!
//! A fitted [`GpModel`] is immutable and cheap to query concurrently; fitting
//! itself is single-threaded.

mod linalg;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::BlockSpec;
use crate::rng::seeded;
use linalg::Cholesky;
use rand::Rng;

const LOG_2PI: f64 = 1.837_877_066_409_345_4;

/// Box constraints for the hyperparameter search (log-space ascent projects
/// onto these). Length-scales are in normalized-input units.
const LENGTH_SCALE_RANGE: (f64, f64) = (1e-2, 1e2);
const SIGNAL_VARIANCE_RANGE: (f64, f64) = (1e-6, 1e3);
const NOISE_RANGE: (f64, f64) = (1e-6, 1e1);

/// Kernel and noise settings of a fitted model, in standardized-target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Options for [`GpModel::fit`].
#[derive(Debug, Clone)]
pub struct GpOptions {
    /// Number of ascent starts (the first is a fixed heuristic, the rest are
    /// seeded log-uniform draws).
    pub starts: usize,
    pub seed: u64,
    pub max_ascent_iterations: usize,
    /// Infinity-norm tolerance on the projected LML gradient.
    pub grad_tol: f64,
    /// Extra start, typically the previous iteration's optimum.
    pub warm_start: Option<GpHyperparams>,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            max_ascent_iterations: 60,
            grad_tol: 1e-3,
            warm_start: None,
        }
    }
}

/// A fitted Gaussian-process regressor.
#[derive(Debug, Clone)]
pub struct GpModel {
    bounds: Vec<usize>,
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    y: Vec<f64>, // standardized targets
    hyper: GpHyperparams,
    lml: f64,
    alpha: Vec<f64>,
    kinv: Vec<f64>,
    jitter: f64,
    /// Equal-target fallback: predictions are the constant with unit prior
    /// variance, and no kernel machinery is consulted.
    degenerate: bool,
}

impl GpModel {
    /// Fit inputs/targets with hyperparameters from multi-start LML ascent.
    pub fn fit(
        inputs: &[BlockSpec],
        targets: &[f64],
        bounds: &[usize],
        opts: &GpOptions,
    ) -> Result<Self> {
        let x = validate_and_normalize(inputs, targets, bounds)?;
        let (y_mean, y_std) = standardization(targets);
        if y_std == 0.0 {
            return Ok(Self::degenerate_model(bounds, x, targets, y_mean));
        }
        let y: Vec<f64> = targets.iter().map(|t| (t - y_mean) / y_std).collect();
        let dims = bounds.len();

        let mut starts: Vec<GpHyperparams> = Vec::with_capacity(opts.starts + 1);
        starts.push(GpHyperparams {
            length_scales: vec![0.3; dims],
            signal_variance: 1.0,
            noise_variance: 1e-4,
        });
        let mut rng = seeded(opts.seed);
        while starts.len() < opts.starts {
            let log_uniform = |rng: &mut crate::rng::SeededRng, lo: f64, hi: f64| {
                (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
            };
            starts.push(GpHyperparams {
                length_scales: (0..dims).map(|_| log_uniform(&mut rng, 0.05, 2.0)).collect(),
                signal_variance: log_uniform(&mut rng, 0.3, 3.0),
                noise_variance: log_uniform(&mut rng, 1e-6, 1e-2),
            });
        }
        if let Some(warm) = &opts.warm_start {
            if warm.length_scales.len() == dims {
                starts.push(warm.clone());
            }
        }

        let mut best: Option<(f64, usize, GpHyperparams)> = None;
        for (idx, start) in starts.iter().enumerate() {
            let (hyper, lml) = ascend(&x, &y, start, opts);
            let better = match &best {
                None => true,
                Some((best_lml, _, _)) => lml > *best_lml,
            };
            if better {
                best = Some((lml, idx, hyper));
            }
        }
        let (_, _, hyper) =
            best.ok_or_else(|| Error::Surrogate("no usable ascent start".into()))?;

        Self::assemble(bounds.to_vec(), x, y_mean, y_std, y, hyper)
    }

    /// Build a model with fixed hyperparameters (no LML optimization).
    pub fn with_hyperparams(
        inputs: &[BlockSpec],
        targets: &[f64],
        bounds: &[usize],
        hyper: GpHyperparams,
    ) -> Result<Self> {
        let x = validate_and_normalize(inputs, targets, bounds)?;
        if hyper.length_scales.len() != bounds.len() {
            return Err(Error::Surrogate(format!(
                "{} length-scales for {} dimensions",
                hyper.length_scales.len(),
                bounds.len()
            )));
        }
        let (y_mean, y_std) = standardization(targets);
        if y_std == 0.0 {
            return Ok(Self::degenerate_model(bounds, x, targets, y_mean));
        }
        let y: Vec<f64> = targets.iter().map(|t| (t - y_mean) / y_std).collect();
        Self::assemble(bounds.to_vec(), x, y_mean, y_std, y, hyper)
    }

    fn degenerate_model(
        bounds: &[usize],
        x: Vec<Vec<f64>>,
        targets: &[f64],
        y_mean: f64,
    ) -> Self {
        Self {
            bounds: bounds.to_vec(),
            x,
            y_mean,
            y_std: 0.0,
            y: vec![0.0; targets.len()],
            hyper: GpHyperparams {
                length_scales: vec![1.0; bounds.len()],
                signal_variance: 1.0,
                noise_variance: NOISE_RANGE.0,
            },
            lml: 0.0,
            alpha: Vec::new(),
            kinv: Vec::new(),
            jitter: 0.0,
            degenerate: true,
        }
    }

    fn assemble(
        bounds: Vec<usize>,
        x: Vec<Vec<f64>>,
        y_mean: f64,
        y_std: f64,
        y: Vec<f64>,
        hyper: GpHyperparams,
    ) -> Result<Self> {
        let (chol, jitter) = factor_kernel(&x, &hyper)
            .ok_or_else(|| Error::Surrogate("kernel factorization failed at max jitter".into()))?;
        let alpha = chol.solve(&y);
        let quad: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let n = y.len() as f64;
        let lml = -0.5 * quad - 0.5 * chol.log_det() - 0.5 * n * LOG_2PI;
        let kinv = chol.inverse();
        Ok(Self {
            bounds,
            x,
            y_mean,
            y_std,
            y,
            hyper,
            lml,
            alpha,
            kinv,
            jitter,
            degenerate: false,
        })
    }

    /// Posterior mean and variance at a spec, in objective units. The
    /// variance is the latent-function variance (no observation noise).
    pub fn predict(&self, spec: &BlockSpec) -> (f64, f64) {
        if self.degenerate {
            return (self.y_mean, 1.0);
        }
        let q = normalize(spec.counts(), &self.bounds);
        let n = self.x.len();
        let mut kstar = vec![0.0; n];
        for (i, xi) in self.x.iter().enumerate() {
            kstar[i] = rbf(&q, xi, &self.hyper);
        }
        let mean_std: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for i in 0..n {
            let row: f64 = self.kinv[i * n..i * n + n]
                .iter()
                .zip(&kstar)
                .map(|(a, b)| a * b)
                .sum();
            quad += kstar[i] * row;
        }
        let var_std = (self.hyper.signal_variance - quad).max(0.0);
        (
            self.y_mean + self.y_std * mean_std,
            self.y_std * self.y_std * var_std,
        )
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Prior variance in objective units (what `predict` reverts to far from
    /// the data).
    pub fn prior_variance(&self) -> f64 {
        if self.degenerate {
            1.0
        } else {
            self.hyper.signal_variance * self.y_std * self.y_std
        }
    }

    /// Training-target mean in objective units.
    pub fn prior_mean(&self) -> f64 {
        self.y_mean
    }

    /// LML of the stored (standardized) training data under `hyper`.
    pub fn lml_at(&self, hyper: &GpHyperparams) -> Result<f64> {
        if self.degenerate {
            return Err(Error::Surrogate("degenerate model has no likelihood".into()));
        }
        lml_only(&self.x, &self.y, hyper)
            .ok_or_else(|| Error::Surrogate("kernel factorization failed".into()))
    }
}

fn validate_and_normalize(
    inputs: &[BlockSpec],
    targets: &[f64],
    bounds: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if inputs.len() < 2 {
        return Err(Error::Surrogate(format!(
            "need at least 2 training points, got {}",
            inputs.len()
        )));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Surrogate(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::Surrogate(format!("non-finite target {t}")));
    }
    let mut seen = HashSet::new();
    for s in inputs {
        if s.ndim() != bounds.len() {
            return Err(Error::Surrogate(format!(
                "spec {s} has {} dimensions, bounds have {}",
                s.ndim(),
                bounds.len()
            )));
        }
        if !seen.insert(s.counts().to_vec()) {
            return Err(Error::Surrogate(format!("duplicate training input {s}")));
        }
    }
    Ok(inputs.iter().map(|s| normalize(s.counts(), bounds)).collect())
}

/// Map integer counts to `[0, 1]` per dimension: `(d - 1)/(U - 1)`.
fn normalize(counts: &[usize], bounds: &[usize]) -> Vec<f64> {
    counts
        .iter()
        .zip(bounds)
        .map(|(&d, &u)| {
            if u > 1 {
                (d as f64 - 1.0) / (u as f64 - 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Population mean and standard deviation of the targets.
fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Treat numerically-constant targets as exactly constant.
    if std <= 1e-12 * mean.abs().max(1.0) {
        (mean, 0.0)
    } else {
        (mean, std)
    }
}

fn rbf(a: &[f64], b: &[f64], hyper: &GpHyperparams) -> f64 {
    let mut quad = 0.0;
    for ((&ai, &bi), &l) in a.iter().zip(b).zip(&hyper.length_scales) {
        let d = (ai - bi) / l;
        quad += d * d;
    }
    hyper.signal_variance * (-0.5 * quad).exp()
}

/// Kernel matrix without the noise diagonal.
fn kernel_matrix(x: &[Vec<f64>], hyper: &GpHyperparams) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = hyper.signal_variance;
        for j in 0..i {
            let v = rbf(&x[i], &x[j], hyper);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Factor `K + (noise + jitter) I`, escalating jitter by doubling up to 1e-2.
fn factor_kernel(x: &[Vec<f64>], hyper: &GpHyperparams) -> Option<(Cholesky, f64)> {
    let n = x.len();
    let mut k = kernel_matrix(x, hyper);
    for i in 0..n {
        k[i * n + i] += hyper.noise_variance;
    }
    if let Some(c) = Cholesky::factor(&k, n) {
        return Some((c, 0.0));
    }
    let mut jitter = 1e-10;
    while jitter <= 1e-2 {
        let mut kj = k.clone();
        for i in 0..n {
            kj[i * n + i] += jitter;
        }
        if let Some(c) = Cholesky::factor(&kj, n) {
            return Some((c, jitter));
        }
        jitter *= 2.0;
    }
    None
}

fn lml_only(x: &[Vec<f64>], y: &[f64], hyper: &GpHyperparams) -> Option<f64> {
    let (chol, _) = factor_kernel(x, hyper)?;
    let alpha = chol.solve(y);
    let quad: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    Some(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * n * LOG_2PI)
}

/// LML and its gradient w.r.t. the log-hyperparameters
/// `(log l_1..log l_d, log s2, log noise)`.
fn lml_and_grad(x: &[Vec<f64>], y: &[f64], hyper: &GpHyperparams) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let dims = hyper.length_scales.len();
    let (chol, _) = factor_kernel(x, hyper)?;
    let alpha = chol.solve(y);
    let quad: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * quad - 0.5 * chol.log_det() - 0.5 * (n as f64) * LOG_2PI;
    let kinv = chol.inverse();

    // d LML / d theta_p = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta_p).
    // All dK entries derive from the noiseless kernel value k_ij, so one pass
    // over the matrix accumulates every component.
    let mut grad = vec![0.0; dims + 2];
    for i in 0..n {
        for j in 0..n {
            let a_ij = alpha[i] * alpha[j] - kinv[i * n + j];
            let k_ij = if i == j {
                hyper.signal_variance
            } else {
                rbf(&x[i], &x[j], hyper)
            };
            // dK/d log l_m = k_ij * d_m^2 / l_m^2
            for m in 0..dims {
                let d = x[i][m] - x[j][m];
                let l = hyper.length_scales[m];
                grad[m] += 0.5 * a_ij * k_ij * (d * d) / (l * l);
            }
            // dK/d log s2 = k_ij
            grad[dims] += 0.5 * a_ij * k_ij;
            // dK/d log noise = noise on the diagonal
            if i == j {
                grad[dims + 1] += 0.5 * a_ij * hyper.noise_variance;
            }
        }
    }
    Some((lml, grad))
}

fn pack(hyper: &GpHyperparams) -> Vec<f64> {
    let mut theta: Vec<f64> = hyper.length_scales.iter().map(|l| l.ln()).collect();
    theta.push(hyper.signal_variance.ln());
    theta.push(hyper.noise_variance.ln());
    theta
}

fn unpack(theta: &[f64], dims: usize) -> GpHyperparams {
    GpHyperparams {
        length_scales: theta[..dims].iter().map(|t| t.exp()).collect(),
        signal_variance: theta[dims].exp(),
        noise_variance: theta[dims + 1].exp(),
    }
}

fn clamp_theta(theta: &mut [f64], dims: usize) {
    for t in theta[..dims].iter_mut() {
        *t = t.clamp(LENGTH_SCALE_RANGE.0.ln(), LENGTH_SCALE_RANGE.1.ln());
    }
    theta[dims] = theta[dims].clamp(SIGNAL_VARIANCE_RANGE.0.ln(), SIGNAL_VARIANCE_RANGE.1.ln());
    theta[dims + 1] = theta[dims + 1].clamp(NOISE_RANGE.0.ln(), NOISE_RANGE.1.ln());
}

/// Projected gradient ascent on the LML from one start. Returns the best
/// hyperparameters reached and their LML (negative infinity if the start
/// itself fails to factor).
fn ascend(
    x: &[Vec<f64>],
    y: &[f64],
    start: &GpHyperparams,
    opts: &GpOptions,
) -> (GpHyperparams, f64) {
    let dims = start.length_scales.len();
    let mut theta = pack(start);
    clamp_theta(&mut theta, dims);

    let Some((mut value, mut grad)) = lml_and_grad(x, y, &unpack(&theta, dims)) else {
        return (start.clone(), f64::NEG_INFINITY);
    };
    let mut step = 0.25;

    for _ in 0..opts.max_ascent_iterations {
        // Projected gradient: directions pushing past the box don't count.
        let mut proj_norm = 0.0_f64;
        for (p, (&t, &g)) in theta.iter().zip(&grad).enumerate() {
            let (lo, hi) = if p < dims {
                (LENGTH_SCALE_RANGE.0.ln(), LENGTH_SCALE_RANGE.1.ln())
            } else if p == dims {
                (SIGNAL_VARIANCE_RANGE.0.ln(), SIGNAL_VARIANCE_RANGE.1.ln())
            } else {
                (NOISE_RANGE.0.ln(), NOISE_RANGE.1.ln())
            };
            let blocked = (t <= lo && g < 0.0) || (t >= hi && g > 0.0);
            if !blocked {
                proj_norm = proj_norm.max(g.abs());
            }
        }
        if proj_norm <= opts.grad_tol {
            break;
        }

        let mut alpha = step;
        let mut advanced = false;
        for _ in 0..25 {
            let mut cand = theta.clone();
            for (c, g) in cand.iter_mut().zip(&grad) {
                *c += alpha * g;
            }
            clamp_theta(&mut cand, dims);
            let moved: f64 = cand
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if moved == 0.0 {
                break;
            }
            if let Some((v, g)) = lml_and_grad(x, y, &unpack(&cand, dims)) {
                if v > value {
                    theta = cand;
                    value = v;
                    grad = g;
                    step = (alpha * 1.5).min(1.0);
                    advanced = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !advanced {
            break;
        }
    }

    (unpack(&theta, dims), value)
}
