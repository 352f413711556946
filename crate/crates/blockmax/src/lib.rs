//! Automatic block size selection for block-maxima extreme value analysis.
//!
//! The block maxima method partitions an observation domain into
//! non-overlapping blocks, keeps each block's maximum, and fits a Gumbel
//! distribution to the resulting sample. How many blocks to use is a real
//! choice: few large blocks give well-converged maxima but a tiny sample,
//! many small blocks give a large sample of poorly-converged maxima. This
//! crate treats the per-dimension block counts as an integer decision vector
//! and searches it with two competing objectives:
//!
//! - `f1`: relative error of the predicted extreme (return level) against
//!   the observed most extreme value of a reference region, and
//! - `f2`: the Kolmogorov–Smirnov statistic of the fitted Gumbel against
//!   the block-maxima sample.
//!
//! The search itself is multi-objective Bayesian optimization: one Gaussian
//! process surrogate per objective, candidates chosen by exact bi-objective
//! Expected Hypervolume Improvement over the integer lattice, a non-dominated
//! archive with an adaptively placed reference point, and a moving-average
//! stopping rule on the hypervolume trajectory. Enumeration, uniform random,
//! and structured-grid baselines share the same evaluation pipeline for
//! comparison, and an out-of-sample validator scores chosen block counts on
//! held-out domains.
//!
//! Modules follow the pipeline order: [`grid`] holds the raw lattice data,
//! [`gumbel`] fits and scores the distribution, [`objectives`] turns a block
//! count vector into the objective pair, [`pareto`]/[`gp`]/[`ehvi`] supply
//! the optimizer machinery, [`mobo`] runs the loop, [`baselines`] and
//! [`validate`] cover comparison and held-out evaluation, and [`report`]
//! reads and writes the on-disk artifact formats.

pub mod baselines;
pub mod ehvi;
pub mod error;
pub mod gp;
pub mod grid;
pub mod gumbel;
pub mod mobo;
pub mod objectives;
pub mod pareto;
pub mod report;
pub mod rng;
pub mod validate;

pub use error::{Error, InfeasibleReason, Result};
pub use grid::{GridFormat, GriddedDomain, RegionSelector};
pub use gumbel::{Estimator, FitReport, GumbelParams, MaximaSample};
pub use objectives::{BlockSpec, EvalRecord, ObjectivePair, Problem};
pub use pareto::ParetoArchive;
