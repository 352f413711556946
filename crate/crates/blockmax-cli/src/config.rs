//! Declarative run configuration.
//!
//! A single TOML document binds the data source, region selection, problem
//! definition, optimizer parameters, baseline settings, and output location.
//! Parsing is strict: unknown keys anywhere are errors, and the whole
//! document is validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use blockmax::grid::{self, GridFormat, GriddedDomain, RegionSelector};
use blockmax::gumbel::Estimator;
use blockmax::mobo::OptimizerConfig;
use blockmax::objectives::{Problem, ProblemOptions};
use blockmax::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub regions: RegionsSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub baseline: Option<BaselineSection>,
    #[serde(default)]
    pub validate: Option<ValidateSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: SourceKind,
    /// File source: grid location.
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: FormatKind,
    /// Synthetic source: lattice shape and normal parameters.
    pub shape: Option<Vec<usize>>,
    #[serde(default)]
    pub mean: f64,
    pub stddev: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub transform: TransformKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    File,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatKind {
    Text,
    Binary,
}

fn default_format() -> FormatKind {
    FormatKind::Text
}

impl From<FormatKind> for GridFormat {
    fn from(f: FormatKind) -> Self {
        match f {
            FormatKind::Text => GridFormat::Text,
            FormatKind::Binary => GridFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    #[default]
    Identity,
    /// Flip signs so that valley-type extremes become maxima.
    Negate,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    /// Fit region; defaults to the full domain.
    pub fit_offsets: Option<Vec<usize>>,
    pub fit_extent: Option<Vec<usize>>,
    /// Reference region used for the observed extreme `q`; defaults to the
    /// full domain.
    pub reference_offsets: Option<Vec<usize>>,
    pub reference_extent: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub bounds: Vec<usize>,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default = "default_floor")]
    pub block_count_floor: usize,
    pub coupling: Option<Vec<usize>>,
    /// Fit-region-sized tiles covering the reference region: the predicted
    /// extreme targets `reference_block_multiple * m` blocks. Keep at 1 when
    /// fit and reference regions coincide.
    #[serde(default = "default_block_multiple")]
    pub reference_block_multiple: usize,
}

fn default_block_multiple() -> usize {
    1
}

fn default_floor() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    #[default]
    Map,
    Mle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_init_points")]
    pub init_points: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_growth")]
    pub growth_factor: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_init_points() -> usize {
    5
}
fn default_window() -> usize {
    10
}
fn default_tolerance() -> f64 {
    1e-5
}
fn default_growth() -> f64 {
    0.5
}
fn default_max_iterations() -> usize {
    500
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            init_points: default_init_points(),
            window: default_window(),
            tolerance: default_tolerance(),
            growth_factor: default_growth(),
            max_iterations: default_max_iterations(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub budget: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Reference point for hypervolume bookkeeping; usually the one reported
    /// by an optimize run (or pass `--ref-from`).
    pub reference: Option<[f64; 2]>,
    pub enumeration_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Front table to validate (overridable with `--front`).
    pub front: Option<PathBuf>,
    /// Synthetic replication count (used with a synthetic data source).
    pub replications: Option<usize>,
    #[serde(default = "default_rep_seed")]
    pub replication_seed_base: u64,
    /// Alternatively, held-out measured grids.
    #[serde(default)]
    pub test_files: Vec<PathBuf>,
    /// Apply the `[regions]` carving to each held-out domain. Off by
    /// default: a held-out domain is blocked whole and scored against its
    /// own maximum.
    #[serde(default)]
    pub use_regions: bool,
}

fn default_rep_seed() -> u64 {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate_shape()?;
        Ok(config)
    }

    fn validate_shape(&self) -> Result<()> {
        match self.data.source {
            SourceKind::File => {
                if self.data.path.is_none() {
                    return Err(Error::Config("data.source = \"file\" requires data.path".into()));
                }
            }
            SourceKind::Synthetic => {
                let shape = self
                    .data
                    .shape
                    .as_ref()
                    .ok_or_else(|| Error::Config("synthetic source requires data.shape".into()))?;
                if shape.is_empty() || shape.len() > 3 {
                    return Err(Error::Config(format!(
                        "data.shape must have 1..=3 dimensions, got {}",
                        shape.len()
                    )));
                }
                let stddev = self
                    .data
                    .stddev
                    .ok_or_else(|| Error::Config("synthetic source requires data.stddev".into()))?;
                if !(stddev.is_finite() && stddev > 0.0) {
                    return Err(Error::Config(format!(
                        "data.stddev must be positive and finite, got {stddev}"
                    )));
                }
            }
        }
        if self.problem.bounds.is_empty() {
            return Err(Error::Config("problem.bounds must not be empty".into()));
        }
        Ok(())
    }

    /// Load or generate the raw domain, before transform and regions.
    pub fn load_domain(&self, replication_seed: Option<u64>) -> Result<GriddedDomain> {
        match self.data.source {
            SourceKind::File => {
                if replication_seed.is_some() {
                    return Err(Error::Config(
                        "synthetic replications require a synthetic data source".into(),
                    ));
                }
                let path = self.data.path.as_ref().expect("validated");
                grid::load_grid(path, self.data.format.into())
            }
            SourceKind::Synthetic => {
                let shape = self.data.shape.as_ref().expect("validated");
                let stddev = self.data.stddev.expect("validated");
                let seed = replication_seed.unwrap_or(self.data.seed);
                grid::generate_synthetic(shape, self.data.mean, stddev, seed)
            }
        }
    }

    /// Build the full problem: transform, reference extreme, fit region.
    pub fn build_problem(&self, replication_seed: Option<u64>) -> Result<Problem> {
        self.build_problem_inner(replication_seed, true)
    }

    /// Held-out validation problem: the whole domain is the fit region and
    /// supplies its own reference extreme, unless `use_regions` asks for the
    /// original carving.
    pub fn build_validation_problem(
        &self,
        replication_seed: Option<u64>,
        use_regions: bool,
    ) -> Result<Problem> {
        self.build_problem_inner(replication_seed, use_regions)
    }

    fn build_problem_inner(
        &self,
        replication_seed: Option<u64>,
        apply_regions: bool,
    ) -> Result<Problem> {
        let raw = self.load_domain(replication_seed)?;
        let domain = match self.data.transform {
            TransformKind::Identity => raw,
            TransformKind::Negate => raw.negated(),
        };
        if !apply_regions {
            // Whole-domain problem: fit and reference regions coincide, so
            // the prediction horizon is the domain's own block count.
            let q = domain.global_max();
            let opts =
                ProblemOptions { reference_block_multiple: 1, ..self.problem_options() };
            return Problem::new(domain, q, self.problem.bounds.clone(), opts);
        }

        let reference_region = match (&self.regions.reference_offsets, &self.regions.reference_extent)
        {
            (None, None) => domain.clone(),
            (offsets, extent) => {
                let offsets = offsets.clone().unwrap_or_else(|| vec![0; domain.ndim()]);
                let extent = extent
                    .clone()
                    .ok_or_else(|| Error::Config("reference_offsets without reference_extent".into()))?;
                domain.select_region(&RegionSelector::new(offsets, extent)?)?
            }
        };
        let q = reference_region.global_max();

        let fit_domain = match (&self.regions.fit_offsets, &self.regions.fit_extent) {
            (None, None) => domain,
            (offsets, extent) => {
                let offsets = offsets.clone().unwrap_or_else(|| vec![0; domain.ndim()]);
                let extent = extent
                    .clone()
                    .ok_or_else(|| Error::Config("fit_offsets without fit_extent".into()))?;
                domain.select_region(&RegionSelector::new(offsets, extent)?)?
            }
        };

        let opts = self.problem_options();
        Problem::new(fit_domain, q, self.problem.bounds.clone(), opts)
    }

    fn problem_options(&self) -> ProblemOptions {
        ProblemOptions {
            estimator: match self.problem.estimator {
                EstimatorKind::Map => Estimator::Map,
                EstimatorKind::Mle => Estimator::Mle,
            },
            block_count_floor: self.problem.block_count_floor,
            coupling: self.problem.coupling.clone(),
            reference_block_multiple: self.problem.reference_block_multiple,
            ..Default::default()
        }
    }

    pub fn optimizer_config(&self, seed_override: Option<u64>, timing: bool) -> OptimizerConfig {
        OptimizerConfig {
            init_points: self.optimizer.init_points,
            window: self.optimizer.window,
            tolerance: self.optimizer.tolerance,
            growth_factor: self.optimizer.growth_factor,
            max_iterations: self.optimizer.max_iterations,
            seed: seed_override.unwrap_or(self.optimizer.seed),
            pool: None,
            timing,
        }
    }
}
