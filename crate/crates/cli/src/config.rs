//! Configuration file schema and problem construction.
//!
//! A run is described by one JSON file:
//!
//! ```json
//! {
//!   "problem": "quintic1d",
//!   "target": 2.0,
//!   "solver": { "tol_res": 1e-9, "seed": 42 },
//!   "hammerstein": { "kernel": "one-plus-ts", "grid_n": 64,
//!                    "rule": "trapezoid", "perturbation": "zero" }
//! }
//! ```
//!
//! `target` is either a full vector or a scalar shorthand broadcast to the
//! output dimension. `problem` is a built-in operator name, `"hammerstein"`
//! (configured by the `hammerstein` block, where `kernel` may also be a
//! dense matrix tabulated on the grid), or a benchmark functional name for
//! the saddle search. All defaults are materialized before a run and echoed
//! into every report.

use serde::{Deserialize, Serialize};

use varinv::error::{Error, Result};
use varinv::hammerstein::{
    assemble_operator, kernel_by_name, perturbation_by_name, rule_by_name, KernelSpec,
    PerturbationSpec, QuadratureGrid,
};
use varinv::inverter::InvertOpts;
use varinv::linalg::{Matrix, Vector};
use varinv::operator::{builtin, OperatorSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Constant(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "defaults::tol_res")]
    pub tol_res: f64,
    #[serde(default = "defaults::tol_grad")]
    pub tol_grad: f64,
    #[serde(default = "defaults::tol_bij")]
    pub tol_bij: f64,
    #[serde(default = "defaults::tol_zero")]
    pub tol_zero: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::starts")]
    pub starts: usize,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
}

mod defaults {
    pub fn tol_res() -> f64 {
        1e-9
    }
    pub fn tol_grad() -> f64 {
        1e-10
    }
    pub fn tol_bij() -> f64 {
        1e-8
    }
    pub fn tol_zero() -> f64 {
        1e-8
    }
    pub fn starts() -> usize {
        8
    }
    pub fn max_iters() -> usize {
        400
    }
    pub fn grid_n() -> usize {
        64
    }
    pub fn rule() -> String {
        "trapezoid".into()
    }
    pub fn quartic_c() -> f64 {
        0.01
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_res: defaults::tol_res(),
            tol_grad: defaults::tol_grad(),
            tol_bij: defaults::tol_bij(),
            tol_zero: defaults::tol_zero(),
            seed: 0,
            starts: defaults::starts(),
            max_iters: defaults::max_iters(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_res, self.tol_grad, self.tol_bij, self.tol_zero];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("all solver tolerances must be positive".into()));
        }
        if self.starts == 0 || self.max_iters == 0 {
            return Err(Error::Config("starts and max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn invert_opts(&self, assert_surjective: bool) -> InvertOpts {
        InvertOpts {
            tol_res: self.tol_res,
            tol_grad: self.tol_grad,
            tol_bij: self.tol_bij,
            tol_zero: self.tol_zero,
            seed: self.seed,
            starts: self.starts,
            max_iters: self.max_iters,
            assert_surjective,
            ..InvertOpts::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelConfig {
    Name(String),
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerturbationConfig {
    Name(String),
    Detailed {
        name: String,
        #[serde(default = "defaults::quartic_c")]
        c: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HammersteinConfig {
    pub kernel: KernelConfig,
    /// Asserted kernel bounds; named kernels carry their own when omitted.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "defaults::grid_n")]
    pub grid_n: usize,
    #[serde(default = "defaults::rule")]
    pub rule: String,
    #[serde(default = "default_perturbation")]
    pub perturbation: PerturbationConfig,
}

fn default_perturbation() -> PerturbationConfig {
    PerturbationConfig::Name("zero".into())
}

impl Default for HammersteinConfig {
    fn default() -> Self {
        HammersteinConfig {
            kernel: KernelConfig::Name("constant".into()),
            alpha: None,
            beta: None,
            grid_n: defaults::grid_n(),
            rule: defaults::rule(),
            perturbation: default_perturbation(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub problem: String,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub hammerstein: Option<HammersteinConfig>,
}

impl ProblemConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ProblemConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.problem == "hammerstein" {
            let h = self.hammerstein.clone().unwrap_or_default();
            if h.grid_n < 4 {
                return Err(Error::Config(
                    "hammerstein grid_n must be at least 4".into(),
                ));
            }
        }
        Ok(())
    }

    /// Copy of the configuration with every default materialized, used as
    /// the self-describing echo inside reports.
    pub fn resolved(&self) -> ProblemConfig {
        let mut cfg = self.clone();
        if cfg.problem == "hammerstein" {
            cfg.hammerstein = Some(cfg.hammerstein.clone().unwrap_or_default());
        }
        cfg
    }
}

/// A constructed problem: the operator plus everything target resolution
/// and reporting need.
pub struct BuiltProblem {
    pub op: OperatorSpec,
    /// True for the integral-operator problem, whose third derivative is
    /// onto by construction but not coordinatewise diagonal.
    pub assert_surjective: bool,
}

pub fn build_kernel(h: &HammersteinConfig) -> Result<KernelSpec> {
    let mut kernel = match &h.kernel {
        KernelConfig::Name(name) => kernel_by_name(name)?,
        KernelConfig::Table(rows) => {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config("tabulated kernel must be square".into()));
            }
            let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
            KernelSpec::tabulated(Matrix::from_row_slice(n, n, &flat))?
        }
    };
    if let Some(alpha) = h.alpha {
        kernel.alpha = alpha;
    }
    if let Some(beta) = h.beta {
        kernel.beta = beta;
    }
    Ok(kernel)
}

pub fn build_perturbation(h: &HammersteinConfig) -> Result<PerturbationSpec> {
    match &h.perturbation {
        PerturbationConfig::Name(name) => perturbation_by_name(name, defaults::quartic_c()),
        PerturbationConfig::Detailed { name, c } => perturbation_by_name(name, *c),
    }
}

/// Builds the configured operator.
pub fn build_problem(cfg: &ProblemConfig) -> Result<BuiltProblem> {
    if cfg.problem == "hammerstein" {
        let h = cfg.hammerstein.clone().unwrap_or_default();
        let rule = rule_by_name(&h.rule)?;
        let grid = QuadratureGrid::new(rule, h.grid_n)?;
        let kernel = build_kernel(&h)?;
        let pert = build_perturbation(&h)?;
        let op = assemble_operator(&kernel, &pert, &grid)?;
        Ok(BuiltProblem {
            op,
            assert_surjective: true,
        })
    } else {
        Ok(BuiltProblem {
            op: builtin(&cfg.problem)?,
            assert_surjective: false,
        })
    }
}

/// Resolves the target specification against the operator's output
/// dimension; absent targets default to zero.
pub fn resolve_target(cfg: &ProblemConfig, dim_out: usize) -> Result<Vector> {
    match &cfg.target {
        None => Ok(Vector::zeros(dim_out)),
        Some(TargetSpec::Constant(c)) => Ok(Vector::repeat(dim_out, *c)),
        Some(TargetSpec::Vector(v)) => {
            if v.len() != dim_out {
                return Err(Error::Config(format!(
                    "target has dim {} but the problem expects {}",
                    v.len(),
                    dim_out
                )));
            }
            Ok(Vector::from_vec(v.clone()))
        }
    }
}

/// Parses a comma-separated vector argument like `-1.0,2.5`.
pub fn parse_vector(text: &str) -> Result<Vector> {
    let entries: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match entries {
        Ok(v) if !v.is_empty() => Ok(Vector::from_vec(v)),
        _ => Err(Error::Config(format!("cannot parse vector '{text}'"))),
    }
}
