//! Quadrature discretization of the integral operator
//! `F(x) = A(x^2) x + r(x)` with `(Az)(t) = integral_0^1 K(t,s) z(s) ds`,
//! exposed as an [`OperatorSpec`] for the inversion machinery.
//!
//! With `r` vanishing to cubic order at zero the discretized operator is
//! exactly the degenerate situation the inverter targets: `F'(0) = 0`,
//! `F''(0) = 0`, and `F'''(0)h^3 = 6 A(h^2) h`.
//!
//! Values live on the quadrature nodes; the discrete analogue of the
//! integral norm is the weighted norm `sqrt(sum w_i v_i^2)`. The operator's
//! derivative callbacks are the plain coordinate derivatives of the
//! discretized evaluation (so they agree with finite differences of `eval`);
//! the quadrature weights enter through the module's own norms and checks.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm_weighted, Matrix, Vector};
use crate::operator::OperatorSpec;

/// Quadrature rule on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

/// Nodes and positive weights on `[0, 1]`; the weights sum to one.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub rule: QuadratureRule,
}

impl QuadratureGrid {
    pub fn new(rule: QuadratureRule, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("quadrature grid needs at least 2 nodes".into()));
        }
        let grid = match rule {
            QuadratureRule::Trapezoid => {
                let h = 1.0 / (n - 1) as f64;
                let nodes = (0..n).map(|i| i as f64 * h).collect();
                let mut weights = vec![h; n];
                weights[0] = 0.5 * h;
                weights[n - 1] = 0.5 * h;
                QuadratureGrid {
                    nodes,
                    weights,
                    rule,
                }
            }
            QuadratureRule::GaussLegendre => {
                let (nodes, weights) = gauss_legendre_unit(n);
                QuadratureGrid {
                    nodes,
                    weights,
                    rule,
                }
            }
        };
        debug_assert!((grid.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Discrete integral norm `sqrt(sum w_i v_i^2)`.
    pub fn norm(&self, v: &Vector) -> f64 {
        norm_weighted(v, Some(&self.weights))
    }
}

/// Gauss-Legendre nodes and weights mapped from `[-1, 1]` to `[0, 1]`.
///
/// Newton iteration on the Legendre recurrence; ample for the grid sizes
/// used here.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Descending initial guesses; filled in reverse for increasing nodes.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

enum KernelEval {
    Closure(KernelFn),
    Table(Matrix),
}

/// A positive, bounded kernel `0 < alpha <= K(t,s) <= beta`.
pub struct KernelSpec {
    eval: KernelEval,
    pub alpha: f64,
    pub beta: f64,
    pub name: String,
}

impl KernelSpec {
    /// Constant kernel `K = c`.
    pub fn constant(c: f64) -> Self {
        KernelSpec {
            eval: KernelEval::Closure(Arc::new(move |_, _| c)),
            alpha: c,
            beta: c,
            name: format!("constant({c})"),
        }
    }

    /// `K(t, s) = 1 + t s`, with bounds `[1, 2]` on the unit square.
    pub fn one_plus_ts() -> Self {
        KernelSpec {
            eval: KernelEval::Closure(Arc::new(|t, s| 1.0 + t * s)),
            alpha: 1.0,
            beta: 2.0,
            name: "one-plus-ts".into(),
        }
    }

    pub fn from_closure(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        alpha: f64,
        beta: f64,
    ) -> Self {
        KernelSpec {
            eval: KernelEval::Closure(Arc::new(f)),
            alpha,
            beta,
            name: name.into(),
        }
    }

    /// Kernel tabulated on the grid nodes, entry `(i, j) = K(t_i, s_j)`.
    pub fn tabulated(table: Matrix) -> Result<Self> {
        if table.nrows() != table.ncols() || table.is_empty() {
            return Err(Error::Config("tabulated kernel must be square".into()));
        }
        let alpha = table.iter().cloned().fold(f64::INFINITY, f64::min);
        let beta = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(KernelSpec {
            eval: KernelEval::Table(table),
            alpha,
            beta,
            name: "tabulated".into(),
        })
    }

    /// Kernel matrix on the grid: `(i, j) -> K(t_i, s_j)`.
    fn matrix_on(&self, grid: &QuadratureGrid) -> Result<Matrix> {
        let n = grid.len();
        match &self.eval {
            KernelEval::Closure(f) => Ok(Matrix::from_fn(n, n, |i, j| {
                f(grid.nodes[i], grid.nodes[j])
            })),
            KernelEval::Table(m) => {
                if m.nrows() != n {
                    return Err(Error::Config(format!(
                        "tabulated kernel is {}x{} but the grid has {} nodes",
                        m.nrows(),
                        m.ncols(),
                        n
                    )));
                }
                Ok(m.clone())
            }
        }
    }

    /// Verifies `0 < alpha <= K <= beta` on all grid node pairs.
    pub fn validate_on(&self, grid: &QuadratureGrid) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "kernel '{}' lower bound must be positive, got {}",
                self.name, self.alpha
            )));
        }
        let m = self.matrix_on(grid)?;
        let slack = 1e-12 * self.beta.abs().max(1.0);
        for v in m.iter() {
            if *v < self.alpha - slack || *v > self.beta + slack {
                return Err(Error::Config(format!(
                    "kernel '{}' leaves its bounds [{}, {}]: value {v}",
                    self.name, self.alpha, self.beta
                )));
            }
        }
        Ok(())
    }
}

type PointwiseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pointwise perturbation `r` with derivatives up to third order (the
/// assembled operator needs them for its own derivative callbacks).
pub struct PerturbationSpec {
    pub r: PointwiseFn,
    pub r_prime: PointwiseFn,
    pub r_d2: PointwiseFn,
    pub r_d3: PointwiseFn,
    /// `r(v) = o(|v|^3)` at zero, so the operator stays degenerate there.
    pub zero_to_cubic: bool,
    pub name: String,
}

impl PerturbationSpec {
    /// `r = 0`.
    pub fn zero() -> Self {
        PerturbationSpec {
            r: Arc::new(|_| 0.0),
            r_prime: Arc::new(|_| 0.0),
            r_d2: Arc::new(|_| 0.0),
            r_d3: Arc::new(|_| 0.0),
            zero_to_cubic: true,
            name: "zero".into(),
        }
    }

    /// `r(v) = c v^4`, the shipped quartic perturbation.
    pub fn quartic(c: f64) -> Self {
        PerturbationSpec {
            r: Arc::new(move |v| c * v.powi(4)),
            r_prime: Arc::new(move |v| 4.0 * c * v.powi(3)),
            r_d2: Arc::new(move |v| 12.0 * c * v * v),
            r_d3: Arc::new(move |v| 24.0 * c * v),
            zero_to_cubic: true,
            name: format!("quartic({c})"),
        }
    }
}

/// Applies the discretized integral operator:
/// `(Az)(t_i) = sum_j w_j K(t_i, s_j) z(s_j)`.
pub fn apply_a(kernel: &KernelSpec, grid: &QuadratureGrid, z: &Vector) -> Result<Vector> {
    if z.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "z has dim {} but the grid has {} nodes",
            z.len(),
            grid.len()
        )));
    }
    let m = kernel.matrix_on(grid)?;
    let wz = Vector::from_fn(grid.len(), |j, _| grid.weights[j] * z[j]);
    Ok(m * wz)
}

/// Assembles the discretized operator `F(x) = A(x^2) x + r(x)` with exact
/// derivative callbacks:
///
/// ```text
/// F'(x)h    = A(x^2)h + 2A(xh)x + r'(x)h
/// F''(x)h^2 = 2A(h^2)x + 4A(xh)h + r''(x)h^2
/// F'''(x)h^3 = 6A(h^2)h + r'''(x)h^3
/// ```
pub fn assemble_operator(
    kernel: &KernelSpec,
    perturbation: &PerturbationSpec,
    grid: &QuadratureGrid,
) -> Result<OperatorSpec> {
    kernel.validate_on(grid)?;
    let n = grid.len();
    // Fold the weights into the kernel matrix once: A z = M z.
    let mut m = kernel.matrix_on(grid)?;
    for j in 0..n {
        let w = grid.weights[j];
        for i in 0..n {
            m[(i, j)] *= w;
        }
    }
    let m = Arc::new(m);
    let name = format!(
        "hammerstein[{},{},n={},{:?}]",
        kernel.name, perturbation.name, n, grid.rule
    );

    let (m0, m1, m2, m3) = (m.clone(), m.clone(), m.clone(), m.clone());
    let (r, r1, r2, r3) = (
        perturbation.r.clone(),
        perturbation.r_prime.clone(),
        perturbation.r_d2.clone(),
        perturbation.r_d3.clone(),
    );

    Ok(OperatorSpec::analytic(
        name,
        n,
        n,
        move |x: &Vector| {
            let az = &*m0 * x.component_mul(x);
            Vector::from_fn(x.len(), |i, _| az[i] * x[i] + r(x[i]))
        },
        move |x: &Vector| {
            let az = &*m1 * x.component_mul(x);
            let mut jac = Matrix::zeros(x.len(), x.len());
            for i in 0..x.len() {
                for j in 0..x.len() {
                    jac[(i, j)] = 2.0 * x[i] * m1[(i, j)] * x[j];
                }
                jac[(i, i)] += az[i] + r1(x[i]);
            }
            jac
        },
        move |x: &Vector, h: &Vector| {
            let ah2 = &*m2 * h.component_mul(h);
            let axh = &*m2 * x.component_mul(h);
            Vector::from_fn(x.len(), |i, _| {
                2.0 * ah2[i] * x[i] + 4.0 * axh[i] * h[i] + r2(x[i]) * h[i] * h[i]
            })
        },
        move |x: &Vector, h: &Vector| {
            let ah2 = &*m3 * h.component_mul(h);
            Vector::from_fn(x.len(), |i, _| {
                6.0 * ah2[i] * h[i] + r3(x[i]) * h[i].powi(3)
            })
        },
    ))
}

/// Residual of the pointwise identity `x = (F(x) - r(x)) / A(x^2)`:
/// returns `|x - (fx - r(x)) / A(x^2)|`. Requires a nonzero `x`, which
/// keeps the denominator positive via the kernel lower bound.
pub fn fixed_point_residual(
    kernel: &KernelSpec,
    perturbation: &PerturbationSpec,
    grid: &QuadratureGrid,
    x: &Vector,
    fx: &Vector,
) -> Result<f64> {
    if x.len() != grid.len() || fx.len() != grid.len() {
        return Err(Error::Dimension("x or fx does not match the grid".into()));
    }
    let ax2 = apply_a(kernel, grid, &x.component_mul(x))?;
    let floor = ax2.iter().cloned().fold(f64::INFINITY, f64::min);
    if floor <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateInput(
            "A(x^2) vanishes at a node (x = 0?); the identity is undefined".into(),
        ));
    }
    let r = &perturbation.r;
    let recon = Vector::from_fn(grid.len(), |i, _| (fx[i] - r(x[i])) / ax2[i]);
    Ok((x - recon).norm())
}

/// Result of [`lower_bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    /// `min_i A(x^2)(t_i)`.
    pub min_applied: f64,
    pub alpha: f64,
    /// Weighted squared norm `sum_j w_j x_j^2`.
    pub weighted_norm_sq: f64,
    /// `alpha * weighted_norm_sq`.
    pub bound: f64,
    pub holds: bool,
}

/// Verifies the discrete bound `min_i A(x^2)(t_i) >= alpha sum_j w_j x_j^2`,
/// with the squared integral norm on the right-hand side.
pub fn lower_bound_check(
    kernel: &KernelSpec,
    grid: &QuadratureGrid,
    x: &Vector,
) -> Result<LowerBoundReport> {
    if x.len() != grid.len() {
        return Err(Error::Dimension("x does not match the grid".into()));
    }
    let ax2 = apply_a(kernel, grid, &x.component_mul(x))?;
    let min_applied = ax2.iter().cloned().fold(f64::INFINITY, f64::min);
    let weighted_norm_sq: f64 = grid
        .weights
        .iter()
        .zip(x.iter())
        .map(|(w, xi)| w * xi * xi)
        .sum();
    let bound = kernel.alpha * weighted_norm_sq;
    let holds = min_applied >= bound - 1e-12 * (1.0 + bound.abs());
    Ok(LowerBoundReport {
        min_applied,
        alpha: kernel.alpha,
        weighted_norm_sq,
        bound,
        holds,
    })
}

/// Manufactures an inversion target with known solution: `y = F(x_star)`.
pub fn manufacture_target(
    kernel: &KernelSpec,
    perturbation: &PerturbationSpec,
    grid: &QuadratureGrid,
    x_star: &Vector,
) -> Result<Vector> {
    assemble_operator(kernel, perturbation, grid)?.eval(x_star)
}

/// Named kernels for the configuration surface.
pub fn kernel_by_name(name: &str) -> Result<KernelSpec> {
    match name {
        "constant" => Ok(KernelSpec::constant(1.0)),
        "one-plus-ts" => Ok(KernelSpec::one_plus_ts()),
        other => Err(Error::Config(format!(
            "unknown kernel '{other}'; known: constant, one-plus-ts (or a tabulated matrix)"
        ))),
    }
}

/// Named perturbations for the configuration surface.
pub fn perturbation_by_name(name: &str, c: f64) -> Result<PerturbationSpec> {
    match name {
        "zero" => Ok(PerturbationSpec::zero()),
        "quartic" => Ok(PerturbationSpec::quartic(c)),
        other => Err(Error::Config(format!(
            "unknown perturbation '{other}'; known: zero, quartic"
        ))),
    }
}

/// Parses a rule name.
pub fn rule_by_name(name: &str) -> Result<QuadratureRule> {
    match name {
        "trapezoid" => Ok(QuadratureRule::Trapezoid),
        "gauss-legendre" => Ok(QuadratureRule::GaussLegendre),
        other => Err(Error::Config(format!(
            "unknown quadrature rule '{other}'; known: trapezoid, gauss-legendre"
        ))),
    }
}
