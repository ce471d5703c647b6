//! The least-squares functional `phi_y(x) = 1/2 |F(x) - y|^2` and its
//! directional derivative chain:
//!
//! ```text
//! phi'(x)h   = <F(x) - y, F'(x)h>
//! phi''(x)h2 = |F'(x)h|^2 + <F(x) - y, F''(x)h^2>
//! phi'''(x)h3 = 3<F'(x)h, F''(x)h^2> + <F(x) - y, F'''(x)h^3>
//! ```
//!
//! The gradient is the coordinate vector `J(x)^T (F(x) - y)` representing
//! the pairing above.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_square, Matrix, Vector};
use crate::operator::OperatorSpec;

/// A scalar objective with a gradient; the interface consumed by the
/// descent, deformation, and saddle-search routines.
pub trait Functional: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
}

/// `phi_y(x) = 1/2 |F(x) - y|^2` for an operator `F` and target `y`.
#[derive(Clone)]
pub struct LeastSquaresFunctional {
    op: OperatorSpec,
    target: Vector,
}

impl LeastSquaresFunctional {
    pub fn new(op: OperatorSpec, target: Vector) -> Result<Self> {
        if target.len() != op.dim_out() {
            return Err(Error::Dimension(format!(
                "target dim {} does not match operator '{}' output dim {}",
                target.len(),
                op.name(),
                op.dim_out()
            )));
        }
        Ok(LeastSquaresFunctional { op, target })
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    /// Residual `F(x) - y`.
    pub fn residual(&self, x: &Vector) -> Result<Vector> {
        Ok(self.op.eval(x)? - &self.target)
    }

    /// `phi(x) = 1/2 |F(x) - y|^2`, always nonnegative.
    pub fn phi(&self, x: &Vector) -> Result<f64> {
        Ok(0.5 * self.residual(x)?.norm_squared())
    }

    /// Gradient `J(x)^T (F(x) - y)`.
    pub fn grad_phi(&self, x: &Vector) -> Result<Vector> {
        let r = self.residual(x)?;
        Ok(self.op.jacobian(x)?.transpose() * r)
    }

    /// Second directional derivative `|F'(x)h|^2 + <F(x)-y, F''(x)h^2>`.
    pub fn phi_d2_dir(&self, x: &Vector, h: &Vector) -> Result<f64> {
        let r = self.residual(x)?;
        let jh = self.op.jacobian(x)? * h;
        Ok(jh.norm_squared() + r.dot(&self.op.d2_dir(x, h)?))
    }

    /// Third directional derivative
    /// `3<F'(x)h, F''(x)h^2> + <F(x)-y, F'''(x)h^3>`.
    pub fn phi_d3_dir(&self, x: &Vector, h: &Vector) -> Result<f64> {
        let r = self.residual(x)?;
        let jh = self.op.jacobian(x)? * h;
        let d2 = self.op.d2_dir(x, h)?;
        let d3 = self.op.d3_dir(x, h)?;
        Ok(3.0 * jh.dot(&d2) + r.dot(&d3))
    }

    /// Samples `phi` around a critical point and fits the local expansion;
    /// see [`TaylorReport`].
    pub fn taylor_check(&self, x_star: &Vector, opts: &TaylorOpts) -> Result<TaylorReport> {
        taylor_check(self, x_star, opts)
    }
}

impl Functional for LeastSquaresFunctional {
    fn dim(&self) -> usize {
        self.op.dim_in()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        self.phi(x)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.grad_phi(x)
    }
}

/// Options for [`taylor_check`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TaylorOpts {
    /// Largest sampling radius around the critical point.
    pub radius: f64,
    /// Radii per direction, geometric in `[radius/100, radius]`, sampled at
    /// both signs.
    pub samples: usize,
    /// Number of sampled unit directions.
    pub directions: usize,
    /// Gradient-norm bound below which `x_star` counts as critical.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for TaylorOpts {
    fn default() -> Self {
        TaylorOpts {
            radius: 1e-2,
            samples: 64,
            directions: 8,
            grad_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Empirical local expansion of `phi` around a critical point.
///
/// `phi(x* + t u) - phi(x*)` is fit against `sum_{k=1..6} c_k t^k` per
/// direction `u`. At a local minimizer the odd part must not dominate; at a
/// degenerate minimizer the cubic coefficient itself must vanish, which is
/// the sign-change argument behind the third-order expansion.
#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    /// Largest `|c_3|` over the sampled directions.
    pub cubic_coefficient: f64,
    /// Fitted `[c_1 .. c_6]` per direction.
    pub coefficients: Vec<[f64; 6]>,
    /// Smallest sampled `phi(x) - phi(x_star)`.
    pub min_delta: f64,
    /// No sampled value fell below `phi(x_star)` (within roundoff slack).
    pub is_local_min: bool,
    /// The cubic term exceeds half the even-order contribution at the
    /// sampling radius in some direction, i.e. a sign change is visible.
    pub cubic_dominant: bool,
    pub radius: f64,
    pub directions: usize,
}

fn taylor_check(
    f: &LeastSquaresFunctional,
    x_star: &Vector,
    opts: &TaylorOpts,
) -> Result<TaylorReport> {
    if opts.radius <= 0.0 || opts.samples < 8 {
        return Err(Error::Config(
            "taylor_check needs radius > 0 and at least 8 samples".into(),
        ));
    }
    let gn = f.grad_phi(x_star)?.norm();
    if gn > opts.grad_tol {
        return Err(Error::Precondition(format!(
            "taylor_check requires a critical point: |grad| = {gn:.3e} > {:.3e}",
            opts.grad_tol
        )));
    }
    let phi0 = f.phi(x_star)?;
    let mut dirs = crate::sampling::unit_directions(f.dim(), opts.directions, opts.seed);
    dirs.truncate((2 * f.dim()).max(opts.directions));
    let ratio = (opts.radius / (opts.radius / 100.0)).powf(1.0 / (opts.samples - 1) as f64);

    let mut coefficients = Vec::with_capacity(dirs.len());
    let mut cubic_coefficient: f64 = 0.0;
    let mut min_delta = f64::INFINITY;
    let mut cubic_dominant = false;

    for u in &dirs {
        // Signed samples; fit in the scaled variable tau = t / radius for
        // conditioning, then rescale the coefficients.
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut t = opts.radius / 100.0;
        for _ in 0..opts.samples {
            for sign in [1.0, -1.0] {
                let ts = sign * t;
                let delta = f.phi(&(x_star + u * ts))? - phi0;
                min_delta = min_delta.min(delta);
                let tau = ts / opts.radius;
                rows.push([tau, tau.powi(2), tau.powi(3), tau.powi(4), tau.powi(5), tau.powi(6)]);
                rhs.push(delta);
            }
            t *= ratio;
        }
        // Normal equations for the 6-parameter fit.
        let mut ata = Matrix::zeros(6, 6);
        let mut atb = Vector::zeros(6);
        for (row, &b) in rows.iter().zip(rhs.iter()) {
            for i in 0..6 {
                atb[i] += row[i] * b;
                for j in 0..6 {
                    ata[(i, j)] += row[i] * row[j];
                }
            }
        }
        let scaled = solve_square(&ata, &atb)
            .map_err(|_| Error::Numerical("taylor_check fit is singular".into()))?;
        let mut c = [0.0; 6];
        for k in 0..6 {
            c[k] = scaled[k] / opts.radius.powi(k as i32 + 1);
        }
        cubic_coefficient = cubic_coefficient.max(c[2].abs());
        let cubic_at_r = c[2].abs() * opts.radius.powi(3);
        let even_at_r =
            c[1].abs() * opts.radius.powi(2) + c[3].abs() * opts.radius.powi(4) + c[5].abs() * opts.radius.powi(6);
        if cubic_at_r > 0.5 * even_at_r && cubic_at_r > 1e-12 * (1.0 + phi0) {
            cubic_dominant = true;
        }
        coefficients.push(c);
    }

    Ok(TaylorReport {
        cubic_coefficient,
        coefficients,
        min_delta,
        is_local_min: min_delta >= -1e-12 * (1.0 + phi0.abs()),
        cubic_dominant,
        radius: opts.radius,
        directions: dirs.len(),
    })
}
