//! Operator abstraction: evaluation plus directional derivatives up to
//! third order, with central finite-difference fallbacks, and the built-in
//! problem registry.
//!
//! An [`OperatorSpec`] is a map `F: R^m -> R^n` together with
//!
//! - its Jacobian `F'(x)` (an `n x m` matrix),
//! - the diagonal second directional derivative `F''(x)h^2`,
//! - the diagonal third directional derivative `F'''(x)h^3`.
//!
//! Only the diagonal `(h, h, h)` evaluations are exposed; that is all the
//! descent machinery uses. Derivatives may be supplied analytically or left
//! to finite differences.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

type EvalFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type JacFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type DirFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// How derivatives are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// Relative step sizes for the central-difference fallbacks, scaled by
/// `max(1, |x|)`. The defaults balance truncation against roundoff for each
/// stencil order.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdSteps {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            d1: 1e-6,
            d2: 1e-4,
            d3: 1e-3,
        }
    }
}

/// A differentiable map between finite-dimensional real coordinate spaces.
///
/// Evaluation is deterministic; cloning is cheap (callbacks are shared).
#[derive(Clone)]
pub struct OperatorSpec {
    name: String,
    dim_in: usize,
    dim_out: usize,
    eval: EvalFn,
    jac: Option<JacFn>,
    d2: Option<DirFn>,
    d3: Option<DirFn>,
    mode: DerivativeMode,
    fd: FdSteps,
}

impl std::fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("mode", &self.mode)
            .finish()
    }
}

impl OperatorSpec {
    /// Operator with analytic derivatives of all three orders.
    pub fn analytic(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        d2: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        d3: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        OperatorSpec {
            name: name.into(),
            dim_in,
            dim_out,
            eval: Arc::new(eval),
            jac: Some(Arc::new(jac)),
            d2: Some(Arc::new(d2)),
            d3: Some(Arc::new(d3)),
            mode: DerivativeMode::Analytic,
            fd: FdSteps::default(),
        }
    }

    /// Operator whose derivatives all come from central differences.
    pub fn finite_difference(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        OperatorSpec {
            name: name.into(),
            dim_in,
            dim_out,
            eval: Arc::new(eval),
            jac: None,
            d2: None,
            d3: None,
            mode: DerivativeMode::FiniteDifference,
            fd: FdSteps::default(),
        }
    }

    /// Overrides the finite-difference step sizes.
    pub fn with_fd_steps(mut self, fd: FdSteps) -> Self {
        self.fd = fd;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn is_square(&self) -> bool {
        self.dim_in == self.dim_out
    }

    fn check_input(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim_in {
            return Err(Error::Dimension(format!(
                "operator '{}' expects dim {}, got {}",
                self.name, self.dim_in, x.len()
            )));
        }
        Ok(())
    }

    fn check_direction(&self, h: &Vector) -> Result<()> {
        if h.len() != self.dim_in {
            return Err(Error::Dimension(format!(
                "direction dim {} does not match operator '{}' dim {}",
                h.len(),
                self.name,
                self.dim_in
            )));
        }
        Ok(())
    }

    fn finite(&self, v: Vector, what: &str) -> Result<Vector> {
        if v.iter().all(|e| e.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Numerical(format!(
                "non-finite {} from operator '{}'",
                what, self.name
            )))
        }
    }

    /// Evaluates `F(x)`.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        let out = (self.eval)(x);
        debug_assert_eq!(out.len(), self.dim_out);
        self.finite(out, "value")
    }

    /// Jacobian `F'(x)`, analytic when available, otherwise column-wise
    /// central differences.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.check_input(x)?;
        if self.mode == DerivativeMode::Analytic {
            if let Some(jac) = &self.jac {
                let m = jac(x);
                if m.iter().all(|e| e.is_finite()) {
                    return Ok(m);
                }
                return Err(Error::Numerical(format!(
                    "non-finite jacobian from operator '{}'",
                    self.name
                )));
            }
        }
        self.fd_jacobian(x)
    }

    fn fd_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.dim_out, self.dim_in);
        let mut xp = x.clone();
        for j in 0..self.dim_in {
            let step = self.fd.d1 * x[j].abs().max(1.0);
            xp[j] = x[j] + step;
            let fp = self.eval(&xp)?;
            xp[j] = x[j] - step;
            let fm = self.eval(&xp)?;
            xp[j] = x[j];
            out.set_column(j, &((fp - fm) / (2.0 * step)));
        }
        Ok(out)
    }

    /// Second directional derivative `F''(x)h^2`.
    ///
    /// The finite-difference path normalizes the direction and scales by
    /// `|h|^2`, so degree-2 homogeneity holds to the last bit.
    pub fn d2_dir(&self, x: &Vector, h: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        self.check_direction(h)?;
        if self.mode == DerivativeMode::Analytic {
            if let Some(d2) = &self.d2 {
                return self.finite(d2(x, h), "second directional derivative");
            }
        }
        let hn = h.norm();
        if hn == 0.0 {
            return Ok(Vector::zeros(self.dim_out));
        }
        let u = h / hn;
        let t = self.fd.d2 * x.norm().max(1.0);
        if t == 0.0 || !t.is_finite() {
            return Err(Error::Numerical("second-derivative step underflow".into()));
        }
        let fp = self.eval(&(x + &u * t))?;
        let f0 = self.eval(x)?;
        let fm = self.eval(&(x - &u * t))?;
        let stencil = (fp - &f0 * 2.0 + fm) / (t * t);
        self.finite(stencil * (hn * hn), "second directional derivative")
    }

    /// Third directional derivative `F'''(x)h^3`.
    ///
    /// The finite-difference stencil is arranged so that flipping `h` negates
    /// the result exactly, preserving oddness.
    pub fn d3_dir(&self, x: &Vector, h: &Vector) -> Result<Vector> {
        self.check_input(x)?;
        self.check_direction(h)?;
        if self.mode == DerivativeMode::Analytic {
            if let Some(d3) = &self.d3 {
                return self.finite(d3(x, h), "third directional derivative");
            }
        }
        let hn = h.norm();
        if hn == 0.0 {
            return Ok(Vector::zeros(self.dim_out));
        }
        let u = h / hn;
        let t = self.fd.d3 * x.norm().max(1.0);
        if t == 0.0 || !t.is_finite() {
            return Err(Error::Numerical("third-derivative step underflow".into()));
        }
        let a = self.eval(&(x + &u * (2.0 * t)))?;
        let b = self.eval(&(x + &u * t))?;
        let c = self.eval(&(x - &u * t))?;
        let d = self.eval(&(x - &u * (2.0 * t)))?;
        // (a - d) + 2(c - b): mirror-symmetric grouping keeps d3(-h) = -d3(h)
        // bit-exact.
        let stencil = ((a - d) + (c - b) * 2.0) / (2.0 * t * t * t);
        self.finite(stencil * (hn * hn * hn), "third directional derivative")
    }

    /// The translated operator `x -> F(x + shift)`, sharing callbacks.
    pub fn shifted(&self, shift: &Vector) -> Result<OperatorSpec> {
        self.check_input(shift)?;
        let s0 = shift.clone();
        let s1 = shift.clone();
        let s2 = shift.clone();
        let s3 = shift.clone();
        let eval = self.eval.clone();
        let jac = self.jac.clone();
        let d2 = self.d2.clone();
        let d3 = self.d3.clone();
        Ok(OperatorSpec {
            name: format!("{}+shift", self.name),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            eval: Arc::new(move |x| eval(&(x + &s0))),
            jac: jac.map(|j| -> JacFn { Arc::new(move |x: &Vector| j(&(x + &s1))) }),
            d2: d2.map(|d| -> DirFn { Arc::new(move |x: &Vector, h: &Vector| d(&(x + &s2), h)) }),
            d3: d3.map(|d| -> DirFn { Arc::new(move |x: &Vector, h: &Vector| d(&(x + &s3), h)) }),
            mode: self.mode,
            fd: self.fd,
        })
    }
}

/// Builds a scalar (1-D) analytic operator from pointwise derivatives.
fn scalar_op(
    name: &str,
    f: fn(f64) -> f64,
    f1: fn(f64) -> f64,
    f2: fn(f64) -> f64,
    f3: fn(f64) -> f64,
) -> OperatorSpec {
    OperatorSpec::analytic(
        name,
        1,
        1,
        move |x: &Vector| Vector::from_vec(vec![f(x[0])]),
        move |x: &Vector| Matrix::from_vec(1, 1, vec![f1(x[0])]),
        move |x: &Vector, h: &Vector| Vector::from_vec(vec![f2(x[0]) * h[0] * h[0]]),
        move |x: &Vector, h: &Vector| Vector::from_vec(vec![f3(x[0]) * h[0] * h[0] * h[0]]),
    )
}

/// `F(x) = x^3 + x^5` on the line. `F'` and `F''` vanish at the origin while
/// `F'''(0) = 6`, so inverting through zero exercises the cubic corrector.
pub fn quintic1d() -> OperatorSpec {
    scalar_op(
        "quintic1d",
        |x| x.powi(3) + x.powi(5),
        |x| 3.0 * x * x + 5.0 * x.powi(4),
        |x| 6.0 * x + 20.0 * x.powi(3),
        |x| 6.0 + 60.0 * x * x,
    )
}

/// The planar map
/// `F(x) = (x1^3 + x1^5 - x2^5, x2^3 + x2^5 + x1^5)`, degenerate at the
/// origin with `F'''(0)h^3 = 6(h1^3, h2^3)`.
pub fn planar() -> OperatorSpec {
    OperatorSpec::analytic(
        "planar",
        2,
        2,
        |x: &Vector| {
            let (a, b) = (x[0], x[1]);
            Vector::from_vec(vec![
                a.powi(3) + a.powi(5) - b.powi(5),
                b.powi(3) + b.powi(5) + a.powi(5),
            ])
        },
        |x: &Vector| {
            let (a, b) = (x[0], x[1]);
            Matrix::from_row_slice(
                2,
                2,
                &[
                    3.0 * a * a + 5.0 * a.powi(4),
                    -5.0 * b.powi(4),
                    5.0 * a.powi(4),
                    3.0 * b * b + 5.0 * b.powi(4),
                ],
            )
        },
        |x: &Vector, h: &Vector| {
            let (a, b) = (x[0], x[1]);
            let (p, q) = (h[0], h[1]);
            Vector::from_vec(vec![
                (6.0 * a + 20.0 * a.powi(3)) * p * p - 20.0 * b.powi(3) * q * q,
                (6.0 * b + 20.0 * b.powi(3)) * q * q + 20.0 * a.powi(3) * p * p,
            ])
        },
        |x: &Vector, h: &Vector| {
            let (a, b) = (x[0], x[1]);
            let (p, q) = (h[0], h[1]);
            Vector::from_vec(vec![
                (6.0 + 60.0 * a * a) * p.powi(3) - 60.0 * b * b * q.powi(3),
                (6.0 + 60.0 * b * b) * q.powi(3) + 60.0 * a * a * p.powi(3),
            ])
        },
    )
}

/// `F(x) = x^3`: the model degenerate problem, `F'''(0)h^3 = 6h^3`.
pub fn pure_cubic() -> OperatorSpec {
    scalar_op(
        "pure-cubic",
        |x| x.powi(3),
        |x| 3.0 * x * x,
        |x| 6.0 * x,
        |_| 6.0,
    )
}

/// `G(x) = x^3 - x`: non-injective control case, `G(-1) = G(0) = G(1) = 0`.
pub fn cube_minus_x() -> OperatorSpec {
    scalar_op(
        "cube-minus-x",
        |x| x.powi(3) - x,
        |x| 3.0 * x * x - 1.0,
        |x| 6.0 * x,
        |_| 6.0,
    )
}

/// `F(x) = x^2`: negative control. At the origin `F' = 0` but `F'' = 2`, so
/// the degeneracy hypothesis fails there.
pub fn square_map() -> OperatorSpec {
    scalar_op("square", |x| x * x, |x| 2.0 * x, |_| 2.0, |_| 0.0)
}

/// The identity map on the line.
pub fn linear_map() -> OperatorSpec {
    scalar_op("linear", |x| x, |_| 1.0, |_| 0.0, |_| 0.0)
}

/// `F(x) = atan(x)`: bounded map used as the Palais-Smale counter-example.
/// For targets outside `(-pi/2, pi/2)` the residual stays bounded while the
/// gradient of the least-squares functional vanishes at infinity.
pub fn arctan_bounded() -> OperatorSpec {
    scalar_op(
        "arctan-bounded",
        |x| x.atan(),
        |x| 1.0 / (1.0 + x * x),
        |x| {
            let d = 1.0 + x * x;
            -2.0 * x / (d * d)
        },
        |x| {
            let d = 1.0 + x * x;
            (6.0 * x * x - 2.0) / (d * d * d)
        },
    )
}

/// Names accepted by [`builtin`].
pub fn builtin_names() -> &'static [&'static str] {
    &[
        "quintic1d",
        "planar",
        "pure-cubic",
        "cube-minus-x",
        "square",
        "linear",
        "arctan-bounded",
    ]
}

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Result<OperatorSpec> {
    match name {
        "quintic1d" => Ok(quintic1d()),
        "planar" => Ok(planar()),
        "pure-cubic" => Ok(pure_cubic()),
        "cube-minus-x" => Ok(cube_minus_x()),
        "square" => Ok(square_map()),
        "linear" => Ok(linear_map()),
        "arctan-bounded" => Ok(arctan_bounded()),
        other => Err(Error::Config(format!(
            "unknown problem '{}'; known: {}",
            other,
            builtin_names().join(", ")
        ))),
    }
}
