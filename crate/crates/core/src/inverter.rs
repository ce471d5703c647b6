//! Global inversion driver: descends `phi_y` to a critical point,
//! classifies it, and applies a third-order corrector where the first two
//! derivatives vanish.
//!
//! Classification of a point `x` of a square operator:
//!
//! - `Regular`: the Jacobian is comfortably invertible
//!   (`sigma_min(F'(x)) > tol_bij`);
//! - `Degenerate`: `F'(x)` and the sampled `F''(x)h^2` both vanish while the
//!   sampled `F'''(x)h^3` does not, and the third derivative is accepted as
//!   onto (see below);
//! - `HypothesisViolated`: anything else, e.g. a singular but nonzero
//!   Jacobian, or a vanishing Jacobian with surviving second derivative.
//!
//! Onto-ness of a trilinear map has no finite certificate. The policy here:
//! accept when probing the basis directions reveals a coordinatewise
//! diagonal cubic `F'''(x)h^3 = (c_i h_i^3)` with every `c_i` nonzero
//! (verified against random directions), or when the problem configuration
//! asserts surjectivity outright.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::LeastSquaresFunctional;
use crate::linalg::{sigma_min, solve_square, Matrix, Vector};
use crate::operator::OperatorSpec;
use crate::sampling::{random_unit_directions, unit_directions};

/// Classification tag per the trichotomy above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalKind {
    Regular,
    Degenerate,
    HypothesisViolated,
}

/// Classification of a critical-point candidate, with the sampled evidence.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointClass {
    pub tag: CriticalKind,
    /// Smallest singular value of `F'(x)`.
    pub sigma_min: f64,
    /// Largest `|F''(x)h^2|` over the sampled unit directions.
    pub d2_norm: f64,
    /// Smallest sup-norm of `F'''(x)h^3` over the sampled unit directions.
    pub d3_inf: f64,
    /// Largest sup-norm of `F'''(x)h^3` over the sampled unit directions.
    pub d3_sup: f64,
    /// Cubic coefficients when the diagonal probe succeeded.
    pub diagonal_cubic: Option<Vec<f64>>,
    /// Seed used for the sampled directions.
    pub seed: u64,
}

/// Tolerances and sampling controls for [`classify_critical`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyOpts {
    /// `sigma_min` threshold for bijectivity of the Jacobian.
    pub tol_bij: f64,
    /// Threshold below which sampled derivative norms count as zero.
    pub tol_zero: f64,
    /// Random unit directions sampled in addition to the signed basis.
    pub random_dirs: usize,
    /// Accept onto-ness of the third derivative without a diagonal probe.
    pub assert_surjective: bool,
    pub seed: u64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        ClassifyOpts {
            tol_bij: 1e-8,
            tol_zero: 1e-8,
            random_dirs: 32,
            assert_surjective: false,
            seed: 0,
        }
    }
}

/// Probes whether `F'''(x)h^3` is coordinatewise diagonal, `(c_i h_i^3)_i`.
///
/// Basis directions yield the candidate coefficients; a few random
/// directions then have to reproduce the model, which rejects maps (like the
/// discretized integral operator) that merely look diagonal on the basis.
fn diagonal_cubic_probe(op: &OperatorSpec, x: &Vector, seed: u64) -> Result<Option<Vec<f64>>> {
    let dim = op.dim_in();
    let mut coeffs = vec![0.0; dim];
    let mut scale: f64 = 0.0;
    let mut cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut e = Vector::zeros(dim);
        e[j] = 1.0;
        let col = op.d3_dir(x, &e)?;
        scale = scale.max(col.amax());
        coeffs[j] = col[j];
        cols.push(col);
    }
    if scale == 0.0 {
        return Ok(None);
    }
    let tol = 1e-9 * scale;
    for (j, col) in cols.iter().enumerate() {
        for i in 0..dim {
            if i != j && col[i].abs() > tol {
                return Ok(None);
            }
        }
    }
    // Cross-check on random directions: the basis probe alone cannot tell a
    // diagonal cubic from one with inter-coordinate coupling.
    for h in random_unit_directions(dim, 3, seed ^ 0xd1a6) {
        let actual = op.d3_dir(x, &h)?;
        let modeled = Vector::from_fn(dim, |i, _| coeffs[i] * h[i].powi(3));
        if (actual - modeled).amax() > 1e-8 * scale.max(1.0) {
            return Ok(None);
        }
    }
    Ok(Some(coeffs))
}

/// Classifies a point of a square operator; see the module docs.
pub fn classify_critical(
    op: &OperatorSpec,
    x: &Vector,
    opts: &ClassifyOpts,
) -> Result<CriticalPointClass> {
    if !op.is_square() {
        return Err(Error::Unsupported(format!(
            "classification needs a square operator, '{}' is {}x{}",
            op.name(),
            op.dim_out(),
            op.dim_in()
        )));
    }
    let jac = op.jacobian(x)?;
    let sigma = sigma_min(&jac);
    let jac_norm = jac.amax();

    let dirs = unit_directions(op.dim_in(), opts.random_dirs, opts.seed);
    let mut d2_norm: f64 = 0.0;
    let mut d3_inf = f64::INFINITY;
    let mut d3_sup: f64 = 0.0;
    for h in &dirs {
        d2_norm = d2_norm.max(op.d2_dir(x, h)?.amax());
        let d3 = op.d3_dir(x, h)?.amax();
        d3_inf = d3_inf.min(d3);
        d3_sup = d3_sup.max(d3);
    }

    let diagonal_cubic = diagonal_cubic_probe(op, x, opts.seed)?;
    let tag = if sigma > opts.tol_bij {
        CriticalKind::Regular
    } else if jac_norm <= opts.tol_zero && d2_norm <= opts.tol_zero && d3_sup > opts.tol_zero {
        let onto = opts.assert_surjective
            || diagonal_cubic
                .as_ref()
                .is_some_and(|c| c.iter().all(|ci| ci.abs() > opts.tol_zero));
        if onto {
            CriticalKind::Degenerate
        } else {
            CriticalKind::HypothesisViolated
        }
    } else {
        CriticalKind::HypothesisViolated
    };

    Ok(CriticalPointClass {
        tag,
        sigma_min: sigma,
        d2_norm,
        d3_inf,
        d3_sup,
        diagonal_cubic,
        seed: opts.seed,
    })
}

/// One damped Newton step for the residual: `x - damping * F'(x)^{-1}(F(x)-y)`.
///
/// Falls back to a Tikhonov-regularized normal system when the plain solve
/// fails.
pub fn gauss_newton_step(
    op: &OperatorSpec,
    y: &Vector,
    x: &Vector,
    damping: f64,
) -> Result<Vector> {
    if !(0.0 < damping && damping <= 1.0) {
        return Err(Error::Config(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let residual = op.eval(x)? - y;
    let jac = op.jacobian(x)?;
    let step = match solve_square(&jac, &residual) {
        Ok(s) => s,
        Err(_) => {
            let jt = jac.transpose();
            let mut normal = &jt * &jac;
            let reg = 1e-12 * normal.amax().max(1e-300);
            for i in 0..normal.nrows() {
                normal[(i, i)] += reg;
            }
            solve_square(&normal, &(jt * &residual)).map_err(|_| {
                Error::SingularJacobian(format!(
                    "jacobian of '{}' is singular beyond regularization",
                    op.name()
                ))
            })?
        }
    };
    Ok(x - step * damping)
}

/// Third-order corrector: returns `x + h` where `h` approximately solves
/// `F'''(x)h^3 = y - F(x)`.
///
/// When the cubic is coordinatewise diagonal the solution is the
/// sign-preserving real cube root `h_i = cbrt((y_i - F_i(x)) / c_i)`; for
/// `F'''(0)h^3 = 6h^3` this is the closed form `h = cbrt(y/6)`. Otherwise
/// `h` is found by an inner least-squares minimization from multiple starts.
pub fn cubic_step(op: &OperatorSpec, y: &Vector, x: &Vector) -> Result<Vector> {
    if y.len() != op.dim_out() {
        return Err(Error::Dimension(format!(
            "target dim {} does not match operator '{}' output dim {}",
            y.len(),
            op.name(),
            op.dim_out()
        )));
    }
    let delta = y - op.eval(x)?;
    if let Some(coeffs) = diagonal_cubic_probe(op, x, 0)? {
        if coeffs.iter().all(|c| c.abs() > 1e-12) {
            let h = Vector::from_fn(op.dim_in(), |i, _| (delta[i] / coeffs[i]).cbrt());
            return Ok(x + h);
        }
    }
    let h = solve_cubic_least_squares(op, x, &delta)?;
    Ok(x + h)
}

/// Inner solver for `min_h |F'''(x)h^3 - delta|^2` by Gauss-Newton with a
/// finite-difference Jacobian of `h -> F'''(x)h^3`, from several starts.
fn solve_cubic_least_squares(op: &OperatorSpec, x: &Vector, delta: &Vector) -> Result<Vector> {
    let dim = op.dim_in();
    let scale = delta.amax().max(1.0);
    let cubic = |h: &Vector| op.d3_dir(x, h);

    let mut starts: Vec<Vector> = Vec::new();
    // Componentwise cube-root guess against the basis-probe coefficients.
    let mut probe = vec![0.0; dim];
    for j in 0..dim {
        let mut e = Vector::zeros(dim);
        e[j] = 1.0;
        probe[j] = cubic(&e)?[j];
    }
    if probe.iter().all(|c| c.abs() > 1e-12) {
        starts.push(Vector::from_fn(dim, |i, _| (delta[i] / probe[i]).cbrt()));
    }
    starts.push(Vector::from_fn(dim, |i, _| (delta[i] / 6.0).cbrt()));
    for (k, u) in random_unit_directions(dim, 4, 0xc0b1c).into_iter().enumerate() {
        starts.push(u * (0.5 + 0.5 * k as f64));
    }

    let mut best: Option<(f64, Vector)> = None;
    for start in starts {
        let mut h = start;
        let mut value = (cubic(&h)? - delta).norm();
        for _ in 0..80 {
            if value <= 1e-12 * scale {
                break;
            }
            let jac = fd_jacobian_of(&cubic, &h, 1e-6)?;
            let residual = cubic(&h)? - delta;
            let step = match solve_square(&jac, &residual) {
                Ok(s) => s,
                Err(_) => {
                    let jt = jac.transpose();
                    let mut normal = &jt * &jac;
                    let reg = 1e-10 * normal.amax().max(1e-300);
                    for i in 0..dim {
                        normal[(i, i)] += reg;
                    }
                    match solve_square(&normal, &(jt * &residual)) {
                        Ok(s) => s,
                        Err(_) => break,
                    }
                }
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = &h - &step * t;
                let cand_value = (cubic(&cand)? - delta).norm();
                if cand_value < value {
                    h = cand;
                    value = cand_value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, h));
        }
        if best.as_ref().unwrap().0 <= 1e-12 * scale {
            break;
        }
    }
    let (value, h) = best.unwrap();
    if value <= 1e-9 * scale {
        Ok(h)
    } else {
        Err(Error::DegenerateSolve(format!(
            "inner cubic solve stalled at residual {value:.3e}"
        )))
    }
}

fn fd_jacobian_of<F>(f: &F, x: &Vector, step: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let dim = x.len();
    let probe = f(x)?;
    let mut jac = Matrix::zeros(probe.len(), dim);
    let mut xp = x.clone();
    for j in 0..dim {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Outcome of an inversion run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    Stalled,
    HypothesisViolated,
}

/// One recorded iteration of the descent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub phi: f64,
    pub grad_norm: f64,
}

/// Result of [`invert`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub class_at_solution: CriticalPointClass,
    pub iterations: usize,
    /// `(iteration, phi, gradient norm)` after every accepted step of the
    /// reported start; phi is non-increasing.
    pub trace: Vec<TracePoint>,
    pub status: SolveStatus,
    pub seed: u64,
    /// Starts attempted before the reported outcome.
    pub starts_used: usize,
    /// Third-order corrector steps accepted along the reported run.
    pub cubic_steps: usize,
}

impl SolveReport {
    pub fn solution_vector(&self) -> Vector {
        Vector::from_vec(self.solution.clone())
    }
}

/// Options for [`invert`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvertOpts {
    /// Residual norm below which the run converged.
    pub tol_res: f64,
    /// Gradient norm treated as stationary.
    pub tol_grad: f64,
    /// `sigma_min` threshold for bijectivity (classification and the
    /// Gauss-Newton gate).
    pub tol_bij: f64,
    /// Sampled-derivative threshold for classification.
    pub tol_zero: f64,
    /// Region threshold for switching to the cubic corrector: used whenever
    /// `sigma_min` and the probed second derivative both fall below it, not
    /// only at exact zeros. Plain descent crawls in the sextic-flat basins
    /// around degenerate points.
    pub tol_switch: f64,
    /// Step-size floor: once accepted steps shrink below
    /// `tol_step * (1 + |x|)` with a stationary gradient, the run stops.
    pub tol_step: f64,
    pub max_iters: usize,
    /// Total number of starts (the supplied `x0` plus seeded random ones).
    pub starts: usize,
    pub seed: u64,
    /// Accept onto-ness of the third derivative by assertion.
    pub assert_surjective: bool,
}

impl Default for InvertOpts {
    fn default() -> Self {
        InvertOpts {
            tol_res: 1e-9,
            tol_grad: 1e-10,
            tol_bij: 1e-8,
            tol_zero: 1e-8,
            tol_switch: 1e-4,
            tol_step: 1e-12,
            max_iters: 400,
            starts: 8,
            seed: 0,
            assert_surjective: false,
        }
    }
}

impl InvertOpts {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            self.tol_res,
            self.tol_grad,
            self.tol_bij,
            self.tol_zero,
            self.tol_switch,
            self.tol_step,
        ];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("all tolerances must be positive".into()));
        }
        if self.max_iters == 0 || self.starts == 0 {
            return Err(Error::Config(
                "max_iters and starts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn classify_opts(&self) -> ClassifyOpts {
        ClassifyOpts {
            tol_bij: self.tol_bij,
            tol_zero: self.tol_zero,
            random_dirs: 32,
            assert_surjective: self.assert_surjective,
            seed: self.seed,
        }
    }
}

struct SingleRun {
    x: Vector,
    residual_norm: f64,
    class: CriticalPointClass,
    status: SolveStatus,
    trace: Vec<TracePoint>,
    cubic_steps: usize,
}

/// Inverts `F(x) = y` by monotone descent on `phi_y`.
///
/// Strategy per iteration: the cubic corrector inside the degenerate region,
/// damped Gauss-Newton where the Jacobian is invertible, gradient descent
/// with backtracking otherwise; a step is accepted only if it strictly
/// decreases `phi`. A start ends when the residual passes `tol_res`, when no
/// strict-descent step exists, when steps shrink below the floor at a
/// stationary gradient, or at `max_iters`. Remaining starts are tried until
/// one converges; the report carries the strongest outcome observed
/// (`Converged` over `HypothesisViolated` over `Stalled`).
pub fn invert(op: &OperatorSpec, y: &Vector, x0: &Vector, opts: &InvertOpts) -> Result<SolveReport> {
    opts.validate()?;
    if !op.is_square() {
        return Err(Error::Unsupported(format!(
            "invert needs a square operator, '{}' is {}x{}",
            op.name(),
            op.dim_out(),
            op.dim_in()
        )));
    }
    if y.len() != op.dim_out() || x0.len() != op.dim_in() {
        return Err(Error::Dimension(
            "target or start dimension does not match the operator".into(),
        ));
    }

    let f = LeastSquaresFunctional::new(op.clone(), y.clone())?;
    let dim = op.dim_in();
    let mut starts = Vec::with_capacity(opts.starts);
    starts.push(x0.clone());
    let radii = [0.5, 1.0, 2.0, 4.0];
    for (k, u) in random_unit_directions(dim, opts.starts.saturating_sub(1), opts.seed)
        .into_iter()
        .enumerate()
    {
        starts.push(x0 + u * radii[k % radii.len()]);
    }

    let mut best: Option<SingleRun> = None;
    let mut starts_used = 0;
    for start in &starts {
        starts_used += 1;
        let run = run_single(op, &f, y, start, opts)?;
        let better = match (&best, &run.status) {
            (None, _) => true,
            (Some(_), SolveStatus::Converged) => true,
            (Some(b), SolveStatus::HypothesisViolated) => b.status == SolveStatus::Stalled,
            (Some(b), SolveStatus::Stalled) => {
                b.status == SolveStatus::Stalled && run.residual_norm < b.residual_norm
            }
        };
        if better {
            best = Some(run);
        }
        if matches!(best.as_ref().unwrap().status, SolveStatus::Converged) {
            break;
        }
    }

    let run = best.expect("at least one start");
    Ok(SolveReport {
        solution: run.x.as_slice().to_vec(),
        residual_norm: run.residual_norm,
        class_at_solution: run.class,
        iterations: run.trace.last().map_or(0, |t| t.iter),
        trace: run.trace,
        status: run.status,
        seed: opts.seed,
        starts_used,
        cubic_steps: run.cubic_steps,
    })
}

fn run_single(
    op: &OperatorSpec,
    f: &LeastSquaresFunctional,
    y: &Vector,
    x0: &Vector,
    opts: &InvertOpts,
) -> Result<SingleRun> {
    let classify = opts.classify_opts();
    let mut x = x0.clone();
    let mut phi = f.phi(&x)?;
    let mut grad = f.grad_phi(&x)?;
    let mut trace = vec![TracePoint {
        iter: 0,
        phi,
        grad_norm: grad.norm(),
    }];
    let mut cubic_steps = 0;

    let finish = |x: Vector,
                  trace: Vec<TracePoint>,
                  cubic_steps: usize,
                  stationary: bool|
     -> Result<SingleRun> {
        let residual_norm = (op.eval(&x)? - y).norm();
        let class = classify_critical(op, &x, &classify)?;
        let status = if residual_norm <= opts.tol_res {
            SolveStatus::Converged
        } else if stationary && class.tag == CriticalKind::HypothesisViolated {
            SolveStatus::HypothesisViolated
        } else {
            SolveStatus::Stalled
        };
        Ok(SingleRun {
            x,
            residual_norm,
            class,
            status,
            trace,
            cubic_steps,
        })
    };

    for iter in 1..=opts.max_iters {
        let residual_norm = (2.0 * phi).sqrt();
        if residual_norm <= opts.tol_res {
            return finish(x, trace, cubic_steps, true);
        }

        let jac = op.jacobian(&x)?;
        let sigma = sigma_min(&jac);
        let mut accepted: Option<(Vector, f64, bool)> = None;

        // Degenerate region: try the third-order corrector first.
        if sigma <= opts.tol_switch {
            let mut d2_probe: f64 = 0.0;
            for j in 0..op.dim_in() {
                let mut e = Vector::zeros(op.dim_in());
                e[j] = 1.0;
                d2_probe = d2_probe.max(op.d2_dir(&x, &e)?.amax());
            }
            if d2_probe <= opts.tol_switch {
                if let Ok(cand) = cubic_step(op, y, &x) {
                    let cand_phi = f.phi(&cand)?;
                    if cand_phi < phi {
                        accepted = Some((cand, cand_phi, true));
                    }
                }
            }
        }

        // Gauss-Newton with backtracking damping.
        if accepted.is_none() && sigma > opts.tol_bij {
            let mut damping = 1.0;
            for _ in 0..40 {
                match gauss_newton_step(op, y, &x, damping) {
                    Ok(cand) => {
                        let cand_phi = f.phi(&cand)?;
                        if cand_phi < phi {
                            accepted = Some((cand, cand_phi, false));
                            break;
                        }
                    }
                    Err(_) => break,
                }
                damping *= 0.5;
                if damping < 1e-10 {
                    break;
                }
            }
        }

        // Levenberg-style regularized step; unlike the plain Gauss-Newton
        // gate this stays well-scaled when sigma_min is tiny but nonzero,
        // which is exactly the crawl region around near-degenerate points.
        if accepted.is_none() {
            let jt = jac.transpose();
            let mut normal = &jt * &jac;
            let reg = 1e-12 * normal.amax().max(1e-300);
            for i in 0..normal.nrows() {
                normal[(i, i)] += reg;
            }
            let rhs = &jt * (op.eval(&x)? - y);
            if let Ok(step) = solve_square(&normal, &rhs) {
                let mut t = 1.0;
                for _ in 0..40 {
                    let cand = &x - &step * t;
                    let cand_phi = f.phi(&cand)?;
                    if cand_phi < phi {
                        accepted = Some((cand, cand_phi, false));
                        break;
                    }
                    t *= 0.5;
                }
            }
        }

        // Fallback: plain gradient descent with backtracking.
        if accepted.is_none() {
            let gn = grad.norm();
            if gn > 0.0 {
                let mut t = (1.0 + x.norm()) / gn.max(1.0);
                for _ in 0..60 {
                    let cand = &x - &grad * t;
                    let cand_phi = f.phi(&cand)?;
                    if cand_phi < phi {
                        accepted = Some((cand, cand_phi, false));
                        break;
                    }
                    t *= 0.5;
                }
            }
        }

        match accepted {
            None => {
                // Stationary in floating point: no strict-descent step.
                return finish(x, trace, cubic_steps, true);
            }
            Some((cand, cand_phi, was_cubic)) => {
                let step_norm = (&cand - &x).norm();
                x = cand;
                phi = cand_phi;
                grad = f.grad_phi(&x)?;
                if was_cubic {
                    cubic_steps += 1;
                }
                trace.push(TracePoint {
                    iter,
                    phi,
                    grad_norm: grad.norm(),
                });
                if step_norm <= opts.tol_step * (1.0 + x.norm()) && grad.norm() <= opts.tol_grad {
                    return finish(x, trace, cubic_steps, true);
                }
            }
        }
    }
    finish(x, trace, cubic_steps, false)
}

/// Independently re-checks a report: re-evaluates the residual and
/// re-classifies the solution point. True iff the residual passes `tol_res`
/// and the point is `Regular` or `Degenerate`.
pub fn certify(op: &OperatorSpec, y: &Vector, report: &SolveReport, opts: &InvertOpts) -> bool {
    let x = report.solution_vector();
    let residual = match op.eval(&x) {
        Ok(fx) => (fx - y).norm(),
        Err(_) => return false,
    };
    if residual > opts.tol_res {
        return false;
    }
    match classify_critical(op, &x, &opts.classify_opts()) {
        Ok(class) => matches!(class.tag, CriticalKind::Regular | CriticalKind::Degenerate),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{builtin, cube_minus_x, planar, pure_cubic, quintic1d, square_map};
    use approx::assert_relative_eq;

    fn v(entries: &[f64]) -> Vector {
        Vector::from_vec(entries.to_vec())
    }

    /// Bisection oracle for strictly increasing scalar maps.
    pub(crate) fn bisect(f: impl Fn(f64) -> f64, y: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while f(lo) > y {
            lo *= 2.0;
        }
        while f(hi) < y {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn classify_examples() {
        let q = quintic1d();
        let reg = classify_critical(&q, &v(&[1.0]), &ClassifyOpts::default()).unwrap();
        assert_eq!(reg.tag, CriticalKind::Regular);
        assert_relative_eq!(reg.sigma_min, 8.0);

        let deg = classify_critical(&q, &v(&[0.0]), &ClassifyOpts::default()).unwrap();
        assert_eq!(deg.tag, CriticalKind::Degenerate);
        assert!(deg.d2_norm <= 1e-12);
        assert_relative_eq!(deg.d3_sup, 6.0, max_relative = 1e-12);
        assert_eq!(deg.diagonal_cubic.as_deref(), Some(&[6.0][..]));

        let violated = classify_critical(&square_map(), &v(&[0.0]), &ClassifyOpts::default()).unwrap();
        assert_eq!(violated.tag, CriticalKind::HypothesisViolated);
    }

    #[test]
    fn classify_regular_away_from_origin() {
        let q = quintic1d();
        for x in [-2.0, -0.5, -0.1, 0.1, 0.35, 1.0, 3.0] {
            let c = classify_critical(&q, &v(&[x]), &ClassifyOpts::default()).unwrap();
            assert_eq!(c.tag, CriticalKind::Regular, "at x = {x}");
        }
    }

    #[test]
    fn classify_planar_origin_degenerate() {
        let c = classify_critical(&planar(), &v(&[0.0, 0.0]), &ClassifyOpts::default()).unwrap();
        assert_eq!(c.tag, CriticalKind::Degenerate);
        assert_eq!(c.diagonal_cubic.as_deref(), Some(&[6.0, 6.0][..]));
        // min over unit h of max_i |6 h_i^3| is 6 / (sqrt 2)^3 ~ 2.12 at the
        // diagonal; the sampled minimum sits somewhere above it.
        let exact = 6.0 / 2.0f64.sqrt().powi(3);
        assert!(c.d3_inf >= exact - 1e-9 && c.d3_inf <= 6.0, "d3_inf = {}", c.d3_inf);
        assert_relative_eq!(c.d3_sup, 6.0, max_relative = 1e-12);
    }

    #[test]
    fn classify_rejects_rectangular() {
        let wide = OperatorSpec::finite_difference("wide", 2, 1, |x: &Vector| {
            Vector::from_vec(vec![x[0] + x[1]])
        });
        assert!(matches!(
            classify_critical(&wide, &v(&[0.0, 0.0]), &ClassifyOpts::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn gauss_newton_fixed_point_and_linear_exactness() {
        let q = quintic1d();
        let x = gauss_newton_step(&q, &v(&[2.0]), &v(&[1.0]), 1.0).unwrap();
        assert_eq!(x[0], 1.0);

        let twice = OperatorSpec::analytic(
            "2x",
            1,
            1,
            |x: &Vector| Vector::from_vec(vec![2.0 * x[0]]),
            |_: &Vector| Matrix::from_vec(1, 1, vec![2.0]),
            |_: &Vector, _: &Vector| Vector::zeros(1),
            |_: &Vector, _: &Vector| Vector::zeros(1),
        );
        let x = gauss_newton_step(&twice, &v(&[4.0]), &v(&[0.0]), 1.0).unwrap();
        assert_relative_eq!(x[0], 2.0);
    }

    #[test]
    fn gauss_newton_descends_phi() {
        let q = quintic1d();
        let f = LeastSquaresFunctional::new(q.clone(), v(&[2.0])).unwrap();
        let x0 = v(&[1.5]);
        let mut damping = 1.0;
        let phi0 = f.phi(&x0).unwrap();
        loop {
            let x1 = gauss_newton_step(&q, &v(&[2.0]), &x0, damping).unwrap();
            if f.phi(&x1).unwrap() < phi0 {
                break;
            }
            damping *= 0.5;
            assert!(damping > 1e-8, "no damping produced descent");
        }
    }

    #[test]
    fn gauss_newton_rejects_bad_damping() {
        assert!(matches!(
            gauss_newton_step(&quintic1d(), &v(&[2.0]), &v(&[1.0]), 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cubic_step_closed_form() {
        let c = pure_cubic();
        // F'''(0)h^3 = 6h^3, so the corrector returns cbrt(y/6).
        let x = cubic_step(&c, &v(&[6.0]), &v(&[0.0])).unwrap();
        assert_eq!(x[0], 1.0);
        let x = cubic_step(&c, &v(&[-6.0]), &v(&[0.0])).unwrap();
        assert_eq!(x[0], -1.0);

        let p = planar();
        let x = cubic_step(&p, &v(&[6.0, -6.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!((x[0], x[1]), (1.0, -1.0));
    }

    #[test]
    fn invert_quintic_against_bisection() {
        let q = quintic1d();
        let opts = InvertOpts {
            tol_res: 1e-12,
            ..InvertOpts::default()
        };
        for y in [-10.0, -3.5, -0.5, 0.0, 0.25, 2.0, 7.5, 10.0] {
            let report = invert(&q, &v(&[y]), &v(&[0.0]), &opts).unwrap();
            assert_eq!(report.status, SolveStatus::Converged, "y = {y}");
            assert!(report.residual_norm <= 1e-10);
            let oracle = bisect(|x| x.powi(3) + x.powi(5), y);
            assert!(
                (report.solution[0] - oracle).abs() <= 1e-8,
                "y = {y}: {} vs oracle {}",
                report.solution[0],
                oracle
            );
            assert!(certify(&q, &v(&[y]), &report, &opts));
        }
    }

    #[test]
    fn invert_quintic_zero_target_from_offset_start() {
        let q = quintic1d();
        // The basin is sextic-flat around the root, so solution accuracy
        // 1e-8 needs a residual tolerance of about its cube.
        let opts = InvertOpts {
            tol_res: 1e-25,
            ..InvertOpts::default()
        };
        let report = invert(&q, &v(&[0.0]), &v(&[0.7]), &opts).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.solution[0].abs() <= 1e-8, "{}", report.solution[0]);
    }

    #[test]
    fn invert_planar_target() {
        let p = planar();
        let opts = InvertOpts {
            tol_res: 1e-10,
            ..InvertOpts::default()
        };
        let report = invert(&p, &v(&[1.0, 3.0]), &v(&[0.0, 0.0]), &opts).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.residual_norm <= 1e-8);
        assert!((report.solution[0] - 1.0).abs() <= 1e-6);
        assert!((report.solution[1] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn invert_trace_is_monotone() {
        let p = planar();
        let report = invert(&p, &v(&[2.5, -1.5]), &v(&[0.0, 0.0]), &InvertOpts::default()).unwrap();
        for pair in report.trace.windows(2) {
            assert!(pair[1].phi <= pair[0].phi);
        }
    }

    #[test]
    fn invert_square_map_impossible_target() {
        // phi(x) = 1/2 (x^2 + 1)^2 has a single critical point at 0 with
        // residual 1 and surviving second derivative.
        let report = invert(
            &square_map(),
            &v(&[-1.0]),
            &v(&[1.0]),
            &InvertOpts::default(),
        )
        .unwrap();
        assert_eq!(report.status, SolveStatus::HypothesisViolated);
        assert!(report.residual_norm > 0.9);
        assert_eq!(report.class_at_solution.tag, CriticalKind::HypothesisViolated);
        assert!(!certify(&square_map(), &v(&[-1.0]), &report, &InvertOpts::default()));
    }

    #[test]
    fn certify_rejects_large_residual() {
        let q = quintic1d();
        let opts = InvertOpts::default();
        let mut report = invert(&q, &v(&[2.0]), &v(&[0.0]), &opts).unwrap();
        report.solution = vec![1.1];
        assert!(!certify(&q, &v(&[2.0]), &report, &opts));
    }

    #[test]
    fn diagonal_cubic_inversion_starts_with_cubic_step() {
        // F(x)_i = c_i x_i^3 with distinct coefficients.
        let op = OperatorSpec::analytic(
            "diag-cubic",
            2,
            2,
            |x: &Vector| Vector::from_vec(vec![2.0 * x[0].powi(3), -0.5 * x[1].powi(3)]),
            |x: &Vector| {
                Matrix::from_row_slice(2, 2, &[6.0 * x[0] * x[0], 0.0, 0.0, -1.5 * x[1] * x[1]])
            },
            |x: &Vector, h: &Vector| {
                Vector::from_vec(vec![12.0 * x[0] * h[0] * h[0], -3.0 * x[1] * h[1] * h[1]])
            },
            |_: &Vector, h: &Vector| {
                Vector::from_vec(vec![12.0 * h[0].powi(3), -3.0 * h[1].powi(3)])
            },
        );
        let opts = InvertOpts {
            tol_res: 1e-13,
            ..InvertOpts::default()
        };
        for target in [[2.0, 1.0], [-4.0, 0.5], [0.75, -0.75]] {
            let report = invert(&op, &v(&target), &v(&[0.0, 0.0]), &opts).unwrap();
            assert_eq!(report.status, SolveStatus::Converged);
            assert!(report.residual_norm <= 1e-12, "residual {}", report.residual_norm);
            assert!(report.cubic_steps >= 1, "no cubic step used");
        }
    }

    #[test]
    fn multistart_recovers_from_violating_basin() {
        // Targets with a vanishing first coordinate pull the first start
        // onto the x1 = 0 axis, which is invariant under the descent and
        // carries singular Jacobians; later random starts converge.
        let p = planar();
        let opts = InvertOpts {
            tol_res: 1e-10,
            ..InvertOpts::default()
        };
        let report = invert(&p, &v(&[0.0, 3.0]), &v(&[0.0, 0.0]), &opts).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.starts_used > 1, "expected a multistart rescue");
        assert!(report.residual_norm <= 1e-8);
    }

    #[test]
    fn cube_minus_x_inversion_converges() {
        // Not injective, but every target is still attainable.
        let report = invert(
            &cube_minus_x(),
            &v(&[0.0]),
            &v(&[2.0]),
            &InvertOpts::default(),
        )
        .unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        let x = report.solution[0];
        assert!((x.powi(3) - x).abs() <= 1e-9);
    }

    #[test]
    fn invert_validates_options() {
        let bad = InvertOpts {
            tol_res: -1.0,
            ..InvertOpts::default()
        };
        assert!(matches!(
            invert(&quintic1d(), &v(&[1.0]), &v(&[0.0]), &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reports_are_deterministic() {
        let p = planar();
        let a = invert(&p, &v(&[2.0, 2.0]), &v(&[0.0, 0.0]), &InvertOpts::default()).unwrap();
        let b = invert(&p, &v(&[2.0, 2.0]), &v(&[0.0, 0.0]), &InvertOpts::default()).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.trace.len(), b.trace.len());
    }

    #[test]
    fn builtin_quintic_is_degenerate_only_at_origin() {
        let q = builtin("quintic1d").unwrap();
        let c0 = classify_critical(&q, &v(&[0.0]), &ClassifyOpts::default()).unwrap();
        assert_eq!(c0.tag, CriticalKind::Degenerate);
    }
}
