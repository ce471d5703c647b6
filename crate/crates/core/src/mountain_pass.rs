//! Saddle search by path relaxation, a discrete deformation flow, and the
//! injectivity auditor built on `psi(x) = 1/2 |F(x + x1) - F(x2)|^2`.
//!
//! The saddle finder discretizes a path between two low anchors, repeatedly
//! pushes the highest node downhill, and re-equidistributes the nodes by arc
//! length; once the relaxation stops making progress the highest node is
//! polished by Newton iteration on the gradient. The recorded path maximum
//! never increases across relaxation iterations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Functional, LeastSquaresFunctional};
use crate::inverter::{classify_critical, ClassifyOpts, CriticalKind, CriticalPointClass};
use crate::linalg::{solve_square, Matrix, Vector};
use crate::operator::OperatorSpec;
use crate::sampling::unit_directions;

/// Discretized path between two fixed anchors.
#[derive(Debug, Clone)]
pub struct PathState {
    pub nodes: Vec<Vector>,
    pub values: Vec<f64>,
}

impl PathState {
    /// Index of the highest interior node.
    pub fn max_index(&self) -> usize {
        let mut best = 1;
        for i in 1..self.values.len() - 1 {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        best
    }

    fn interior_max(&self) -> f64 {
        self.values[1..self.values.len() - 1]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn polyline_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }
}

/// Options for [`mountain_pass`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MountainPassOpts {
    /// Path discretization; at least 8.
    pub nodes: usize,
    pub max_iters: usize,
    /// Gradient norm required of the polished critical point.
    pub tol_grad: f64,
    /// Gradient norm at the highest node below which relaxation hands over
    /// to the polish phase.
    pub relax_tol: f64,
    /// Initial descent step as a fraction of the mesh width.
    pub step_frac: f64,
    /// Relaxation stops when the recorded maxima move less than this
    /// (relative) over a trailing window.
    pub stagnation_eps: f64,
    /// Barrier detection slack: the initial interior maximum must exceed
    /// the anchor values by more than this.
    pub geom_tol: f64,
    pub seed: u64,
}

impl Default for MountainPassOpts {
    fn default() -> Self {
        MountainPassOpts {
            nodes: 33,
            max_iters: 500,
            tol_grad: 1e-10,
            relax_tol: 1e-3,
            step_frac: 0.1,
            stagnation_eps: 1e-14,
            geom_tol: 1e-9,
            seed: 0,
        }
    }
}

/// Result of a saddle search.
#[derive(Debug, Clone, Serialize)]
pub struct MountainPassReport {
    pub critical_point: Vec<f64>,
    pub critical_value: f64,
    pub gradient_norm: f64,
    /// Number of recorded relaxation iterations.
    pub path_history_length: usize,
    /// Interior path maximum after each relaxation iteration;
    /// non-increasing.
    pub path_max_history: Vec<f64>,
    /// Gradient norm at the highest node, per relaxation iteration.
    pub path_grad_history: Vec<f64>,
    /// Max-over-path at the end of relaxation.
    pub barrier_estimate: f64,
    pub final_path: Vec<Vec<f64>>,
    pub final_values: Vec<f64>,
}

fn straight_path(a: &Vector, b: &Vector, n: usize) -> Vec<Vector> {
    let mut nodes = Vec::with_capacity(n);
    nodes.push(a.clone());
    for k in 1..n - 1 {
        let t = k as f64 / (n - 1) as f64;
        nodes.push(a * (1.0 - t) + b * t);
    }
    nodes.push(b.clone());
    nodes
}

/// Re-places interior nodes uniformly by arc length along the current
/// polyline. Anchors are reinstated bit-exactly.
fn re_equidistribute(path: &mut PathState, f: &dyn Functional) -> Result<()> {
    let n = path.nodes.len();
    let total = path.polyline_length();
    if total <= 0.0 {
        return Ok(());
    }
    let mut cumulative = Vec::with_capacity(n);
    cumulative.push(0.0);
    for w in path.nodes.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (&w[1] - &w[0]).norm());
    }
    let anchor_a = path.nodes[0].clone();
    let anchor_b = path.nodes[n - 1].clone();
    let mut new_nodes = Vec::with_capacity(n);
    new_nodes.push(anchor_a);
    let mut seg = 0;
    for k in 1..n - 1 {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < n && cumulative[seg + 1] < s {
            seg += 1;
        }
        let span = (cumulative[seg + 1] - cumulative[seg]).max(f64::MIN_POSITIVE);
        let t = ((s - cumulative[seg]) / span).clamp(0.0, 1.0);
        new_nodes.push(&path.nodes[seg] * (1.0 - t) + &path.nodes[seg + 1] * t);
    }
    new_nodes.push(anchor_b);
    path.nodes = new_nodes;
    for i in 1..n - 1 {
        path.values[i] = f.value(&path.nodes[i])?;
    }
    Ok(())
}

/// Backtracking normalized-gradient descent on one node; returns true if a
/// strictly lower value was found.
fn descend_node(
    f: &dyn Functional,
    path: &mut PathState,
    i: usize,
    step0: f64,
    tries: usize,
) -> Result<bool> {
    let g = f.gradient(&path.nodes[i])?;
    let gn = g.norm();
    if gn == 0.0 {
        return Ok(false);
    }
    let dir = g / gn;
    let mut t = step0;
    for _ in 0..tries {
        let cand = &path.nodes[i] - &dir * t;
        let value = f.value(&cand)?;
        if value < path.values[i] {
            path.nodes[i] = cand;
            path.values[i] = value;
            return Ok(true);
        }
        t *= 0.5;
    }
    Ok(false)
}

/// Newton iteration on the gradient, with a finite-difference Hessian.
fn newton_polish(f: &dyn Functional, x0: &Vector, tol_grad: f64) -> Result<(Vector, f64)> {
    let dim = x0.len();
    let mut x = x0.clone();
    let mut g = f.gradient(&x)?;
    for _ in 0..80 {
        let gn = g.norm();
        if gn <= tol_grad {
            return Ok((x, gn));
        }
        let mut hess = Matrix::zeros(dim, dim);
        let mut xp = x.clone();
        for j in 0..dim {
            let t = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + t;
            let gp = f.gradient(&xp)?;
            xp[j] = x[j] - t;
            let gm = f.gradient(&xp)?;
            xp[j] = x[j];
            hess.set_column(j, &((gp - gm) / (2.0 * t)));
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        let step = solve_square(&sym, &g)
            .map_err(|_| Error::Stall("singular Hessian during polish".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &x - &step * t;
            let cand_g = f.gradient(&cand)?;
            if cand_g.norm() < gn {
                x = cand;
                g = cand_g;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Stall(format!(
                "gradient polish stalled at |grad| = {gn:.3e}"
            )));
        }
    }
    let gn = g.norm();
    if gn <= tol_grad {
        Ok((x, gn))
    } else {
        Err(Error::Stall(format!(
            "gradient polish did not reach tolerance: |grad| = {gn:.3e}"
        )))
    }
}

/// Saddle search between `anchor_a` and `anchor_b`; see the module docs.
pub fn mountain_pass(
    f: &dyn Functional,
    anchor_a: &Vector,
    anchor_b: &Vector,
    opts: &MountainPassOpts,
) -> Result<MountainPassReport> {
    if opts.nodes < 8 {
        return Err(Error::Config("mountain_pass needs at least 8 nodes".into()));
    }
    if anchor_a.len() != f.dim() || anchor_b.len() != f.dim() {
        return Err(Error::Dimension(
            "anchor dimension does not match the functional".into(),
        ));
    }
    let n = opts.nodes;
    let nodes = straight_path(anchor_a, anchor_b, n);
    let mut values = Vec::with_capacity(n);
    for node in &nodes {
        values.push(f.value(node)?);
    }
    let mut path = PathState { nodes, values };
    let anchor_max = path.values[0].max(path.values[n - 1]);

    if path.interior_max() <= anchor_max + opts.geom_tol {
        return Err(Error::Geometry(format!(
            "no barrier above the anchors: interior max {:.6e} vs anchor max {:.6e}",
            path.interior_max(),
            anchor_max
        )));
    }

    let mut history: Vec<f64> = Vec::new();
    let mut grad_history: Vec<f64> = Vec::new();
    for _ in 0..opts.max_iters {
        let i_max = path.max_index();
        let g = f.gradient(&path.nodes[i_max])?;
        if g.norm() <= opts.relax_tol {
            break;
        }
        let max_node_grad = g.norm();
        let mesh = path.polyline_length() / (n - 1) as f64;
        if !descend_node(f, &mut path, i_max, opts.step_frac * mesh, 30)? {
            break;
        }
        // Cap for this iteration: the path max right after the move. The
        // repair pass below keeps re-equidistribution from pushing any node
        // back above it, so the recorded maxima are monotone.
        let cap = path.interior_max();
        re_equidistribute(&mut path, f)?;
        let mut blocked = false;
        for i in 1..n - 1 {
            let mut guard = 0;
            while path.values[i] > cap && guard < 12 {
                let mesh_now = path.polyline_length() / (n - 1) as f64;
                if !descend_node(f, &mut path, i, opts.step_frac * mesh_now, 25)? {
                    blocked = true;
                    break;
                }
                guard += 1;
            }
            if path.values[i] > cap {
                blocked = true;
            }
            if blocked {
                break;
            }
        }
        history.push(path.interior_max());
        grad_history.push(max_node_grad);
        if blocked {
            break;
        }
        let window = 25;
        if history.len() >= window {
            let tail = &history[history.len() - window..];
            let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - tail.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread <= opts.stagnation_eps * (1.0 + history.last().unwrap().abs()) {
                break;
            }
        }
    }

    let barrier_estimate = path.interior_max();
    let i_max = path.max_index();
    let (critical_point, gradient_norm) = newton_polish(f, &path.nodes[i_max], opts.tol_grad)?;
    let critical_value = f.value(&critical_point)?;
    if critical_value < anchor_max - 1e-12 * (1.0 + anchor_max.abs()) {
        return Err(Error::Stall(
            "polish converged below the anchor level; no saddle located".into(),
        ));
    }

    Ok(MountainPassReport {
        critical_point: critical_point.as_slice().to_vec(),
        critical_value,
        gradient_norm,
        path_history_length: history.len(),
        path_max_history: history,
        path_grad_history: grad_history,
        barrier_estimate,
        final_path: path.nodes.iter().map(|v| v.as_slice().to_vec()).collect(),
        final_values: path.values.clone(),
    })
}

/// Options for [`deform`].
#[derive(Debug, Clone, Copy)]
pub struct DeformOpts {
    /// Gradient norm below which a point counts as critical (and is frozen).
    pub tol_grad: f64,
    /// Base step length, scaled by `1 + |x|`.
    pub step_scale: f64,
}

impl Default for DeformOpts {
    fn default() -> Self {
        DeformOpts {
            tol_grad: 1e-10,
            step_scale: 0.05,
        }
    }
}

/// Discrete realization of a value-decreasing deformation.
#[derive(Debug, Clone)]
pub struct DeformationTrace {
    /// `t_k = k / steps` for `k = 0..=steps`.
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
    /// The start was in the frozen set or critical; the trajectory is
    /// constant.
    pub frozen: bool,
    /// First step at which no strictly decreasing move existed (the
    /// trajectory is constant from there on).
    pub stalled_at: Option<usize>,
}

/// Discrete deformation flow with the four defining properties:
/// identity at `t = 0`; frozen starts (in `A` or critical) never move;
/// values never increase; values strictly decrease off `A` at non-critical
/// starts.
pub fn deform(
    f: &dyn Functional,
    frozen_set: &dyn Fn(&Vector) -> bool,
    x: &Vector,
    steps: usize,
    opts: &DeformOpts,
) -> Result<DeformationTrace> {
    if steps == 0 {
        return Err(Error::Config("deform needs at least one step".into()));
    }
    if x.len() != f.dim() {
        return Err(Error::Dimension(
            "deform start dimension does not match the functional".into(),
        ));
    }
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let v0 = f.value(x)?;
    let g0 = f.gradient(x)?;
    let frozen = frozen_set(x) || g0.norm() <= opts.tol_grad;
    if frozen {
        return Ok(DeformationTrace {
            times,
            points: vec![x.clone(); steps + 1],
            values: vec![v0; steps + 1],
            frozen: true,
            stalled_at: None,
        });
    }

    let mut points = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    points.push(x.clone());
    values.push(v0);
    let mut current = x.clone();
    let mut value = v0;
    let mut stalled_at = None;

    for k in 1..=steps {
        if stalled_at.is_none() {
            let g = f.gradient(&current)?;
            let gn = g.norm();
            if gn <= opts.tol_grad {
                stalled_at = Some(k);
            } else {
                let dir = g / gn;
                let mut t = opts.step_scale * (1.0 + current.norm());
                let mut moved = false;
                for _ in 0..45 {
                    let cand = &current - &dir * t;
                    let cand_value = f.value(&cand)?;
                    if cand_value < value {
                        current = cand;
                        value = cand_value;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    stalled_at = Some(k);
                }
            }
        }
        points.push(current.clone());
        values.push(value);
    }

    Ok(DeformationTrace {
        times,
        points,
        values,
        frozen: false,
        stalled_at,
    })
}

/// Builds `psi(x) = 1/2 |F(x + x1) - F(x2)|^2`, the functional whose
/// critical points decide whether a collision `F(x1) = F(x2)` is compatible
/// with the structural hypotheses.
pub fn make_injectivity_functional(
    op: &OperatorSpec,
    x1: &Vector,
    x2: &Vector,
) -> Result<LeastSquaresFunctional> {
    let target = op.eval(x2)?;
    LeastSquaresFunctional::new(op.shifted(x1)?, target)
}

/// Which lower-bound branch applies at the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BarrierBranch {
    /// `|F'(x1)h| >= alpha |h|`: ring bound `alpha^2 rho^2 / 8`.
    Regular,
    /// `|F'''(x1)h^3| >= alpha |h|^3`: ring bound `alpha^2 rho^6 / 8`.
    Degenerate,
}

/// Theoretical ring lower bound for the barrier, `1/8 alpha^2 rho^k` with
/// `k = 2` on the regular branch and `k = 6` on the degenerate one.
///
/// The two branches deliberately carry different radius exponents: the
/// sixth power comes from the cubic-order growth bound, while the level
/// estimate itself is quoted with the square. Both are exposed rather than
/// reconciled.
pub fn barrier_bound(alpha: f64, rho: f64, branch: BarrierBranch) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!(
            "rho must be positive, got {rho}"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let r = match branch {
        BarrierBranch::Regular => rho * rho,
        BarrierBranch::Degenerate => rho.powi(6),
    };
    Ok(0.125 * alpha * alpha * r)
}

/// Samples unit directions at `x1` and returns the observed lower-bound
/// constant for the selected branch: `min |F'(x1)h|` or `min |F'''(x1)h^3|`.
pub fn estimate_alpha(
    op: &OperatorSpec,
    x1: &Vector,
    branch: BarrierBranch,
    n_random: usize,
    seed: u64,
) -> Result<f64> {
    let jac = match branch {
        BarrierBranch::Regular => Some(op.jacobian(x1)?),
        BarrierBranch::Degenerate => None,
    };
    let mut alpha = f64::INFINITY;
    for h in unit_directions(op.dim_in(), n_random, seed) {
        let norm = match &jac {
            Some(j) => (j * &h).norm(),
            None => op.d3_dir(x1, &h)?.norm(),
        };
        alpha = alpha.min(norm);
    }
    Ok(alpha)
}

/// What the auditor concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuditOutcome {
    /// `F(x1)` and `F(x2)` differ; there is nothing to audit.
    NotACollision,
    /// A genuine collision, and the located critical point of `psi` itself
    /// violates the structural hypotheses; no contradiction.
    CollisionConsistent,
    /// A genuine collision together with a positive-level critical point of
    /// `psi` that satisfies the hypotheses: the configuration the
    /// uniqueness argument rules out.
    HypothesisContradiction,
}

/// Options for [`injectivity_audit`].
#[derive(Debug, Clone, Copy)]
pub struct AuditOpts {
    pub mp: MountainPassOpts,
    pub classify: ClassifyOpts,
    /// Residual gap above which the pair is not a collision.
    pub collision_tol: f64,
    /// `psi` level above which a critical point counts as positive.
    pub value_tol: f64,
}

impl Default for AuditOpts {
    fn default() -> Self {
        AuditOpts {
            mp: MountainPassOpts::default(),
            classify: ClassifyOpts::default(),
            collision_tol: 1e-9,
            value_tol: 1e-9,
        }
    }
}

/// Audit result; saddle data is present for collision inputs.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub outcome: AuditOutcome,
    /// `|F(x1) - F(x2)|`.
    pub gap: f64,
    /// Critical point in the operator's own coordinates (`x* + x1`).
    pub critical_point: Option<Vec<f64>>,
    pub critical_value: Option<f64>,
    pub gradient_norm: Option<f64>,
    pub class: Option<CriticalPointClass>,
}

/// Checks whether a claimed collision `F(x1) = F(x2)` is consistent with
/// the structural hypotheses: builds `psi`, locates its mountain-pass
/// critical point between `0` and `x2 - x1`, and classifies the underlying
/// operator there. Identical inputs are rejected.
pub fn injectivity_audit(
    op: &OperatorSpec,
    x1: &Vector,
    x2: &Vector,
    opts: &AuditOpts,
) -> Result<AuditReport> {
    if x1.len() != op.dim_in() || x2.len() != op.dim_in() {
        return Err(Error::Dimension(
            "audit points do not match the operator dimension".into(),
        ));
    }
    if (x1 - x2).norm() == 0.0 {
        return Err(Error::DegenerateInput(
            "x1 and x2 are identical; nothing to audit".into(),
        ));
    }
    let gap = (op.eval(x1)? - op.eval(x2)?).norm();
    if gap > opts.collision_tol {
        return Ok(AuditReport {
            outcome: AuditOutcome::NotACollision,
            gap,
            critical_point: None,
            critical_value: None,
            gradient_norm: None,
            class: None,
        });
    }

    let psi = make_injectivity_functional(op, x1, x2)?;
    let origin = Vector::zeros(op.dim_in());
    let e = x2 - x1;
    let mp = mountain_pass(&psi, &origin, &e, &opts.mp)?;
    let x_abs = Vector::from_vec(mp.critical_point.clone()) + x1;
    let class = classify_critical(op, &x_abs, &opts.classify)?;
    let positive_level = mp.critical_value > opts.value_tol;
    let outcome = if positive_level && class.tag != CriticalKind::HypothesisViolated {
        AuditOutcome::HypothesisContradiction
    } else {
        AuditOutcome::CollisionConsistent
    };
    Ok(AuditReport {
        outcome,
        gap,
        critical_point: Some(x_abs.as_slice().to_vec()),
        critical_value: Some(mp.critical_value),
        gradient_norm: Some(mp.gradient_norm),
        class: Some(class),
    })
}

/// `f(x) = (x^2 - 1)^2`: the scalar two-well benchmark with saddle at the
/// origin of value 1.
pub struct TwoWell1d;

impl Functional for TwoWell1d {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let s = x[0] * x[0] - 1.0;
        Ok(s * s)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![4.0 * x[0] * (x[0] * x[0] - 1.0)]))
    }
}

/// `f(x) = (x1^2 - 1)^2 + x2^2`: planar two-well, saddle at the origin of
/// value 1.
pub struct TwoWell2d;

impl Functional for TwoWell2d {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let s = x[0] * x[0] - 1.0;
        Ok(s * s + x[1] * x[1])
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![
            4.0 * x[0] * (x[0] * x[0] - 1.0),
            2.0 * x[1],
        ]))
    }
}

/// Benchmark functionals by name, for the command-line surface.
pub fn benchmark_functional(name: &str) -> Result<Box<dyn Functional>> {
    match name {
        "two-well" => Ok(Box::new(TwoWell1d)),
        "two-well-2d" => Ok(Box::new(TwoWell2d)),
        other => Err(Error::Config(format!(
            "unknown benchmark functional '{other}'; known: two-well, two-well-2d"
        ))),
    }
}
