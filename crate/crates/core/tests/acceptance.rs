//! Acceptance suite. Each test prints one PASS line; run with
//! `cargo test -p varinv --test acceptance -- --nocapture` to see them.
//!
//! Expected values come from independent oracles computed inside this file
//! (bisection, multistart Newton with hand-written Jacobians, closed forms,
//! analytic integrals), never from the library code under test.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varinv::coercivity::{ray_growth, GrowthOpts};
use varinv::functional::{Functional, LeastSquaresFunctional};
use varinv::hammerstein::{
    apply_a, assemble_operator, fixed_point_residual, KernelSpec, PerturbationSpec,
    QuadratureGrid, QuadratureRule,
};
use varinv::inverter::{cubic_step, invert, InvertOpts, SolveStatus};
use varinv::linalg::Vector;
use varinv::mountain_pass::{
    deform, injectivity_audit, mountain_pass, AuditOpts, AuditOutcome, DeformOpts,
    MountainPassOpts, TwoWell1d, TwoWell2d,
};
use varinv::operator::{
    arctan_bounded, builtin, builtin_names, cube_minus_x, planar, pure_cubic, quintic1d,
    OperatorSpec,
};

fn v(entries: &[f64]) -> Vector {
    Vector::from_vec(entries.to_vec())
}

fn pass(criterion: &str, detail: String, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_s,
        "{criterion} exceeded its runtime budget: {elapsed:.2}s >= {budget_s}s"
    );
    println!("[ACCEPTANCE] {criterion}: PASS ({detail}; {elapsed:.2}s)");
}

/// Bisection oracle for strictly increasing scalar maps.
fn bisect(f: impl Fn(f64) -> f64, y: f64) -> f64 {
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
fn c1_degenerate_cubic_closed_form() {
    let started = Instant::now();
    // F(x) = x^3 has F'(0) = F''(0) = 0 and F'''(0)h^3 = 6h^3; the
    // corrector from the origin must return cbrt(y/6) exactly.
    let op = pure_cubic();
    for y in [6.0, -6.0, 48.0, -48.0, 0.75] {
        let x = cubic_step(&op, &v(&[y]), &v(&[0.0])).unwrap();
        let expect = (y / 6.0).cbrt();
        assert!(
            (x[0] - expect).abs() <= 1e-14,
            "y = {y}: got {} expected {expect}",
            x[0]
        );
    }
    pass("C1 degenerate-cubic-closed-form", "5 targets".into(), started, 1.0);
}

#[test]
fn c2_scalar_reproduction() {
    let started = Instant::now();
    let op = quintic1d();
    let opts = InvertOpts {
        tol_res: 1e-12,
        ..InvertOpts::default()
    };
    let mut max_residual: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for k in 0..41 {
        let y = -10.0 + 0.5 * k as f64;
        let report = invert(&op, &v(&[y]), &v(&[0.0]), &opts).unwrap();
        assert_eq!(report.status, SolveStatus::Converged, "y = {y}");
        assert!(report.residual_norm <= 1e-10, "residual at y = {y}");
        let oracle = bisect(|x| x.powi(3) + x.powi(5), y);
        let gap = (report.solution[0] - oracle).abs();
        assert!(gap <= 1e-8, "y = {y}: |sol - oracle| = {gap:.3e}");
        max_residual = max_residual.max(report.residual_norm);
        max_gap = max_gap.max(gap);
    }
    pass(
        "C2 scalar-reproduction",
        format!("41 targets, max residual {max_residual:.2e}, max oracle gap {max_gap:.2e}"),
        started,
        5.0,
    );
}

/// Independent planar oracle: damped Newton with the hand-written Jacobian,
/// from a grid of starts. Returns all distinct solutions found.
fn planar_oracle(y: [f64; 2]) -> Vec<[f64; 2]> {
    let f = |x: [f64; 2]| {
        [
            x[0].powi(3) + x[0].powi(5) - x[1].powi(5) - y[0],
            x[1].powi(3) + x[1].powi(5) + x[0].powi(5) - y[1],
        ]
    };
    let jac = |x: [f64; 2]| {
        [
            [3.0 * x[0].powi(2) + 5.0 * x[0].powi(4), -5.0 * x[1].powi(4)],
            [5.0 * x[0].powi(4), 3.0 * x[1].powi(2) + 5.0 * x[1].powi(4)],
        ]
    };
    let norm2 = |r: [f64; 2]| r[0] * r[0] + r[1] * r[1];
    let mut solutions: Vec<[f64; 2]> = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let mut x = [-1.8 + 0.6 * i as f64 + 0.05, -1.8 + 0.6 * j as f64 - 0.03];
            // Iterate while the damped steps keep shrinking the residual;
            // around the degenerate origin the basin flattens cubically and
            // Newton contracts only linearly, so give it room.
            for _ in 0..600 {
                let r = f(x);
                let m = jac(x);
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.abs() < 1e-280 || norm2(r) == 0.0 {
                    break;
                }
                let step = [
                    (m[1][1] * r[0] - m[0][1] * r[1]) / det,
                    (m[0][0] * r[1] - m[1][0] * r[0]) / det,
                ];
                let mut t = 1.0;
                let base = norm2(r);
                let mut moved = false;
                for _ in 0..40 {
                    let cand = [x[0] - t * step[0], x[1] - t * step[1]];
                    if norm2(f(cand)) < base {
                        x = cand;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let converged = norm2(f(x)) <= 1e-26;
            if converged
                && !solutions
                    .iter()
                    .any(|s| (s[0] - x[0]).abs() + (s[1] - x[1]).abs() < 1e-5)
            {
                solutions.push(x);
            }
        }
    }
    solutions
}

#[test]
fn c3_planar_reproduction() {
    let started = Instant::now();
    let op = planar();
    let opts = InvertOpts {
        tol_res: 1e-10,
        ..InvertOpts::default()
    };
    let grid = [-3.0, -1.5, 0.0, 1.5, 3.0];
    let mut max_gap: f64 = 0.0;
    for &y1 in &grid {
        for &y2 in &grid {
            let report = invert(&op, &v(&[y1, y2]), &v(&[0.0, 0.0]), &opts).unwrap();
            assert_eq!(report.status, SolveStatus::Converged, "y = ({y1}, {y2})");
            assert!(report.residual_norm <= 1e-8);
            let oracle = planar_oracle([y1, y2]);
            assert!(!oracle.is_empty(), "oracle found nothing at ({y1}, {y2})");
            assert_eq!(oracle.len(), 1, "oracle found multiple preimages at ({y1}, {y2})");
            let gap = (report.solution[0] - oracle[0][0])
                .abs()
                .max((report.solution[1] - oracle[0][1]).abs());
            assert!(gap <= 1e-6, "({y1}, {y2}): gap {gap:.3e}");
            max_gap = max_gap.max(gap);
        }
    }
    // Third derivative at the origin on random directions.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let h = v(&[4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0]);
        let d3 = op.d3_dir(&v(&[0.0, 0.0]), &h).unwrap();
        assert!((d3[0] - 6.0 * h[0].powi(3)).abs() <= 1e-12);
        assert!((d3[1] - 6.0 * h[1].powi(3)).abs() <= 1e-12);
    }
    pass(
        "C3 planar-reproduction",
        format!("25 targets, max oracle gap {max_gap:.2e}; 100 third-derivative checks"),
        started,
        10.0,
    );
}

#[test]
fn c4_coercivity_exponent() {
    let started = Instant::now();
    let report = ray_growth(&planar(), &v(&[1.0, -2.0]), &GrowthOpts::default()).unwrap();
    assert!(
        (report.min_exponent - 10.0).abs() <= 0.5,
        "min exponent {}",
        report.min_exponent
    );
    assert!(report.coercive_flag);
    pass(
        "C4 coercivity-exponent",
        format!("min fitted exponent {:.3}", report.min_exponent),
        started,
        5.0,
    );
}

#[test]
fn c5_mountain_pass_correctness() {
    let started = Instant::now();
    let mp = MountainPassOpts::default();

    let r1 = mountain_pass(&TwoWell1d, &v(&[-1.0]), &v(&[1.0]), &mp).unwrap();
    assert!(r1.critical_point[0].abs() <= 1e-6);
    assert!((r1.critical_value - 1.0).abs() <= 1e-8);

    let r2 = mountain_pass(&TwoWell2d, &v(&[-1.0, 0.0]), &v(&[1.0, 0.0]), &mp).unwrap();
    assert!(r2.critical_point[0].abs() <= 1e-6 && r2.critical_point[1].abs() <= 1e-6);
    assert!((r2.critical_value - 1.0).abs() <= 1e-8);

    // Independent scalar oracle for the collision functional of
    // G(x) = x^3 - x: the interior critical point solves 3x^2 - 1 = 0.
    // Bisection on [0, 1], where that factor is increasing.
    let saddle = {
        let f = |x: f64| 3.0 * x * x - 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let psi_value = 0.5 * (saddle.powi(3) - saddle).powi(2);
    assert!((psi_value - 2.0 / 27.0).abs() <= 1e-12);

    let audit = injectivity_audit(&cube_minus_x(), &v(&[0.0]), &v(&[1.0]), &AuditOpts::default())
        .unwrap();
    assert_eq!(audit.outcome, AuditOutcome::CollisionConsistent);
    let located = audit.critical_value.unwrap();
    assert!(
        (located - psi_value).abs() <= 1e-6,
        "located {located} vs oracle {psi_value}"
    );
    pass(
        "C5 mountain-pass-correctness",
        format!("two wells + audit value {located:.9}"),
        started,
        10.0,
    );
}

#[test]
fn c6_deformation_suite() {
    let started = Instant::now();
    let quintic_f = LeastSquaresFunctional::new(quintic1d(), v(&[2.0])).unwrap();
    let quintic_zero = LeastSquaresFunctional::new(quintic1d(), v(&[0.0])).unwrap();
    let planar_f = LeastSquaresFunctional::new(planar(), v(&[1.0, 1.0])).unwrap();
    let arctan_f = LeastSquaresFunctional::new(arctan_bounded(), v(&[0.5])).unwrap();
    let pool: Vec<&dyn Functional> = vec![
        &TwoWell1d,
        &TwoWell2d,
        &quintic_f,
        &quintic_zero,
        &planar_f,
        &arctan_f,
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut frozen_seen = 0;
    while checked < 50 {
        let f = pool[checked % pool.len()];
        let dim = f.dim();
        let x = Vector::from_fn(dim, |_, _| 3.0 * rng.random::<f64>() - 1.5);
        let steps = 8 + (checked % 3) * 6;
        // Rotate through frozen-set shapes: empty, a ball around the start
        // (freezing it), a far-away ball (not freezing it).
        let center = x.clone();
        let frozen: Box<dyn Fn(&Vector) -> bool> = match checked % 3 {
            0 => Box::new(|_: &Vector| false),
            1 => Box::new(move |p: &Vector| (p - &center).norm() <= 0.4),
            _ => Box::new(move |p: &Vector| (p - &center).norm() >= 1e6),
        };
        let g0 = f.gradient(&x).unwrap().norm();
        let trace = deform(f, &*frozen, &x, steps, &DeformOpts::default()).unwrap();

        // Identity at t = 0, exactly.
        assert_eq!(trace.points[0].as_slice(), x.as_slice());
        assert_eq!(trace.times[0], 0.0);
        assert_eq!(trace.points.len(), steps + 1);

        // Frozen starts never move.
        if trace.frozen {
            frozen_seen += 1;
            for p in &trace.points {
                assert_eq!(p.as_slice(), x.as_slice());
            }
        }

        // Values never increase.
        for w in trace.values.windows(2) {
            assert!(w[1] <= w[0], "value increased along the trace");
        }

        // Strict decrease off the frozen set at non-critical starts:
        // every recorded time beats the starting value, and consecutive
        // values drop strictly until the flow reaches a critical point.
        if !trace.frozen && g0 > 1e-10 {
            for val in &trace.values[1..] {
                assert!(*val < trace.values[0], "no strict decrease vs start");
            }
            let live = trace.stalled_at.unwrap_or(trace.values.len());
            for k in 1..live.min(trace.values.len()) {
                assert!(trace.values[k] < trace.values[k - 1], "no strict step decrease");
            }
        }
        checked += 1;
    }
    assert!(frozen_seen >= 10, "suite never exercised frozen starts");
    pass(
        "C6 deformation-suite",
        format!("50 traces, {frozen_seen} frozen, zero violations"),
        started,
        10.0,
    );
}

#[test]
fn c7_derivative_consistency() {
    let started = Instant::now();
    // Independent low-order central differences of t -> F(x + t h).
    let dir1 = |op: &OperatorSpec, x: &Vector, h: &Vector| {
        let t = 1e-6;
        (op.eval(&(x + h * t)).unwrap() - op.eval(&(x - h * t)).unwrap()) / (2.0 * t)
    };
    let dir2 = |op: &OperatorSpec, x: &Vector, h: &Vector| {
        let t = 1e-4;
        (op.eval(&(x + h * t)).unwrap() - op.eval(x).unwrap() * 2.0 + op.eval(&(x - h * t)).unwrap())
            / (t * t)
    };
    let dir3 = |op: &OperatorSpec, x: &Vector, h: &Vector| {
        let t = 1e-3;
        (op.eval(&(x + h * (2.0 * t))).unwrap() - op.eval(&(x + h * t)).unwrap() * 2.0
            + op.eval(&(x - h * t)).unwrap() * 2.0
            - op.eval(&(x - h * (2.0 * t))).unwrap())
            / (2.0 * t * t * t)
    };
    let close = |a: &Vector, b: &Vector, tol: f64| {
        a.iter()
            .zip(b.iter())
            .all(|(p, q)| (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0))
    };

    let grid = QuadratureGrid::new(QuadratureRule::Trapezoid, 16).unwrap();
    let hammerstein = assemble_operator(
        &KernelSpec::one_plus_ts(),
        &PerturbationSpec::quartic(0.01),
        &grid,
    )
    .unwrap();
    let mut problems: Vec<OperatorSpec> = builtin_names()
        .iter()
        .map(|name| builtin(name).unwrap())
        .collect();
    problems.push(hammerstein);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut total = 0;
    for op in &problems {
        let dim = op.dim_in();
        for _ in 0..100 {
            let x = Vector::from_fn(dim, |_, _| 3.0 * rng.random::<f64>() - 1.5);
            let mut h = Vector::from_fn(dim, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            if h.norm() < 1e-3 {
                h[0] = 1.0;
            }
            let jh = op.jacobian(&x).unwrap() * &h;
            assert!(close(&jh, &dir1(op, &x, &h), 1e-5), "{}: order 1", op.name());
            assert!(
                close(&op.d2_dir(&x, &h).unwrap(), &dir2(op, &x, &h), 1e-4),
                "{}: order 2",
                op.name()
            );
            assert!(
                close(&op.d3_dir(&x, &h).unwrap(), &dir3(op, &x, &h), 1e-3),
                "{}: order 3",
                op.name()
            );
            total += 1;
        }
    }
    pass(
        "C7 derivative-consistency",
        format!("{total} samples across {} problems", problems.len()),
        started,
        30.0,
    );
}

#[test]
fn c8_hammerstein_reproduction() {
    let started = Instant::now();
    let opts = InvertOpts {
        tol_res: 1e-11,
        assert_surjective: true,
        ..InvertOpts::default()
    };
    let grid64 = QuadratureGrid::new(QuadratureRule::Trapezoid, 64).unwrap();
    let pert = PerturbationSpec::zero();
    let mut worst: f64 = 0.0;
    for kernel in [KernelSpec::constant(1.0), KernelSpec::one_plus_ts()] {
        let op = assemble_operator(&kernel, &pert, &grid64).unwrap();

        // Degeneracy at the origin.
        let zero = Vector::zeros(64);
        assert!(op.jacobian(&zero).unwrap().amax() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let h = Vector::from_fn(64, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            assert!(op.d2_dir(&zero, &h).unwrap().amax() <= 1e-12);
        }

        for x_star in [
            Vector::repeat(64, 1.0),
            Vector::from_fn(64, |i, _| 1.0 + grid64.nodes[i]),
        ] {
            let y = op.eval(&x_star).unwrap();
            let report = invert(&op, &y, &Vector::zeros(64), &opts).unwrap();
            assert_eq!(report.status, SolveStatus::Converged, "{}", kernel.name);
            let err = grid64.norm(&(report.solution_vector() - &x_star));
            assert!(err <= 1e-6, "{}: grid-norm error {err:.3e}", kernel.name);
            worst = worst.max(err);
            let fx = op.eval(&report.solution_vector()).unwrap();
            let fp = fixed_point_residual(&kernel, &pert, &grid64, &report.solution_vector(), &fx)
                .unwrap();
            assert!(fp <= 1e-12, "fixed-point residual {fp:.3e}");
        }
    }

    // Trapezoid error between n = 16 and n = 32 behaves like n^-2 within a
    // factor of 1.5 (analytic value of the K = 1 + ts, z = s integral is
    // 1/2 + t/3).
    let k = KernelSpec::one_plus_ts();
    let err = |n: usize| -> f64 {
        let g = QuadratureGrid::new(QuadratureRule::Trapezoid, n).unwrap();
        let z = Vector::from_vec(g.nodes.clone());
        let az = apply_a(&k, &g, &z).unwrap();
        az.iter()
            .enumerate()
            .map(|(i, val)| (val - (0.5 + g.nodes[i] / 3.0)).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(16) / err(32);
    let expected = ((32 - 1) as f64 / (16 - 1) as f64).powi(2);
    assert!(
        ratio >= expected / 1.5 && ratio <= expected * 1.5,
        "quadrature error ratio {ratio} vs expected {expected}"
    );
    pass(
        "C8 hammerstein-reproduction",
        format!("worst grid-norm error {worst:.2e}, quadrature ratio {ratio:.2}"),
        started,
        60.0,
    );
}
