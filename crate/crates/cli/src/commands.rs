//! Command implementations and report writing.
//!
//! Every command writes a self-describing `report.json` (the resolved
//! configuration plus the result) into the output directory; `invert` and
//! `mpass` additionally write a flat `trace.csv` with the header
//! `iter,phi,grad_norm`, and `invert` writes the solution vector one scalar
//! per line. Outputs are byte-deterministic for a fixed configuration.

use std::fs;
use std::path::Path;

use serde::Serialize;

use varinv::coercivity::{ps_probe, ray_growth, GrowthOpts, GrowthReport, PsProbeOpts, PsProbeReport};
use varinv::error::{Error, Result};
use varinv::functional::LeastSquaresFunctional;
use varinv::hammerstein::{assemble_operator, KernelSpec, PerturbationSpec, QuadratureGrid, QuadratureRule};
use varinv::inverter::{certify, invert, InvertOpts, SolveReport, SolveStatus};
use varinv::linalg::Vector;
use varinv::mountain_pass::{
    benchmark_functional, injectivity_audit, mountain_pass, AuditOpts, AuditOutcome, AuditReport,
    MountainPassOpts, MountainPassReport,
};
use varinv::Functional;

use crate::config::{build_problem, resolve_target, ProblemConfig};

/// Exit codes shared by the commands.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const STALLED: i32 = 2;
    pub const HYPOTHESIS_VIOLATED: i32 = 3;
    pub const HYPOTHESIS_CONTRADICTION: i32 = 4;
    pub const PROBE_FAILED: i32 = 5;
    pub const NO_GEOMETRY: i32 = 6;
}

/// Maps an error to its exit code (configuration and input problems are
/// usage errors; a missing barrier has its own code).
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Geometry(_) => exit_code::NO_GEOMETRY,
        _ => exit_code::USAGE,
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a ProblemConfig,
    result: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn trace_csv(rows: impl Iterator<Item = (usize, f64, f64)>) -> String {
    let mut out = String::from("iter,phi,grad_norm\n");
    for (iter, phi, grad) in rows {
        out.push_str(&format!("{iter},{phi:e},{grad:e}\n"));
    }
    out
}

#[derive(Serialize)]
struct InvertResult {
    #[serde(flatten)]
    report: SolveReport,
    certified: bool,
}

/// Runs the inversion command; returns the exit code.
pub fn cmd_invert(cfg: &ProblemConfig, out: &Path, quiet: bool) -> Result<i32> {
    let built = build_problem(cfg)?;
    let y = resolve_target(cfg, built.op.dim_out())?;
    let opts: InvertOpts = cfg.solver.invert_opts(built.assert_surjective);
    let x0 = Vector::zeros(built.op.dim_in());
    let report = invert(&built.op, &y, &x0, &opts)?;
    let certified = certify(&built.op, &y, &report, &opts);

    let resolved = cfg.resolved();
    let csv = trace_csv(report.trace.iter().map(|t| (t.iter, t.phi, t.grad_norm)));
    write_text(out, "trace.csv", &csv)?;
    let solution = report
        .solution
        .iter()
        .map(|v| format!("{v:e}\n"))
        .collect::<String>();
    write_text(out, "solution.txt", &solution)?;
    let status = report.status;
    let residual = report.residual_norm;
    write_json(
        out,
        "report.json",
        &Report {
            command: "invert",
            config: &resolved,
            result: InvertResult { report, certified },
        },
    )?;
    if !quiet {
        println!(
            "invert: {status:?}, residual {residual:.3e}, certified {certified}, reports in {}",
            out.display()
        );
    }
    Ok(match status {
        SolveStatus::Converged => exit_code::OK,
        SolveStatus::Stalled => exit_code::STALLED,
        SolveStatus::HypothesisViolated => exit_code::HYPOTHESIS_VIOLATED,
    })
}

#[derive(Serialize)]
struct AuditResult {
    #[serde(flatten)]
    report: AuditReport,
}

/// Runs the injectivity audit; returns the exit code.
pub fn cmd_audit(cfg: &ProblemConfig, x1: &Vector, x2: &Vector, out: &Path, quiet: bool) -> Result<i32> {
    let built = build_problem(cfg)?;
    let mut opts = AuditOpts::default();
    opts.classify.seed = cfg.solver.seed;
    opts.classify.tol_bij = cfg.solver.tol_bij;
    opts.classify.tol_zero = cfg.solver.tol_zero;
    opts.classify.assert_surjective = built.assert_surjective;
    opts.collision_tol = cfg.solver.tol_res;
    opts.mp.seed = cfg.solver.seed;
    let report = injectivity_audit(&built.op, x1, x2, &opts)?;
    let resolved = cfg.resolved();
    let outcome = report.outcome;
    write_json(
        out,
        "report.json",
        &Report {
            command: "audit",
            config: &resolved,
            result: AuditResult { report },
        },
    )?;
    if !quiet {
        println!("audit: {outcome:?}, report in {}", out.display());
    }
    Ok(match outcome {
        AuditOutcome::HypothesisContradiction => exit_code::HYPOTHESIS_CONTRADICTION,
        _ => exit_code::OK,
    })
}

#[derive(Serialize)]
struct ProbeResult {
    growth: GrowthReport,
    ps: PsProbeReport,
    passed: bool,
}

/// Runs the coercivity and escape probes; returns the exit code.
pub fn cmd_probe(cfg: &ProblemConfig, out: &Path, quiet: bool) -> Result<i32> {
    let built = build_problem(cfg)?;
    let y = resolve_target(cfg, built.op.dim_out())?;
    let growth_opts = GrowthOpts {
        seed: cfg.solver.seed,
        ..GrowthOpts::default()
    };
    let growth = ray_growth(&built.op, &y, &growth_opts)?;
    let functional = LeastSquaresFunctional::new(built.op.clone(), y)?;
    let ps_opts = PsProbeOpts {
        seed: cfg.solver.seed,
        grad_tol: 1e-6,
        ..PsProbeOpts::default()
    };
    let ps = ps_probe(&functional, &ps_opts)?;
    let passed = growth.coercive_flag && !ps.violation_found;

    write_json(out, "growth.json", &growth)?;
    write_json(out, "ps_probe.json", &ps)?;
    let resolved = cfg.resolved();
    write_json(
        out,
        "report.json",
        &Report {
            command: "probe",
            config: &resolved,
            result: ProbeResult { growth, ps, passed },
        },
    )?;
    if !quiet {
        println!("probe: passed = {passed}, reports in {}", out.display());
    }
    Ok(if passed { exit_code::OK } else { exit_code::PROBE_FAILED })
}

#[derive(Serialize)]
struct MpassResult {
    #[serde(flatten)]
    report: MountainPassReport,
}

/// Runs the saddle search between two anchors; returns the exit code.
pub fn cmd_mpass(
    cfg: &ProblemConfig,
    anchor_a: &Vector,
    anchor_b: &Vector,
    out: &Path,
    quiet: bool,
) -> Result<i32> {
    // The configured problem is either a benchmark functional by name or
    // an operator, in which case the saddle search runs on the residual
    // functional for the configured target.
    let functional: Box<dyn Functional> = match benchmark_functional(&cfg.problem) {
        Ok(f) => f,
        Err(_) => {
            let built = build_problem(cfg)?;
            let y = resolve_target(cfg, built.op.dim_out())?;
            Box::new(LeastSquaresFunctional::new(built.op, y)?)
        }
    };
    let opts = MountainPassOpts {
        seed: cfg.solver.seed,
        tol_grad: cfg.solver.tol_grad,
        ..MountainPassOpts::default()
    };
    let report = mountain_pass(functional.as_ref(), anchor_a, anchor_b, &opts)?;

    let csv = trace_csv(
        report
            .path_max_history
            .iter()
            .zip(report.path_grad_history.iter())
            .enumerate()
            .map(|(i, (phi, grad))| (i + 1, *phi, *grad)),
    );
    write_text(out, "trace.csv", &csv)?;
    let mut path_csv = String::from("node,value,coords\n");
    for (i, (node, value)) in report
        .final_path
        .iter()
        .zip(report.final_values.iter())
        .enumerate()
    {
        let coords = node
            .iter()
            .map(|c| format!("{c:e}"))
            .collect::<Vec<_>>()
            .join(";");
        path_csv.push_str(&format!("{i},{value:e},{coords}\n"));
    }
    write_text(out, "path.csv", &path_csv)?;

    let resolved = cfg.resolved();
    let value = report.critical_value;
    write_json(
        out,
        "report.json",
        &Report {
            command: "mpass",
            config: &resolved,
            result: MpassResult { report },
        },
    )?;
    if !quiet {
        println!("mpass: critical value {value:.9}, reports in {}", out.display());
    }
    Ok(exit_code::OK)
}

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

/// End-to-end reproduction runs with printed summary tables.
pub fn cmd_demo(name: &str) -> Result<i32> {
    match name {
        "section2-scalar" => {
            let op = varinv::operator::quintic1d();
            let opts = InvertOpts {
                tol_res: 1e-12,
                ..InvertOpts::default()
            };
            let mut max_residual: f64 = 0.0;
            let mut max_gap: f64 = 0.0;
            println!("inverting x^3 + x^5 = y over 41 targets in [-10, 10]");
            println!("{:>8} {:>14} {:>14} {:>12}", "y", "solution", "residual", "vs-bisect");
            for k in 0..41 {
                let y = -10.0 + 0.5 * k as f64;
                let report = invert(&op, &Vector::from_vec(vec![y]), &Vector::zeros(1), &opts)?;
                let oracle = bisect(|x| x.powi(3) + x.powi(5), y);
                let gap = (report.solution[0] - oracle).abs();
                max_residual = max_residual.max(report.residual_norm);
                max_gap = max_gap.max(gap);
                if k % 8 == 0 {
                    println!(
                        "{:>8.2} {:>14.8} {:>14.3e} {:>12.3e}",
                        y, report.solution[0], report.residual_norm, gap
                    );
                }
            }
            println!("max residual {max_residual:.3e}, max deviation from bisection {max_gap:.3e}");
            Ok(exit_code::OK)
        }
        "section2-planar" => {
            let op = varinv::operator::planar();
            let opts = InvertOpts {
                tol_res: 1e-10,
                ..InvertOpts::default()
            };
            let grid = [-3.0, -1.5, 0.0, 1.5, 3.0];
            let mut max_residual: f64 = 0.0;
            let mut converged = 0;
            println!("inverting the planar quintic map over a 5x5 target grid in [-3, 3]^2");
            for &y1 in &grid {
                for &y2 in &grid {
                    let report = invert(
                        &op,
                        &Vector::from_vec(vec![y1, y2]),
                        &Vector::zeros(2),
                        &opts,
                    )?;
                    if report.status == SolveStatus::Converged {
                        converged += 1;
                    }
                    max_residual = max_residual.max(report.residual_norm);
                }
            }
            println!("converged {converged}/25, max residual {max_residual:.3e}");
            Ok(exit_code::OK)
        }
        "section3-hammerstein" => {
            println!("manufactured-solution recovery for F(x) = A(x^2)x, K(t,s) = 1 + ts");
            println!("{:>6} {:>12} {:>14} {:>14}", "n", "x*", "grid-norm err", "residual");
            let kernel = KernelSpec::one_plus_ts();
            let pert = PerturbationSpec::zero();
            for n in [16usize, 32, 64] {
                let grid = QuadratureGrid::new(QuadratureRule::Trapezoid, n)?;
                let op = assemble_operator(&kernel, &pert, &grid)?;
                let opts = InvertOpts {
                    tol_res: 1e-11,
                    assert_surjective: true,
                    ..InvertOpts::default()
                };
                for (label, x_star) in [
                    ("1", Vector::repeat(n, 1.0)),
                    ("1+s", Vector::from_fn(n, |i, _| 1.0 + grid.nodes[i])),
                ] {
                    let y = op.eval(&x_star)?;
                    let report = invert(&op, &y, &Vector::zeros(n), &opts)?;
                    let err = grid.norm(&(report.solution_vector() - &x_star));
                    println!(
                        "{:>6} {:>12} {:>14.3e} {:>14.3e}",
                        n, label, err, report.residual_norm
                    );
                }
            }
            Ok(exit_code::OK)
        }
        other => Err(Error::Config(format!(
            "unknown demo '{other}'; known: section2-scalar, section2-planar, section3-hammerstein"
        ))),
    }
}
