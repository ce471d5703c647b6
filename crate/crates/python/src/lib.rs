//! Python bindings: the operator registry, the least-squares functional,
//! the inversion driver, classification, the saddle search, the injectivity
//! audit, and the ray-growth probe.
//!
//! Vectors cross the boundary as plain lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use varinv::coercivity::{ray_growth, GrowthOpts};
use varinv::error::Error;
use varinv::functional::LeastSquaresFunctional;
use varinv::hammerstein::{
    assemble_operator, kernel_by_name, perturbation_by_name, rule_by_name, QuadratureGrid,
};
use varinv::inverter::{
    classify_critical, cubic_step, invert, ClassifyOpts, InvertOpts, SolveStatus,
};
use varinv::linalg::Vector;
use varinv::mountain_pass::{
    benchmark_functional, injectivity_audit, mountain_pass, AuditOpts, AuditOutcome,
    MountainPassOpts,
};
use varinv::operator::OperatorSpec;

fn err_to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_)
        | Error::Dimension(_)
        | Error::Precondition(_)
        | Error::DegenerateInput(_)
        | Error::Unsupported(_) => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn vec(v: Vec<f64>) -> Vector {
    Vector::from_vec(v)
}

/// A differentiable map with directional derivatives up to third order.
#[pyclass(name = "Operator", from_py_object)]
#[derive(Clone)]
struct PyOperator {
    inner: OperatorSpec,
    assert_surjective: bool,
}

#[pymethods]
impl PyOperator {
    /// Looks up a built-in problem: quintic1d, planar, pure-cubic,
    /// cube-minus-x, square, linear, arctan-bounded.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(PyOperator {
            inner: varinv::operator::builtin(name).map_err(err_to_py)?,
            assert_surjective: false,
        })
    }

    /// Assembles the discretized integral operator `F(x) = A(x^2)x + r(x)`.
    #[staticmethod]
    #[pyo3(signature = (kernel="constant", n=64, rule="trapezoid", perturbation="zero", c=0.01))]
    fn hammerstein(kernel: &str, n: usize, rule: &str, perturbation: &str, c: f64) -> PyResult<Self> {
        let grid = QuadratureGrid::new(rule_by_name(rule).map_err(err_to_py)?, n).map_err(err_to_py)?;
        let kernel = kernel_by_name(kernel).map_err(err_to_py)?;
        let pert = perturbation_by_name(perturbation, c).map_err(err_to_py)?;
        Ok(PyOperator {
            inner: assemble_operator(&kernel, &pert, &grid).map_err(err_to_py)?,
            assert_surjective: true,
        })
    }

    #[getter]
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }

    #[getter]
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.eval(&vec(x)).map_err(err_to_py)?.as_slice().to_vec())
    }

    /// Jacobian as a list of rows.
    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self.inner.jacobian(&vec(x)).map_err(err_to_py)?;
        Ok((0..j.nrows())
            .map(|i| (0..j.ncols()).map(|jj| j[(i, jj)]).collect())
            .collect())
    }

    fn d2_dir(&self, x: Vec<f64>, h: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .d2_dir(&vec(x), &vec(h))
            .map_err(err_to_py)?
            .as_slice()
            .to_vec())
    }

    fn d3_dir(&self, x: Vec<f64>, h: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .d3_dir(&vec(x), &vec(h))
            .map_err(err_to_py)?
            .as_slice()
            .to_vec())
    }

    /// Classifies a point: Regular, Degenerate, or HypothesisViolated.
    #[pyo3(signature = (x, seed=0))]
    fn classify(&self, x: Vec<f64>, seed: u64) -> PyResult<PyCriticalPoint> {
        let opts = ClassifyOpts {
            seed,
            assert_surjective: self.assert_surjective,
            ..ClassifyOpts::default()
        };
        let class = classify_critical(&self.inner, &vec(x), &opts).map_err(err_to_py)?;
        Ok(PyCriticalPoint {
            tag: format!("{:?}", class.tag),
            sigma_min: class.sigma_min,
            d2_norm: class.d2_norm,
            d3_inf: class.d3_inf,
            d3_sup: class.d3_sup,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Operator(name='{}', dim_in={}, dim_out={})",
            self.inner.name(),
            self.inner.dim_in(),
            self.inner.dim_out()
        )
    }
}

/// Classification of a critical-point candidate.
#[pyclass(name = "CriticalPoint")]
struct PyCriticalPoint {
    #[pyo3(get)]
    tag: String,
    #[pyo3(get)]
    sigma_min: f64,
    #[pyo3(get)]
    d2_norm: f64,
    #[pyo3(get)]
    d3_inf: f64,
    #[pyo3(get)]
    d3_sup: f64,
}

#[pymethods]
impl PyCriticalPoint {
    fn __repr__(&self) -> String {
        format!(
            "CriticalPoint(tag='{}', sigma_min={:.3e}, d2_norm={:.3e})",
            self.tag, self.sigma_min, self.d2_norm
        )
    }
}

/// `phi(x) = 1/2 |F(x) - y|^2` with its derivative chain.
#[pyclass(name = "LeastSquares")]
struct PyLeastSquares {
    inner: LeastSquaresFunctional,
}

#[pymethods]
impl PyLeastSquares {
    #[new]
    fn new(op: PyOperator, target: Vec<f64>) -> PyResult<Self> {
        Ok(PyLeastSquares {
            inner: LeastSquaresFunctional::new(op.inner, vec(target)).map_err(err_to_py)?,
        })
    }

    fn phi(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.phi(&vec(x)).map_err(err_to_py)
    }

    fn grad_phi(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.grad_phi(&vec(x)).map_err(err_to_py)?.as_slice().to_vec())
    }

    fn phi_d2_dir(&self, x: Vec<f64>, h: Vec<f64>) -> PyResult<f64> {
        self.inner.phi_d2_dir(&vec(x), &vec(h)).map_err(err_to_py)
    }

    fn phi_d3_dir(&self, x: Vec<f64>, h: Vec<f64>) -> PyResult<f64> {
        self.inner.phi_d3_dir(&vec(x), &vec(h)).map_err(err_to_py)
    }
}

/// Inversion outcome.
#[pyclass(name = "SolveReport")]
struct PySolveReport {
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    solution: Vec<f64>,
    #[pyo3(get)]
    residual_norm: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    starts_used: usize,
    #[pyo3(get)]
    cubic_steps: usize,
    #[pyo3(get)]
    class_tag: String,
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(status='{}', residual={:.3e}, iterations={})",
            self.status, self.residual_norm, self.iterations
        )
    }
}

/// Solves `F(x) = y` by monotone descent with the third-order corrector.
#[pyfunction]
#[pyo3(signature = (op, y, x0=None, tol_res=1e-9, seed=0, starts=8, max_iters=400))]
fn invert_map(
    op: &PyOperator,
    y: Vec<f64>,
    x0: Option<Vec<f64>>,
    tol_res: f64,
    seed: u64,
    starts: usize,
    max_iters: usize,
) -> PyResult<PySolveReport> {
    let start = match x0 {
        Some(v) => vec(v),
        None => Vector::zeros(op.inner.dim_in()),
    };
    let opts = InvertOpts {
        tol_res,
        seed,
        starts,
        max_iters,
        assert_surjective: op.assert_surjective,
        ..InvertOpts::default()
    };
    let report = invert(&op.inner, &vec(y), &start, &opts).map_err(err_to_py)?;
    Ok(PySolveReport {
        status: match report.status {
            SolveStatus::Converged => "Converged".into(),
            SolveStatus::Stalled => "Stalled".into(),
            SolveStatus::HypothesisViolated => "HypothesisViolated".into(),
        },
        solution: report.solution.clone(),
        residual_norm: report.residual_norm,
        iterations: report.iterations,
        starts_used: report.starts_used,
        cubic_steps: report.cubic_steps,
        class_tag: format!("{:?}", report.class_at_solution.tag),
    })
}

/// Third-order corrector step `x -> x + h` with `F'''(x)h^3 = y - F(x)`.
#[pyfunction]
fn cubic_corrector(op: &PyOperator, y: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(cubic_step(&op.inner, &vec(y), &vec(x))
        .map_err(err_to_py)?
        .as_slice()
        .to_vec())
}

/// Saddle-search outcome.
#[pyclass(name = "SaddleReport")]
struct PySaddleReport {
    #[pyo3(get)]
    critical_point: Vec<f64>,
    #[pyo3(get)]
    critical_value: f64,
    #[pyo3(get)]
    gradient_norm: f64,
    #[pyo3(get)]
    barrier_estimate: f64,
}

#[pymethods]
impl PySaddleReport {
    fn __repr__(&self) -> String {
        format!(
            "SaddleReport(value={:.9}, grad={:.3e})",
            self.critical_value, self.gradient_norm
        )
    }
}

fn saddle_report(r: varinv::mountain_pass::MountainPassReport) -> PySaddleReport {
    PySaddleReport {
        critical_point: r.critical_point,
        critical_value: r.critical_value,
        gradient_norm: r.gradient_norm,
        barrier_estimate: r.barrier_estimate,
    }
}

/// Saddle search on a named benchmark functional (two-well, two-well-2d).
#[pyfunction]
fn mountain_pass_benchmark(
    name: &str,
    anchor_a: Vec<f64>,
    anchor_b: Vec<f64>,
) -> PyResult<PySaddleReport> {
    let f = benchmark_functional(name).map_err(err_to_py)?;
    let report = mountain_pass(f.as_ref(), &vec(anchor_a), &vec(anchor_b), &MountainPassOpts::default())
        .map_err(err_to_py)?;
    Ok(saddle_report(report))
}

/// Saddle search on the residual functional of `op` for a target.
#[pyfunction]
fn mountain_pass_residual(
    op: &PyOperator,
    target: Vec<f64>,
    anchor_a: Vec<f64>,
    anchor_b: Vec<f64>,
) -> PyResult<PySaddleReport> {
    let f = LeastSquaresFunctional::new(op.inner.clone(), vec(target)).map_err(err_to_py)?;
    let report = mountain_pass(&f, &vec(anchor_a), &vec(anchor_b), &MountainPassOpts::default())
        .map_err(err_to_py)?;
    Ok(saddle_report(report))
}

/// Injectivity audit outcome.
#[pyclass(name = "AuditReport")]
struct PyAuditReport {
    #[pyo3(get)]
    outcome: String,
    #[pyo3(get)]
    gap: f64,
    #[pyo3(get)]
    critical_point: Option<Vec<f64>>,
    #[pyo3(get)]
    critical_value: Option<f64>,
    #[pyo3(get)]
    class_tag: Option<String>,
}

#[pymethods]
impl PyAuditReport {
    fn __repr__(&self) -> String {
        format!("AuditReport(outcome='{}', gap={:.3e})", self.outcome, self.gap)
    }
}

/// Audits a claimed collision `F(x1) = F(x2)`.
#[pyfunction]
fn audit_injectivity(op: &PyOperator, x1: Vec<f64>, x2: Vec<f64>) -> PyResult<PyAuditReport> {
    let mut opts = AuditOpts::default();
    opts.classify.assert_surjective = op.assert_surjective;
    let report = injectivity_audit(&op.inner, &vec(x1), &vec(x2), &opts).map_err(err_to_py)?;
    Ok(PyAuditReport {
        outcome: match report.outcome {
            AuditOutcome::NotACollision => "NotACollision".into(),
            AuditOutcome::CollisionConsistent => "CollisionConsistent".into(),
            AuditOutcome::HypothesisContradiction => "HypothesisContradiction".into(),
        },
        gap: report.gap,
        critical_point: report.critical_point,
        critical_value: report.critical_value,
        class_tag: report.class.map(|c| format!("{:?}", c.tag)),
    })
}

/// Ray-growth evidence: `(min_exponent, coercive_flag)`.
#[pyfunction]
#[pyo3(signature = (op, y, seed=0))]
fn growth_exponent(op: &PyOperator, y: Vec<f64>, seed: u64) -> PyResult<(f64, bool)> {
    let opts = GrowthOpts {
        seed,
        ..GrowthOpts::default()
    };
    let report = ray_growth(&op.inner, &vec(y), &opts).map_err(err_to_py)?;
    Ok((report.min_exponent, report.coercive_flag))
}

#[pymodule]
fn varinv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyCriticalPoint>()?;
    m.add_class::<PyLeastSquares>()?;
    m.add_class::<PySolveReport>()?;
    m.add_class::<PySaddleReport>()?;
    m.add_class::<PyAuditReport>()?;
    m.add_function(wrap_pyfunction!(invert_map, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_corrector, m)?)?;
    m.add_function(wrap_pyfunction!(mountain_pass_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(mountain_pass_residual, m)?)?;
    m.add_function(wrap_pyfunction!(audit_injectivity, m)?)?;
    m.add_function(wrap_pyfunction!(growth_exponent, m)?)?;
    Ok(())
}
