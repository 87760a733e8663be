//! Python bindings: outcome expressions, evaluation, rewriting, failure
//! extraction, QTA checking, and Monte Carlo sampling.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::deltaq as core;
use core::{BasicAssignment, Grid, OutcomeExpr, TreePath};

fn verr<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An outcome expression.
#[pyclass(name = "Expr", frozen)]
struct Expr {
    inner: OutcomeExpr,
}

#[pymethods]
impl Expr {
    /// Parse the textual grammar: `->-`, `/\`, `\/`, `<m|m'>`, `<[p]>`,
    /// `top`, `bot`, identifiers, parentheses.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Expr { inner: core::parse(text).map_err(verr)? })
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({})", self.inner)
    }

    fn __eq__(&self, other: &Expr) -> bool {
        self.inner == other.inner
    }

    /// Replace every occurrence of the named base outcome.
    fn substitute(&self, name: &str, replacement: &Expr) -> Expr {
        Expr { inner: self.inner.substitute(name, &replacement.inner) }
    }

    /// Distinct base-outcome names in first-occurrence order.
    fn base_names(&self) -> Vec<String> {
        self.inner.base_names()
    }
}

/// A basic assignment: per-outcome delay distributions on a shared grid.
#[pyclass(name = "Assignment", frozen)]
struct Assignment {
    inner: BasicAssignment,
}

#[pymethods]
impl Assignment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Assignment { inner: BasicAssignment::from_json(text).map_err(verr)? })
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.grid().dt()
    }

    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.grid().t_max()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn unassigned_names(&self, expr: &Expr) -> Vec<String> {
        self.inner.unassigned_names(&expr.inner)
    }
}

/// An improper delay distribution on a grid.
#[pyclass(name = "DeltaQ", frozen)]
struct PyDeltaQ {
    inner: core::DeltaQ,
}

#[pymethods]
impl PyDeltaQ {
    /// Probability of never completing.
    #[getter]
    fn intangible(&self) -> f64 {
        self.inner.intangible()
    }

    /// Probability of completing at a finite time beyond the grid.
    #[getter]
    fn overflow(&self) -> f64 {
        self.inner.overflow()
    }

    /// CDF value at `t`, interpolated between bin edges.
    fn cdf_at(&self, t: f64) -> PyResult<f64> {
        self.inner.cdf_at(t).map_err(verr)
    }

    /// The CDF at every bin edge.
    fn cdf(&self) -> Vec<f64> {
        self.inner.cdf()
    }

    /// Whether this distribution is at least as timely as `required`.
    fn leq(&self, required: &PyDeltaQ) -> PyResult<bool> {
        self.inner.leq(&required.inner).map_err(verr)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Verdict of a QTA check.
#[pyclass(name = "Verdict", frozen)]
struct Verdict {
    #[pyo3(get)]
    satisfied: bool,
    /// `(t, required, observed)` triples for each missed deadline.
    #[pyo3(get)]
    violations: Vec<(f64, f64, f64)>,
    #[pyo3(get)]
    failure_observed: f64,
    #[pyo3(get)]
    failure_allowed: f64,
    #[pyo3(get)]
    slack: f64,
}

/// Aggregated Monte Carlo run.
#[pyclass(name = "SampleReport", frozen)]
struct SampleReport {
    inner: core::SampleReport,
}

#[pymethods]
impl SampleReport {
    #[getter]
    fn trials(&self) -> u64 {
        self.inner.trials
    }

    #[getter]
    fn completed(&self) -> u64 {
        self.inner.completed
    }

    #[getter]
    fn failed(&self) -> u64 {
        self.inner.failed
    }

    #[getter]
    fn overflow(&self) -> u64 {
        self.inner.overflow
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Sorted completion times.
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    fn empirical_cdf_at(&self, t: f64) -> f64 {
        self.inner.empirical_cdf_at(t)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Expr> {
    Expr::parse(text)
}

/// Grid-only assignment for expressions over `top`, `bot`, and unassigned
/// names.
#[pyfunction]
#[pyo3(signature = (t_max, dt=None))]
fn empty_assignment(t_max: f64, dt: Option<f64>) -> PyResult<Assignment> {
    let grid = match dt {
        Some(dt) => Grid::with_dt(dt, t_max).map_err(verr)?,
        None => Grid::from_t_max(t_max).map_err(verr)?,
    };
    Ok(Assignment { inner: BasicAssignment::new(grid) })
}

#[pyfunction]
fn evaluate(expr: &Expr, assignment: &Assignment) -> PyResult<PyDeltaQ> {
    Ok(PyDeltaQ { inner: core::evaluate(&expr.inner, &assignment.inner).map_err(verr)? })
}

#[pyfunction]
fn failure_rate(expr: &Expr, assignment: &Assignment) -> PyResult<f64> {
    core::failure_rate(&expr.inner, &assignment.inner).map_err(verr)
}

/// `(failure, success)` display strings; the success side is computed by
/// decimal string arithmetic so tiny failure masses remain visible.
#[pyfunction]
fn failure_success_strings(failure: f64) -> PyResult<(String, String)> {
    if !(0.0..=1.0).contains(&failure) {
        return Err(verr("failure must be a probability"));
    }
    Ok(core::format_failure_success(failure))
}

/// All rewrite-rule ids in the catalog.
#[pyfunction]
fn rule_ids() -> Vec<&'static str> {
    core::rule_catalog().iter().map(|r| r.id).collect()
}

/// Apply one rewrite rule at a path given as a string of L/R steps
/// (`""` or `"."` is the root).
#[pyfunction]
fn apply_rule(expr: &Expr, rule_id: &str, path: &str) -> PyResult<Expr> {
    let path = TreePath::parse(path).map_err(verr)?;
    Ok(Expr { inner: core::apply_at(&expr.inner, rule_id, &path).map_err(verr)? })
}

/// Normalise the expression; returns the result and the rendered trace.
#[pyfunction]
fn normalize(expr: &Expr) -> (Expr, String) {
    let (nf, trace) = core::normalize(&expr.inner);
    (Expr { inner: nf }, trace.render())
}

/// Split into a failure-free core and the overall failure probability.
#[pyfunction]
fn extract_failure(expr: &Expr) -> PyResult<(Expr, f64)> {
    let (core_expr, f) = core::extract_failure(&expr.inner).map_err(verr)?;
    Ok((Expr { inner: core_expr }, f))
}

/// Properise the named base outcomes; returns the rewritten expression,
/// the adjusted assignment, and `(name, intangible)` pairs.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn properise(
    expr: &Expr,
    assignment: &Assignment,
    names: Vec<String>,
) -> PyResult<(Expr, Assignment, Vec<(String, f64)>)> {
    let result = core::properise(&expr.inner, &assignment.inner, &names).map_err(verr)?;
    Ok((
        Expr { inner: result.expr },
        Assignment { inner: result.assignment },
        result.properised,
    ))
}

/// Check the expression against an agreement given as JSON.
#[pyfunction]
fn check_qta(expr: &Expr, assignment: &Assignment, qta_json: &str) -> PyResult<Verdict> {
    let qta = core::Qta::from_json(qta_json).map_err(verr)?;
    let v = core::check_qta(&expr.inner, &assignment.inner, &qta).map_err(verr)?;
    Ok(Verdict {
        satisfied: v.satisfied,
        violations: v.violations.iter().map(|x| (x.t, x.required, x.observed)).collect(),
        failure_observed: v.failure_observed,
        failure_allowed: v.failure_allowed,
        slack: v.slack,
    })
}

/// Run Monte Carlo trials, deterministically from the seed.
#[pyfunction]
fn sample(expr: &Expr, assignment: &Assignment, seed: u64, trials: u64) -> PyResult<SampleReport> {
    if trials == 0 {
        return Err(verr("trials must be at least 1"));
    }
    Ok(SampleReport { inner: core::sample(&expr.inner, &assignment.inner, seed, trials) })
}

#[pymodule]
fn deltaq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expr>()?;
    m.add_class::<Assignment>()?;
    m.add_class::<PyDeltaQ>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<SampleReport>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(empty_assignment, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(failure_rate, m)?)?;
    m.add_function(wrap_pyfunction!(failure_success_strings, m)?)?;
    m.add_function(wrap_pyfunction!(rule_ids, m)?)?;
    m.add_function(wrap_pyfunction!(apply_rule, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(extract_failure, m)?)?;
    m.add_function(wrap_pyfunction!(properise, m)?)?;
    m.add_function(wrap_pyfunction!(check_qta, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    Ok(())
}
