//! Python bindings: `import pysemispline`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use semispline::config::StudyConfig;
use semispline::modelselect::{count_criteria, CriteriaConfig, SelectionReport};
use semispline::parametric::resolve_model;
use semispline::pls::{SmootherChoice, SmootherSpec};
use semispline::spse::{self, Gamma};
use semispline::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.exit_code() == 2 || e.exit_code() == 3 => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn gamma(g: u8) -> PyResult<Gamma> {
    Gamma::try_from(g).map_err(py_err)
}

fn choice(degree: usize, order: usize, knots: Option<usize>, lam: Option<f64>, rates: bool) -> PyResult<SmootherChoice> {
    match (knots, lam) {
        (Some(k), Some(l)) => Ok(SmootherChoice::Fixed(
            SmootherSpec::new(degree, k, order, l).map_err(py_err)?,
        )),
        (None, None) if rates => Ok(SmootherChoice::Rates { degree, order }),
        (None, None) => Ok(SmootherChoice::gcv(degree, order)),
        _ => Err(PyValueError::new_err("knots and lam must be given together")),
    }
}

/// B-spline basis of degree `p` on `K` equal segments of [0, 1].
#[pyclass(name = "SplineBasis", frozen)]
struct PySplineBasis(semispline::splinecore::SplineBasis);

#[pymethods]
impl PySplineBasis {
    #[new]
    fn new(degree: usize, segments: usize) -> PyResult<Self> {
        semispline::splinecore::SplineBasis::new(degree, segments)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.eval_basis(x).map_err(py_err)?.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("SplineBasis(degree={}, segments={})", self.0.degree(), self.0.segments())
    }
}

/// A fitted semiparametric penalized spline.
#[pyclass(name = "SpseFit", frozen)]
struct PySpseFit(spse::SpseFit);

#[pymethods]
impl PySpseFit {
    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.0.evaluate(x).map_err(py_err)
    }

    fn evaluate(&self, xs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.evaluate_many(&xs).map_err(py_err)
    }

    fn variance(&self, x: f64) -> PyResult<f64> {
        self.0.variance(x).map_err(py_err)
    }

    #[pyo3(signature = (x, level = 0.95))]
    fn confidence_interval(&self, x: f64, level: f64) -> PyResult<(f64, f64)> {
        self.0.confidence_interval(x, level).map_err(py_err)
    }

    #[getter]
    fn model(&self) -> String {
        self.0.parametric().name().to_string()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.0.parametric().coefficients().to_vec()
    }

    #[getter]
    fn knots(&self) -> usize {
        self.0.smoother().spec().segments()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.smoother().spec().lambda
    }

    #[getter]
    fn gamma(&self) -> u8 {
        self.0.gamma().into()
    }
}

/// Fit `f(x|beta) + f(x|beta)^gamma r(x)`; `(K, lambda)` by GCV unless given.
#[pyfunction]
#[pyo3(signature = (xs, ys, model, gamma = 0, degree = 1, penalty_order = 2, knots = None, lam = None, rates = false, example = None))]
#[allow(clippy::too_many_arguments)]
fn fit_spse(
    xs: Vec<f64>,
    ys: Vec<f64>,
    model: &str,
    gamma: u8,
    degree: usize,
    penalty_order: usize,
    knots: Option<usize>,
    lam: Option<f64>,
    rates: bool,
    example: Option<u32>,
) -> PyResult<PySpseFit> {
    let m = resolve_model(model, example).map_err(py_err)?;
    let c = choice(degree, penalty_order, knots, lam, rates)?;
    spse::fit_spse(&xs, &ys, &m, self::gamma(gamma)?, &c)
        .map(PySpseFit)
        .map_err(py_err)
}

/// Result of scoring candidate models.
#[pyclass(name = "SelectionReport", frozen)]
struct PySelectionReport(SelectionReport);

#[pymethods]
impl PySelectionReport {
    #[getter]
    fn selected(&self) -> String {
        self.0.selected_a_lambda.clone()
    }

    #[getter]
    fn selected_a(&self) -> String {
        self.0.selected_a.clone()
    }

    #[getter]
    fn selected_lambda(&self) -> String {
        self.0.selected_lambda.clone()
    }

    /// `(model, C_a, C_lambda, C_a_lambda)` per candidate.
    fn counts(&self) -> Vec<(String, usize, usize, usize)> {
        self.0
            .candidates
            .iter()
            .map(|c| (c.model.clone(), c.c_a, c.c_lambda, c.c_a_lambda))
            .collect()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.0.to_csv_string().map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (xs, ys, candidates, gamma = 0, degree = 1, penalty_order = 2, grid_j = 100, example = None))]
#[allow(clippy::too_many_arguments)]
fn select_model(
    xs: Vec<f64>,
    ys: Vec<f64>,
    candidates: Vec<String>,
    gamma: u8,
    degree: usize,
    penalty_order: usize,
    grid_j: usize,
    example: Option<u32>,
) -> PyResult<PySelectionReport> {
    let models = candidates
        .iter()
        .map(|c| resolve_model(c, example))
        .collect::<semispline::Result<Vec<_>>>()
        .map_err(py_err)?;
    let mut config = CriteriaConfig::new(self::gamma(gamma)?, degree, penalty_order);
    config.grid_j = grid_j;
    count_criteria(&xs, &ys, &models, &config)
        .map(PySelectionReport)
        .map_err(py_err)
}

/// Seeded `(xs, ys)` from a reference example.
#[pyfunction]
fn generate_dataset(example: u32, n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let truth = semispline::simlab::example_truth(example).map_err(py_err)?;
    Ok(semispline::simlab::generate_dataset(&truth, n, seed))
}

/// Run a study given as TOML or JSON text; returns `(arm, ISB, V, MISE)` rows.
#[pyfunction]
fn run_study(py: Python<'_>, study: &str) -> PyResult<Vec<(String, f64, f64, f64)>> {
    let config = StudyConfig::parse_str(study).map_err(py_err)?;
    let spec = config.to_spec().map_err(py_err)?;
    let result = py
        .detach(|| semispline::simlab::run_study(&spec))
        .map_err(py_err)?;
    Ok(result
        .arms
        .iter()
        .map(|a| (a.label.clone(), a.isb, a.v, a.mise))
        .collect())
}

#[pymodule]
fn pysemispline(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", semispline::config::LIBRARY_VERSION)?;
    m.add_class::<PySplineBasis>()?;
    m.add_class::<PySpseFit>()?;
    m.add_class::<PySelectionReport>()?;
    m.add_function(wrap_pyfunction!(fit_spse, m)?)?;
    m.add_function(wrap_pyfunction!(select_model, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
