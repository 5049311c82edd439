//! Python bindings: the statistical primitives plus the synthetic generator
//! and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use narrashock_core::causality::{self, DeltaMode};
use narrashock_core::config::PipelineConfig;
use narrashock_core::models::{FittedModel, ModelKind, ModelParams};
use narrashock_core::synth::{Coupling, CouplingDirection, SyntheticKind, SyntheticSpec};

fn py_err(e: narrashock_core::Error) -> PyErr {
    match e.exit_code() {
        2 => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("ragged feature matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

/// One-sided paired t-test on a loss differential; returns `(t, p)`.
#[pyfunction]
fn paired_t(d: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = causality::paired_t(&d).map_err(py_err)?;
    Ok((t.t_stat, t.p_value))
}

/// Exact binomial test of the share of `p < alpha`; returns
/// `(n_significant, rho_hat, binomial_p, significant)`.
#[pyfunction]
#[pyo3(signature = (p_values, alpha = 0.05))]
fn binomial_group_test(p_values: Vec<f64>, alpha: f64) -> PyResult<(usize, f64, f64, bool)> {
    let g = causality::binomial_group_test(&p_values, alpha).map_err(py_err)?;
    Ok((g.n_significant, g.rho_hat, g.binomial_p, g.significant))
}

/// Per-window `(mse_base, mse_enhanced)` pairs to deviations from the mean improvement.
#[pyfunction]
#[pyo3(signature = (windows, relative = false))]
fn temporal_deviation(windows: Vec<(f64, f64)>, relative: bool) -> PyResult<Vec<f64>> {
    let mode = if relative { DeltaMode::Relative } else { DeltaMode::Absolute };
    Ok(causality::temporal_deviation(&windows, mode).map_err(py_err)?.deviation)
}

/// Fit a linear or kernel-ridge model on `(x, y)` and predict `x_test`.
#[pyfunction]
#[pyo3(signature = (x, y, x_test, kind = "linear", lam = 1.0, gamma = None, standardize = true, intercept = true))]
#[allow(clippy::too_many_arguments)]
fn fit_predict(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_test: Vec<Vec<f64>>,
    kind: &str,
    lam: f64,
    gamma: Option<f64>,
    standardize: bool,
    intercept: bool,
) -> PyResult<Vec<f64>> {
    let kind: ModelKind = kind.parse().map_err(py_err)?;
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y lengths differ"));
    }
    let params = ModelParams {
        lambda: lam,
        gamma,
        standardize,
        intercept,
    };
    let model = FittedModel::fit(&matrix(&x)?, &DVector::from_vec(y), kind, &params).map_err(py_err)?;
    let test = matrix(&x_test)?;
    if test.nrows() > 0 && test.ncols() != x.first().map_or(0, Vec::len) {
        return Err(PyValueError::new_err("x_test width differs from x"));
    }
    Ok(model.predict(&test))
}

type Panel = (Vec<String>, BTreeMap<String, Vec<f64>>, String);

/// Synthetic panel as `(dates, {column: values}, truth_json)`.
#[pyfunction]
#[pyo3(signature = (kind = "coupled", n = 1000, lag = 1, coupling = "linear", strength = 1.0, seed = 0, direction = "econ_to_text"))]
fn gen_synthetic(
    kind: &str,
    n: usize,
    lag: usize,
    coupling: &str,
    strength: f64,
    seed: u64,
    direction: &str,
) -> PyResult<Panel> {
    let spec = SyntheticSpec {
        kind: kind.parse::<SyntheticKind>().map_err(py_err)?,
        n,
        lag,
        coupling: coupling.parse::<Coupling>().map_err(py_err)?,
        strength,
        seed,
        direction: direction.parse::<CouplingDirection>().map_err(py_err)?,
        ..SyntheticSpec::default()
    };
    let s = narrashock_core::synth::gen_synthetic(&spec).map_err(py_err)?;
    let dates = s.panel.dates.iter().map(|d| d.to_string()).collect();
    let columns = s.panel.columns.into_iter().map(|c| (c.id, c.values)).collect();
    let truth = serde_json::to_string(&s.truth).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((dates, columns, truth))
}

/// Write an article corpus, shocks, market data and a config; returns the config path.
#[pyfunction]
#[pyo3(signature = (dir, n_days = 800, seed = 0))]
fn write_fixture_corpus(dir: PathBuf, n_days: usize, seed: u64) -> PyResult<PathBuf> {
    narrashock_core::synth::write_fixture_corpus(&dir, n_days, seed).map_err(py_err)
}

/// Run every stage from a TOML config; returns the written files.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, seed = None))]
fn run_pipeline(py: Python<'_>, config: PathBuf, out_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<Vec<PathBuf>> {
    let mut cfg = PipelineConfig::load(&config).map_err(py_err)?;
    if let Some(out) = out_dir {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let bundle = py.detach(|| narrashock_core::pipeline::run_pipeline(&cfg)).map_err(py_err)?;
    Ok(bundle.files)
}

#[pymodule]
fn narrashock(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(paired_t, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_group_test, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(fit_predict, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(write_fixture_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
