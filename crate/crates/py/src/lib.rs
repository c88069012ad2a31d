//! Python bindings. Parameter vectors are 8-sequences in θ order
//! (xi1, xi2, Omega11, Omega12, Omega22, alpha1, alpha2, tau); data are two equal-length sequences.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use esn2::{CubatureControls, Dataset, DpParams, Esn2Error, FitControls, RngSeed, SweepParam, SweepSpec};

fn err(e: Esn2Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dp(theta: [f64; 8]) -> PyResult<DpParams> {
    DpParams::from_array(theta).map_err(err)
}

fn data(y1: Vec<f64>, y2: Vec<f64>) -> PyResult<Dataset> {
    Dataset::new(y1, y2).map_err(err)
}

fn controls(rel_tol: f64, abs_tol: f64, max_evals: usize) -> CubatureControls {
    CubatureControls { rel_tol, abs_tol, max_evals }
}

#[pyfunction]
fn density(theta: [f64; 8], y1: f64, y2: f64) -> PyResult<f64> {
    esn2::density_esn2(y1, y2, dp(theta)?).map_err(err)
}

#[pyfunction]
fn loglik(theta: [f64; 8], y1: Vec<f64>, y2: Vec<f64>) -> PyResult<f64> {
    esn2::loglik(dp(theta)?, &data(y1, y2)?).map_err(err)
}

#[pyfunction]
fn score(theta: [f64; 8], y1: Vec<f64>, y2: Vec<f64>) -> PyResult<[f64; 8]> {
    Ok(esn2::score(dp(theta)?, &data(y1, y2)?).map_err(err)?.as_array())
}

#[pyfunction]
fn observed_info(theta: [f64; 8], y1: Vec<f64>, y2: Vec<f64>) -> PyResult<[[f64; 8]; 8]> {
    Ok(esn2::observed_info(dp(theta)?, &data(y1, y2)?).map_err(err)?.data)
}

/// Returns (matrix, converged).
#[pyfunction]
#[pyo3(signature = (theta, rel_tol = 1e-6, abs_tol = 1e-12, max_evals = 1_000_000))]
fn expected_info(theta: [f64; 8], rel_tol: f64, abs_tol: f64, max_evals: usize) -> PyResult<([[f64; 8]; 8], bool)> {
    let info = esn2::expected_info(dp(theta)?, controls(rel_tol, abs_tol, max_evals)).map_err(err)?;
    Ok((info.matrix.data, info.converged))
}

/// Returns (mean, covariance).
#[pyfunction]
fn moments(theta: [f64; 8]) -> PyResult<([f64; 2], [[f64; 2]; 2])> {
    let m = esn2::moments_esn2(dp(theta)?).map_err(err)?;
    Ok((m.mean, m.cov))
}

/// Returns (y1, y2).
#[pyfunction]
fn sample(theta: [f64; 8], n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let d = esn2::sample_esn2(dp(theta)?, n, RngSeed(seed)).map_err(err)?;
    Ok((d.y1().to_vec(), d.y2().to_vec()))
}

/// Rows of (value, det, min_eigenvalue, converged).
#[pyfunction]
#[pyo3(signature = (param, grid, base, rel_tol = 1e-6, abs_tol = 1e-12, max_evals = 1_000_000))]
fn det_scan(
    param: &str,
    grid: Vec<f64>,
    base: [f64; 8],
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> PyResult<Vec<(f64, f64, f64, bool)>> {
    let sweep_param: SweepParam = param.parse().map_err(err)?;
    let base =
        DpParams::from_array_unchecked(base).with_component(sweep_param.index(), grid.first().copied().unwrap_or(0.0));
    let spec = SweepSpec { sweep_param, grid, base };
    let rows = esn2::det_scan(&spec, controls(rel_tol, abs_tol, max_evals)).map_err(err)?;
    Ok(rows.iter().map(|r| (r.param_value, r.det, r.min_eigenvalue, r.converged)).collect())
}

/// Returns (dp_hat, loglik, converged).
#[pyfunction]
#[pyo3(signature = (y1, y2, init, grad_tol = 1e-6, max_iter = 500))]
fn fit(y1: Vec<f64>, y2: Vec<f64>, init: [f64; 8], grad_tol: f64, max_iter: usize) -> PyResult<([f64; 8], f64, bool)> {
    let out = esn2::fit_mle(&data(y1, y2)?, dp(init)?, FitControls { grad_tol, max_iter }).map_err(err)?;
    Ok((out.dp_hat.to_array(), out.loglik, out.converged))
}

#[pymodule]
fn esn2py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(loglik, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(observed_info, m)?)?;
    m.add_function(wrap_pyfunction!(expected_info, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(det_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
