//! Python bindings. Problems are passed as key-value text in the same
//! format the command-line tool reads; results come back as dicts.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use transposer::bsee::{solve_picard, variational_residual, Partition, SolutionPair};
use transposer::chaos::ChaosVector;
use transposer::config::{self, KeyValues};
use transposer::nullctrl::{minimize_j, verify_null};
use transposer::slq::{gradient_iterate, riccati};
use transposer::{chaos, Error, DEFAULT_SEED};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::PicardDivergence { .. } | Error::CgStagnation { .. } | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse(text: &str, overrides: &[String]) -> PyResult<KeyValues> {
    let mut kv = KeyValues::parse(text, "<python>", Path::new(".")).map_err(to_py)?;
    for s in overrides {
        kv.set(s).map_err(to_py)?;
    }
    Ok(kv)
}

fn coeffs(v: &ChaosVector) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.coeffs().to_vec()).collect()
}

fn means(v: &ChaosVector) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.mean()).collect()
}

#[pyfunction]
fn hermite_eval(degree: usize, x: f64) -> PyResult<f64> {
    chaos::hermite_eval(degree, x).map_err(to_py)
}

/// `dim H^M(k)`, or None when it overflows.
#[pyfunction]
fn basis_size(k: usize, m: usize) -> Option<u64> {
    chaos::basis_size(k, m)
}

#[pyfunction]
fn enumerate_indices(k: usize, m: usize) -> Vec<Vec<u32>> {
    chaos::enumerate_indices(k, m)
        .iter()
        .map(|a| a.entries().to_vec())
        .collect()
}

#[pyfunction]
fn gram_matrix(k: usize, m: usize) -> PyResult<Vec<Vec<f64>>> {
    let g = chaos::gram_matrix(k, m).map_err(to_py)?;
    Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
}

fn solution_dict<'py>(
    py: Python<'py>,
    s: &SolutionPair,
    residual: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scheme", s.diagnostics.scheme)?;
    d.set_item("iterations", s.diagnostics.iterations)?;
    d.set_item("picard_residual", s.diagnostics.residual)?;
    d.set_item("converged", s.diagnostics.converged)?;
    d.set_item("a", coeffs(&s.a))?;
    d.set_item("b", coeffs(&s.b))?;
    d.set_item("a_terminal", s.terminal.coeffs().to_vec())?;
    d.set_item("a_mean", means(&s.a))?;
    d.set_item("b_mean", means(&s.b))?;
    d.set_item("variational_residual", residual)?;
    Ok(d)
}

/// Solves a backward problem. Coefficients are listed per slot, mode-major.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new(), verify = false, seed = DEFAULT_SEED))]
fn solve_bsee<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Vec<String>,
    verify: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let kv = parse(config, &overrides)?;
    let (s, residual) = py
        .detach(|| -> transposer::Result<_> {
            let problem = config::bsee_problem(&kv, None, None)?;
            let options = config::solve_options(&kv, seed)?;
            kv.check_all_used()?;
            let s = solve_picard(&problem, &options)?;
            let residual = if verify {
                Some(variational_residual(&s, &problem, &options.projector)?)
            } else {
                None
            };
            Ok((s, residual))
        })
        .map_err(to_py)?;
    solution_dict(py, &s, residual)
}

/// Runs the stochastic LQ gradient iteration from the zero control.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn slq_solve<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let kv = parse(config, &overrides)?;
    let run = py
        .detach(|| -> transposer::Result<_> {
            let (problem, options) = config::slq_problem(&kv)?;
            kv.check_all_used()?;
            gradient_iterate(&problem, None, &options)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("cost", run.last.cost)?;
    d.set_item("residual", run.last.residual)?;
    d.set_item("converged", run.converged)?;
    d.set_item("iterations", run.history.len() - 1)?;
    d.set_item(
        "cost_history",
        run.history.iter().map(|h| h.cost).collect::<Vec<_>>(),
    )?;
    d.set_item("control_mean", means(&run.last.control))?;
    Ok(d)
}

/// Minimizes the dual functional and returns the report and the control.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn nullctrl_solve<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let kv = parse(config, &overrides)?;
    let (r, check) = py
        .detach(|| -> transposer::Result<_> {
            let (problem, options) = config::nullctrl_problem(&kv)?;
            kv.check_all_used()?;
            let r = minimize_j(&problem, &options)?;
            let check = verify_null(&problem, &r.control)?;
            Ok((r, check))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("J_value", r.report.j_value)?;
    d.set_item("grad_norm", r.report.grad_norm)?;
    d.set_item("iterations", r.report.iterations)?;
    d.set_item("terminal_energy", r.report.terminal_energy)?;
    d.set_item("uncontrolled_energy", r.report.uncontrolled_energy)?;
    d.set_item("verified_energy", check)?;
    d.set_item("zT_mean", r.terminal.mean())?;
    d.set_item("control_mean", means(&r.control))?;
    Ok(d)
}

/// `(P(0), optimal cost)` for one mode. `discrete=True` gives the exact
/// optimum of the time-discrete problem with `steps` steps; otherwise the
/// continuous Riccati equation is integrated with `steps` RK4 steps.
#[pyfunction]
#[pyo3(signature = (lam, y0, sigma, horizon = 1.0, steps = 1000, discrete = false))]
fn riccati_cost(
    lam: f64,
    y0: f64,
    sigma: f64,
    horizon: f64,
    steps: usize,
    discrete: bool,
) -> PyResult<(f64, f64)> {
    let v = if discrete {
        riccati::discrete(
            lam,
            y0,
            sigma,
            &Partition::new(horizon, steps).map_err(to_py)?,
        )
    } else {
        riccati::continuous(lam, y0, sigma, horizon, steps)
    };
    Ok((v.p0, v.cost))
}

#[pymodule]
fn transposer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hermite_eval, m)?)?;
    m.add_function(wrap_pyfunction!(basis_size, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_indices, m)?)?;
    m.add_function(wrap_pyfunction!(gram_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(solve_bsee, m)?)?;
    m.add_function(wrap_pyfunction!(slq_solve, m)?)?;
    m.add_function(wrap_pyfunction!(nullctrl_solve, m)?)?;
    m.add_function(wrap_pyfunction!(riccati_cost, m)?)?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    Ok(())
}
