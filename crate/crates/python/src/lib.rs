use std::path::Path;

use fixrank::harness::{self, ExperimentConfig, RunOptions, RunOutput};
use fixrank::solvers::{self, SolverKind, SolverTrace, CSV_HEADER};
use fixrank::{Error, GeometryKind};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<f64>>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// Validated config from optional JSON; missing fields take their defaults.
pub fn parse_config(json: Option<&str>) -> fixrank::Result<ExperimentConfig> {
    let cfg: ExperimentConfig = match json {
        Some(s) => serde_json::from_str(s)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn rows_of(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn trace_tuples(t: &SolverTrace) -> Vec<(usize, f64, f64, f64, usize, usize, f64, f64)> {
    t.rows
        .iter()
        .map(|r| (r.iter, r.cost, r.grad_norm, r.step_or_radius, r.backtracks, r.inner_iters, r.rho, r.time_s))
        .collect()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// One solver run on a generated instance.
#[pyclass(module = "pyfixrank", frozen)]
struct Run {
    out: RunOutput,
}

#[pymethods]
impl Run {
    #[getter]
    fn final_cost(&self) -> f64 {
        self.out.summary.final_cost
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.out.summary.iterations
    }

    #[getter]
    fn test_rmse(&self) -> Option<f64> {
        self.out.summary.test_rmse
    }

    #[getter]
    fn error(&self) -> Option<String> {
        self.out.summary.error.clone()
    }

    fn summary_json(&self) -> String {
        serde_json::to_string(&self.out.summary).expect("summary serializes")
    }

    /// Rows in CSV column order.
    fn trace(&self) -> Vec<(usize, f64, f64, f64, usize, usize, f64, f64)> {
        trace_tuples(&self.out.trace)
    }

    fn trace_csv(&self) -> String {
        self.out.trace.to_csv()
    }

    /// Final factors as row lists, in the geometry's factor order.
    fn factors(&self) -> Vec<Rows> {
        self.out.point.as_ref().map_or_else(Vec::new, |x| x.factors().iter().map(rows_of).collect())
    }

    fn dense(&self) -> Option<Rows> {
        self.out.point.as_ref().map(|x| rows_of(&x.to_dense()))
    }

    fn __repr__(&self) -> String {
        let s = &self.out.summary;
        format!("Run({} {}, iterations={}, final_cost={:e})", s.geometry, s.solver, s.iterations, s.final_cost)
    }
}

#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&ExperimentConfig::default()).expect("config serializes")
}

#[pyfunction]
#[pyo3(signature = (config=None))]
fn sample_count(config: Option<&str>) -> PyResult<usize> {
    Ok(parse_config(config).map_err(to_py)?.sample_count())
}

/// `{"shape", "train", "test", "a", "b"}` with sampled sets as `(rows, cols, values)`.
#[pyfunction]
#[pyo3(signature = (config=None, instance=0))]
fn generate<'py>(py: Python<'py>, config: Option<&str>, instance: usize) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = parse_config(config).map_err(to_py)?;
    let g = py.detach(|| harness::generate_problem(&cfg, instance)).map_err(to_py)?;
    let triplets = |m: &fixrank::sparse::SampledMatrix| {
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (i, j, x) in m.iter() {
            r.push(i);
            c.push(j);
            v.push(x);
        }
        (r, c, v)
    };
    let d = pyo3::types::PyDict::new(py);
    d.set_item("shape", g.problem.shape())?;
    d.set_item("train", triplets(g.problem.train()))?;
    d.set_item("test", g.problem.test().map(triplets))?;
    d.set_item("a", rows_of(&g.a))?;
    d.set_item("b", rows_of(&g.b))?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (geometry, solver, config=None, instance=0))]
fn solve(py: Python<'_>, geometry: &str, solver: &str, config: Option<&str>, instance: usize) -> PyResult<Run> {
    let (kind, solver): (GeometryKind, SolverKind) = (parse(geometry)?, parse(solver)?);
    let cfg = parse_config(config).map_err(to_py)?;
    let out = py
        .detach(|| {
            let problem = harness::generate_problem(&cfg, instance)?.problem;
            harness::solve(kind, solver, &problem, &RunOptions::from_config(&cfg))
        })
        .map_err(to_py)?;
    Ok(Run { out })
}

/// Writes traces and `summary.json` into `out_dir`; returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (out_dir, config=None))]
fn run_experiment(py: Python<'_>, out_dir: &str, config: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config).map_err(to_py)?;
    let summary = py.detach(|| harness::run_experiment(&cfg, Path::new(out_dir))).map_err(to_py)?;
    Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"))
}

/// Diagnostics report as JSON.
#[pyfunction]
#[pyo3(signature = (geometry, config=None, instance=0))]
fn diagnose(py: Python<'_>, geometry: &str, config: Option<&str>, instance: usize) -> PyResult<String> {
    let kind: GeometryKind = parse(geometry)?;
    let cfg = parse_config(config).map_err(to_py)?;
    let report = py
        .detach(|| harness::diagnose(kind, &harness::generate_problem(&cfg, instance)?.problem, cfg.seed))
        .map_err(to_py)?;
    Ok(report.to_json())
}

#[pyfunction]
#[pyo3(signature = (dir, level=1e-6, csv=false))]
fn compare(dir: &str, level: f64, csv: bool) -> PyResult<String> {
    let c = harness::compare_geometries(Path::new(dir), level).map_err(to_py)?;
    Ok(if csv { c.to_csv() } else { c.to_text() })
}

#[pyfunction]
fn read_trace(path: &str) -> PyResult<Vec<(usize, f64, f64, f64, usize, usize, f64, f64)>> {
    Ok(trace_tuples(&SolverTrace::read_csv(Path::new(path)).map_err(to_py)?))
}

#[pyfunction]
fn adaptive_step_update(s_hat: f64, s: f64, backtracks: usize) -> PyResult<f64> {
    solvers::adaptive_step_update(s_hat, s, backtracks).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (r0_norm, theta=1.0, kappa=0.1))]
fn tcg_threshold(r0_norm: f64, theta: f64, kappa: f64) -> f64 {
    solvers::tcg_threshold(r0_norm, theta, kappa)
}

#[pymodule]
fn pyfixrank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CSV_HEADER", CSV_HEADER)?;
    m.add("GEOMETRIES", GeometryKind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>())?;
    m.add("SOLVERS", SolverKind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>())?;
    m.add_class::<Run>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(sample_count, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(read_trace, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_step_update, m)?)?;
    m.add_function(wrap_pyfunction!(tcg_threshold, m)?)?;
    Ok(())
}
