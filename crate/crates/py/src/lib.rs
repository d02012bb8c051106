//! Python bindings: grids, the continuation solver, implicit stepping, the
//! truncation chain, and the diagnostic constants.
//!
//! Data crosses the boundary as plain floats and lists; a datum can be a
//! number, a flat list of nodal values, or a callable taking the node
//! coordinates.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pmc_core::diagnostics::{default_scan_family, necessary_condition_scan};
use pmc_core::evolution::trajectory_monitors;
use pmc_core::grid::Grid as CoreGrid;
use pmc_core::l1::DEFAULT_CAPS;
use pmc_core::solver::StepRecord;
use pmc_core::{
    bv_seminorm, continue_to_limit, example_fields, gradient, pairing_defect, solve_l1,
    solve_regularized, AbsorptionSpec, ContinuationSchedule, DatumClass, DatumSpec,
    EvolutionConfig, GridSpec, NewtonOptions, ScalarField, SolverError,
};

fn value_err(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

fn solver_err(e: SolverError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A tensor grid: an interval, a rectangle, or a radial shell.
#[pyclass(module = "pmc_py", skip_from_py_object)]
#[derive(Clone)]
struct Grid {
    inner: Arc<CoreGrid>,
}

impl Grid {
    fn build(spec: &GridSpec) -> PyResult<Grid> {
        CoreGrid::build(spec)
            .map(|g| Grid { inner: Arc::new(g) })
            .map_err(|e| value_err(e.to_string()))
    }
}

#[pymethods]
impl Grid {
    #[staticmethod]
    #[pyo3(signature = (nodes, a=0.0, b=1.0))]
    fn interval(nodes: usize, a: f64, b: f64) -> PyResult<Grid> {
        Grid::build(&GridSpec::Interval { a, b, nodes })
    }

    #[staticmethod]
    #[pyo3(signature = (nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0))]
    fn rectangle(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> PyResult<Grid> {
        Grid::build(&GridSpec::Rectangle { x: (x0, x1), y: (y0, y1), nodes: (nx, ny) })
    }

    #[staticmethod]
    #[pyo3(signature = (nodes, rmin, rmax=1.0, dim=3))]
    fn radial(nodes: usize, rmin: f64, rmax: f64, dim: usize) -> PyResult<Grid> {
        Grid::build(&GridSpec::Radial { r_min: rmin, r_max: rmax, nodes, dim })
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        let s = self.inner.shape();
        (s[0], s[1])
    }

    #[getter]
    fn spacing(&self) -> (f64, f64) {
        let h = self.inner.spacing();
        (h[0], h[1])
    }

    #[getter]
    fn measure(&self) -> f64 {
        self.inner.measure()
    }

    /// Node coordinates in storage order, one tuple per node.
    fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.inner.num_nodes())
            .map(|i| {
                let c = self.inner.node_coord(i);
                (c[0], c[1])
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        let s = self.inner.shape();
        format!("Grid({}, {}x{})", self.inner.kind().label(), s[0], s[1])
    }
}

/// Turn a number, a nodal list, or a callable into samples on `grid`.
fn sample_datum(grid: &Arc<CoreGrid>, f: &Bound<'_, PyAny>) -> PyResult<ScalarField> {
    if let Ok(c) = f.extract::<f64>() {
        return Ok(ScalarField::constant(grid, c));
    }
    if let Ok(values) = f.extract::<Vec<f64>>() {
        if values.len() != grid.num_nodes() {
            return Err(value_err(format!(
                "datum has {} values but the grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        return Ok(ScalarField::from_vec(grid, values));
    }
    if f.is_callable() {
        let mut values = Vec::with_capacity(grid.num_nodes());
        let two = grid.axes() == 2;
        for i in 0..grid.num_nodes() {
            let c = grid.node_coord(i);
            let v = if two { f.call1((c[0], c[1]))? } else { f.call1((c[0],))? };
            values.push(v.extract::<f64>()?);
        }
        return Ok(ScalarField::from_vec(grid, values));
    }
    Err(value_err(
        "datum must be a number, a list of nodal values, or a callable on coordinates".into(),
    ))
}

/// Absorption from `"identity" | "atan" | "zero"` or `("power", q[, c0])`.
fn absorption_from(g: &Bound<'_, PyAny>) -> PyResult<AbsorptionSpec> {
    if let Ok(name) = g.extract::<String>() {
        return AbsorptionSpec::registry(&name).ok_or_else(|| {
            value_err(format!(
                "unknown absorption '{name}' (known: identity, atan, zero, or ('power', q, c0))"
            ))
        });
    }
    if let Ok((name, q)) = g.extract::<(String, f64)>() {
        if name == "power" && q >= 2.0 {
            return Ok(AbsorptionSpec::power(q, 1.0));
        }
    }
    if let Ok((name, q, c0)) = g.extract::<(String, f64, f64)>() {
        if name == "power" && q >= 2.0 && c0 > 0.0 {
            return Ok(AbsorptionSpec::power(q, c0));
        }
    }
    Err(value_err(
        "absorption must be 'identity', 'atan', 'zero', or ('power', q[, c0]) with q >= 2".into(),
    ))
}

fn absorption_or_identity(g: Option<&Bound<'_, PyAny>>) -> PyResult<AbsorptionSpec> {
    match g {
        Some(obj) => absorption_from(obj),
        None => Ok(AbsorptionSpec::identity()),
    }
}

fn schedule(kmax: u32, stop_tol: f64) -> PyResult<ContinuationSchedule> {
    if stop_tol <= 0.0 {
        return Err(value_err(format!("stop_tol must be positive, got {stop_tol}")));
    }
    Ok(ContinuationSchedule::geometric(kmax, stop_tol))
}

fn step_dict<'py>(py: Python<'py>, s: &StepRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("p", s.p)?;
    d.set_item("newton_iterations", s.newton_iterations)?;
    d.set_item("final_residual", s.final_residual)?;
    d.set_item("sup_norm", s.sup_norm)?;
    d.set_item("p_gradient_term", s.p_gradient_term)?;
    d.set_item("bv_seminorm", s.bv_seminorm)?;
    d.set_item("energy", s.energy)?;
    Ok(d)
}

/// A converged solve: the solution values plus the headline diagnostics.
#[pyclass(module = "pmc_py")]
struct Solution {
    #[pyo3(get)]
    sup_norm: f64,
    #[pyo3(get)]
    bv_seminorm: f64,
    #[pyo3(get)]
    flux_max: f64,
    #[pyo3(get)]
    pairing_defect_max: f64,
    u: Vec<f64>,
    steps: Vec<StepRecord>,
}

impl Solution {
    fn from_parts(u: &ScalarField, z: &pmc_core::VectorField, steps: Vec<StepRecord>) -> Solution {
        let gu = gradient(u);
        let defect = pairing_defect(z, &gu);
        Solution {
            sup_norm: u.abs_max(),
            bv_seminorm: bv_seminorm(u),
            flux_max: z.abs_max(),
            pairing_defect_max: defect.abs_max(),
            u: u.data().to_vec(),
            steps,
        }
    }
}

#[pymethods]
impl Solution {
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.u.clone()
    }

    /// The continuation trace as a list of dicts (empty for a fixed-p solve).
    fn steps<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.steps.iter().map(|s| step_dict(py, s)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(sup={:.6e}, bv={:.6e}, flux_max={:.6e})",
            self.sup_norm, self.bv_seminorm, self.flux_max
        )
    }
}

/// Continuation to the limit problem `g(u) - div(Du/sqrt(1+|Du|^2)) = f`.
#[pyfunction]
#[pyo3(signature = (grid, f, g=None, kmax=24, stop_tol=1e-6))]
fn solve(
    grid: &Grid,
    f: &Bound<'_, PyAny>,
    g: Option<&Bound<'_, PyAny>>,
    kmax: u32,
    stop_tol: f64,
) -> PyResult<Solution> {
    let f_field = sample_datum(&grid.inner, f)?;
    let spec = DatumSpec::samples("python", DatumClass::Linf, f_field);
    let gspec = absorption_or_identity(g)?;
    let sched = schedule(kmax, stop_tol)?;
    let report = continue_to_limit(
        &grid.inner,
        &spec,
        &gspec,
        &sched,
        &NewtonOptions::default(),
        None,
    )
    .map_err(solver_err)?;
    Ok(Solution::from_parts(&report.u, &report.z, report.steps))
}

/// One regularized solve at a fixed exponent p > 1.
#[pyfunction]
#[pyo3(signature = (grid, f, p, g=None))]
fn solve_p(
    grid: &Grid,
    f: &Bound<'_, PyAny>,
    p: f64,
    g: Option<&Bound<'_, PyAny>>,
) -> PyResult<Solution> {
    if p <= 1.0 {
        return Err(value_err(format!("p must exceed 1, got {p}")));
    }
    let f_field = sample_datum(&grid.inner, f)?;
    let spec = DatumSpec::samples("python", DatumClass::Linf, f_field);
    let gspec = absorption_or_identity(g)?;
    let (u, z, _) = solve_regularized(&grid.inner, &spec, &gspec, p, &NewtonOptions::default(), None)
        .map_err(solver_err)?;
    Ok(Solution::from_parts(&u, &z, Vec::new()))
}

/// Implicit steps of the curvature flow: each step solves
/// `v - lam*div(Dv/sqrt(1+|Dv|^2)) = state`. Returns the trajectory of
/// nodal values (steps+1 entries) and the per-step monitor dicts.
#[pyfunction]
#[pyo3(signature = (grid, u0, lam=0.05, steps=10, kmax=34, stop_tol=1e-9))]
fn evolve<'py>(
    py: Python<'py>,
    grid: &Grid,
    u0: &Bound<'_, PyAny>,
    lam: f64,
    steps: usize,
    kmax: u32,
    stop_tol: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Bound<'py, PyDict>>)> {
    if lam <= 0.0 {
        return Err(value_err(format!("lam must be positive, got {lam}")));
    }
    if steps == 0 {
        return Err(value_err("steps must be at least 1".into()));
    }
    let start = sample_datum(&grid.inner, u0)?;
    let sched = schedule(kmax, stop_tol)?;
    let cfg = EvolutionConfig::new(lam, steps);
    let trajectory = pmc_core::evolve(&start, &cfg, &sched, &NewtonOptions::default())
        .map_err(solver_err)?;
    let monitors = trajectory_monitors(&trajectory, lam)
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("step", m.step)?;
            d.set_item("time", m.time)?;
            d.set_item("sup_norm", m.sup_norm)?;
            d.set_item("l1_norm", m.l1_norm)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let states = trajectory.iter().map(|s| s.data().to_vec()).collect();
    Ok((states, monitors))
}

/// Truncation chain for a merely integrable datum: solves with the datum
/// capped at each level and reports the stabilization diagnostics.
#[pyfunction]
#[pyo3(signature = (grid, f, g=None, caps=None, kmax=24, stop_tol=1e-6))]
fn truncation_chain<'py>(
    py: Python<'py>,
    grid: &Grid,
    f: &Bound<'_, PyAny>,
    g: Option<&Bound<'_, PyAny>>,
    caps: Option<Vec<f64>>,
    kmax: u32,
    stop_tol: f64,
) -> PyResult<(Solution, Vec<Bound<'py, PyDict>>)> {
    let f_field = sample_datum(&grid.inner, f)?;
    let spec = DatumSpec::samples("python", DatumClass::L1, f_field);
    let gspec = absorption_or_identity(g)?;
    let sched = schedule(kmax, stop_tol)?;
    let caps = caps.unwrap_or_else(|| DEFAULT_CAPS.to_vec());
    if caps.is_empty() || caps[0] <= 0.0 || caps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(value_err("caps must be positive and strictly increasing".into()));
    }
    let (report, diag) = solve_l1(
        &grid.inner,
        &spec,
        &gspec,
        &caps,
        &sched,
        &NewtonOptions::default(),
    )
    .map_err(solver_err)?;
    let rows = diag
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("cap", r.cap)?;
            d.set_item("datum_l1", r.datum_l1)?;
            d.set_item("continuation_steps", r.continuation_steps)?;
            d.set_item("sup_norm", r.sup_norm)?;
            d.set_item("tk_bv_slope", r.tk_bv_slope)?;
            d.set_item("absorption_l1", r.absorption_l1)?;
            d.set_item("capped_diff", r.capped_diff)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((Solution::from_parts(&report.u, &report.z, report.steps), rows))
}

/// The closed-form radial benchmark `u(r) = r^-alpha - 1` on a shell grid:
/// returns (radii, exact solution, matching datum).
#[pyfunction]
fn radial_example(grid: &Grid, alpha: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let dim = grid.inner.dim();
    if grid.inner.kind() != pmc_core::GridKind::Radial {
        return Err(value_err("radial_example needs a radial grid".into()));
    }
    if !(alpha > 0.0 && alpha < (dim - 1) as f64) {
        return Err(value_err(format!("alpha must lie in (0, {}), got {alpha}", dim - 1)));
    }
    let (u, f) = example_fields(alpha, dim, &grid.inner);
    let r = (0..grid.inner.num_nodes())
        .map(|i| grid.inner.node_coord(i)[0])
        .collect();
    Ok((r, u.data().to_vec(), f.data().to_vec()))
}

/// Worst `|integral of f over A| / perimeter(A)` over concentric subsets;
/// a value >= 1 rules out solutions without absorption.
#[pyfunction]
fn scan<'py>(py: Python<'py>, grid: &Grid, f: &Bound<'_, PyAny>) -> PyResult<Bound<'py, PyDict>> {
    let f_field = sample_datum(&grid.inner, f)?;
    let family = default_scan_family(&grid.inner);
    let result = necessary_condition_scan(&f_field, &family);
    let rows = result
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("label", &r.label)?;
            d.set_item("integral", r.integral)?;
            d.set_item("perimeter", r.perimeter)?;
            d.set_item("ratio", r.ratio)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("worst_ratio", result.worst_ratio)?;
    out.set_item("witness", result.witness)?;
    out.set_item("rows", rows)?;
    Ok(out)
}

/// The two datum-size constants `N omega_N^(1/N)` and `(N-1) omega_N^(1/N)`.
#[pyfunction]
fn thresholds(n: u32) -> PyResult<(f64, f64)> {
    if n < 2 {
        return Err(value_err(format!("thresholds need N >= 2, got {n}")));
    }
    Ok(pmc_core::thresholds(n))
}

#[pymodule]
fn pmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_p, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(truncation_chain, m)?)?;
    m.add_function(wrap_pyfunction!(radial_example, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    Ok(())
}
