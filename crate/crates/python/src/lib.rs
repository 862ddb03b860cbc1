//! Python bindings: `import emw`.
//!
//! Domain errors raise `ValueError`, numerical failures (non-convergence,
//! instability) raise `ArithmeticError`, and file errors raise `OSError`.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use emw_core::analysis;
use emw_core::case::{self, validate_case, BusId, Disturbance, Scenario};
use emw_core::cases;
use emw_core::inertia;
use emw_core::path;
use emw_core::powerflow::{self, PowerFlowError};
use emw_core::solver::{self, BoundaryMode, Model, SolverConfig, SolverError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_err(e: SolverError) -> PyErr {
    match e {
        SolverError::NonFinite { .. }
        | SolverError::Unstable { .. }
        | SolverError::ZeroSpeed
        | SolverError::PowerFlow(_) => PyArithmeticError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn pf_err(e: PowerFlowError) -> PyErr {
    PyArithmeticError::new_err(e.to_string())
}

/// A transmission network.
#[pyclass(name = "PowerCase", frozen)]
struct PyPowerCase {
    inner: case::PowerCase,
}

#[pymethods]
impl PyPowerCase {
    /// Parse and validate a case in the native JSON schema.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: case::parse_case_json(text).map_err(value_err)?,
        })
    }

    /// Parse MATPOWER text, optionally with a JSON sidecar of line lengths
    /// and generator dynamics.
    #[staticmethod]
    #[pyo3(signature = (text, sidecar = None))]
    fn from_matpower(text: &str, sidecar: Option<&str>) -> PyResult<Self> {
        Ok(Self {
            inner: case::parse_matpower_with_sidecar(text, sidecar).map_err(value_err)?,
        })
    }

    /// Read a case file; `.m` files are MATPOWER, anything else JSON.
    #[staticmethod]
    #[pyo3(signature = (path, sidecar = None))]
    fn load(path: &str, sidecar: Option<&str>) -> PyResult<Self> {
        let read = |p: &str| std::fs::read_to_string(p).map_err(|e| PyOSError::new_err(format!("{p}: {e}")));
        let text = read(path)?;
        if path.ends_with(".m") {
            let side = sidecar.map(read).transpose()?;
            Self::from_matpower(&text, side.as_deref())
        } else {
            Self::from_json(&text)
        }
    }

    /// Bundled cases: "ieee39", "ieee39-dyn", "ieee9", "two_bus".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let inner = match name {
            "ieee39" => cases::ieee39(),
            "ieee39-dyn" => cases::ieee39_with_dynamics(),
            "ieee9" => cases::ieee9(),
            "two_bus" => cases::two_bus(),
            _ => return Err(value_err(format!("unknown built-in case {name:?}"))),
        };
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Invariant violations as "code: message" strings; empty when valid.
    fn validate(&self) -> Vec<String> {
        validate_case(&self.inner)
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.code, v.message))
            .collect()
    }

    #[getter]
    fn bus_ids(&self) -> Vec<BusId> {
        self.inner.buses.iter().map(|b| b.id).collect()
    }

    #[getter]
    fn line_labels(&self) -> Vec<String> {
        (0..self.inner.lines.len())
            .map(|k| self.inner.line_label(case::LineId(k)))
            .collect()
    }

    #[getter]
    fn base_mva(&self) -> f64 {
        self.inner.base_mva
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0
    }

    #[getter]
    fn total_inertia(&self) -> f64 {
        self.inner.total_inertia()
    }

    /// Copy with every generator's (or one bus's) inertia constant replaced.
    #[pyo3(signature = (h, bus = None))]
    fn with_inertia_constant(&self, h: f64, bus: Option<BusId>) -> Self {
        let mut c = self.inner.clone();
        for g in c.generators.iter_mut().filter(|g| bus.is_none_or(|b| g.bus == b)) {
            g.h_const = h;
        }
        c.refresh_derived();
        Self { inner: c }
    }

    /// Copy with one line's length multiplied by `factor`.
    fn with_line_scaled(&self, line: &str, factor: f64) -> PyResult<Self> {
        let mut c = self.inner.clone();
        let id = c
            .find_line(line)
            .ok_or_else(|| value_err(format!("no line matches {line:?}")))?;
        c.lines[id.0].length_miles *= factor;
        Ok(Self { inner: c })
    }

    fn __repr__(&self) -> String {
        format!(
            "PowerCase({} buses, {} lines, {} generators)",
            self.inner.buses.len(),
            self.inner.lines.len(),
            self.inner.generators.len()
        )
    }
}

/// Newton-Raphson power-flow result.
#[pyclass(name = "PowerFlowSolution", frozen, get_all)]
struct PyPowerFlow {
    bus_ids: Vec<BusId>,
    v_mag: Vec<f64>,
    v_ang: Vec<f64>,
    p_inj: Vec<f64>,
    q_inj: Vec<f64>,
    iterations: usize,
    max_mismatch: f64,
}

#[pyfunction]
fn power_flow(case: &PyPowerCase) -> PyResult<PyPowerFlow> {
    let s = powerflow::solve_power_flow(&case.inner, powerflow::DEFAULT_TOL, powerflow::DEFAULT_MAX_ITER)
        .map_err(pf_err)?;
    Ok(PyPowerFlow {
        bus_ids: s.bus_ids,
        v_mag: s.v_mag,
        v_ang: s.v_ang,
        p_inj: s.p_inj,
        q_inj: s.q_inj,
        iterations: s.iterations,
        max_mismatch: s.max_mismatch,
    })
}

/// Inertia assigned to each line, in case line order.
#[pyclass(name = "InertiaMap", frozen, get_all)]
struct PyInertiaMap {
    j_total: Vec<f64>,
    j_per_mile: Vec<f64>,
    residue: f64,
    rounds: usize,
}

#[pyfunction]
fn distribute_inertia(case: &PyPowerCase) -> PyResult<PyInertiaMap> {
    let m = inertia::distribute_inertia(&case.inner, inertia::DEFAULT_TOL, inertia::DEFAULT_MAX_ROUNDS)
        .map_err(value_err)?;
    Ok(PyInertiaMap {
        j_total: m.j_total,
        j_per_mile: m.j_per_mile,
        residue: m.residue,
        rounds: m.rounds,
    })
}

#[pyclass(name = "EmwPath", frozen)]
struct PyPath {
    inner: path::EmwPath,
    labels: Vec<String>,
}

#[pymethods]
impl PyPath {
    #[getter]
    fn buses(&self) -> Vec<BusId> {
        self.inner.buses.clone()
    }

    #[getter]
    fn lines(&self) -> Vec<String> {
        self.labels.clone()
    }

    #[getter]
    fn velocities(&self) -> Vec<f64> {
        self.inner.velocities.clone()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths.clone()
    }

    #[getter]
    fn travel_time_s(&self) -> f64 {
        self.inner.travel_time_s
    }

    fn __repr__(&self) -> String {
        format!("EmwPath({:?}, {:.4} s)", self.inner.buses, self.inner.travel_time_s)
    }
}

fn find_path(c: &case::PowerCase, src: BusId, dst: BusId) -> PyResult<path::EmwPath> {
    let map = inertia::distribute_inertia(c, inertia::DEFAULT_TOL, inertia::DEFAULT_MAX_ROUNDS).map_err(value_err)?;
    let sol = powerflow::solve_power_flow(c, powerflow::DEFAULT_TOL, powerflow::DEFAULT_MAX_ITER).map_err(pf_err)?;
    path::shortest_emw_path(c, &map, &sol, src, dst).map_err(value_err)
}

/// Fastest EMW path between two buses.
#[pyfunction]
fn shortest_path(case: &PyPowerCase, src: BusId, dst: BusId) -> PyResult<PyPath> {
    let p = find_path(&case.inner, src, dst)?;
    let labels = p.lines.iter().map(|&l| case.inner.line_label(l)).collect();
    Ok(PyPath { inner: p, labels })
}

/// Simulated wave field on a discretized path.
#[pyclass(name = "WaveField", frozen)]
struct PyWaveField {
    inner: solver::WaveField,
}

#[pymethods]
impl PyWaveField {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn xi(&self) -> Vec<f64> {
        self.inner.grid.xi.clone()
    }

    /// `chi[k][i]` at time `times[k]` and position `xi[i]`.
    #[getter]
    fn chi(&self) -> Vec<Vec<f64>> {
        self.inner.snapshots.iter().map(|s| s.chi.clone()).collect()
    }

    #[getter]
    fn delta_theta(&self) -> Vec<Vec<f64>> {
        self.inner.snapshots.iter().map(|s| s.delta_theta.clone()).collect()
    }

    #[getter]
    fn voltage(&self) -> Vec<Vec<f64>> {
        self.inner.snapshots.iter().map(|s| s.v.clone()).collect()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn forced_chi(&self) -> f64 {
        self.inner.forced_chi
    }

    fn max_abs_chi(&self) -> f64 {
        self.inner.max_abs_chi()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Arrival, velocity and amplitude report as a JSON string.
    #[pyo3(signature = (threshold = analysis::DEFAULT_THRESHOLD))]
    fn analyze(&self, threshold: f64) -> PyResult<String> {
        Ok(analysis::analyze(&self.inner, threshold, None)
            .map_err(value_err)?
            .to_json())
    }

    fn __repr__(&self) -> String {
        format!(
            "WaveField({} points, {} snapshots, dt={:.3e})",
            self.inner.grid.n_points(),
            self.inner.times.len(),
            self.inner.dt
        )
    }
}

fn scenario(text: &str) -> PyResult<Disturbance> {
    Ok(Scenario::from_json(text).map_err(value_err)?.disturbance)
}

/// Built-in scenario JSON: "two_bus_load_step", "case39_load_step",
/// "case39_line_outage".
#[pyfunction]
fn builtin_scenario(name: &str) -> PyResult<String> {
    Ok(match name {
        "two_bus_load_step" => cases::TWO_BUS_LOAD_STEP,
        "case39_load_step" => cases::CASE39_LOAD_STEP,
        "case39_line_outage" => cases::CASE39_LINE_OUTAGE,
        _ => return Err(value_err(format!("unknown built-in scenario {name:?}"))),
    }
    .to_string())
}

fn solver_config(
    model: &str,
    boundary: &str,
    dxi: f64,
    courant: f64,
    t_end: f64,
    dt: Option<f64>,
    record_stride: usize,
) -> PyResult<SolverConfig> {
    Ok(SolverConfig {
        model: match model {
            "hom" => Model::Homogeneous,
            "nonhom" => Model::Nonhomogeneous,
            _ => return Err(value_err(format!("model must be 'hom' or 'nonhom', got {model:?}"))),
        },
        boundary_mode: match boundary {
            "characteristic" => BoundaryMode::Characteristic,
            "fictitious" => BoundaryMode::Fictitious,
            _ => return Err(value_err(format!("unknown boundary mode {boundary:?}"))),
        },
        dxi,
        courant,
        t_end,
        dt,
        record_stride,
        ..SolverConfig::default()
    })
}

/// Run power flows, inertia distribution, pathing and integration for a
/// scenario given as JSON text.
#[pyfunction]
#[pyo3(signature = (case, scenario_json, src, dst, model = "nonhom", boundary = "characteristic",
    dxi = 0.2, courant = 0.9, t_end = 10.0, dt = None, record_stride = 1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    case: &PyPowerCase,
    scenario_json: &str,
    src: BusId,
    dst: BusId,
    model: &str,
    boundary: &str,
    dxi: f64,
    courant: f64,
    t_end: f64,
    dt: Option<f64>,
    record_stride: usize,
) -> PyResult<PyWaveField> {
    let d = scenario(scenario_json)?;
    let cfg = solver_config(model, boundary, dxi, courant, t_end, dt, record_stride)?;
    let p = find_path(&case.inner, src, dst)?;
    let c = case.inner.clone();
    let w = py
        .detach(move || solver::simulate(&c, &d, &p, &cfg))
        .map_err(solver_err)?;
    Ok(PyWaveField { inner: w })
}

#[pymodule]
fn emw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPowerCase>()?;
    m.add_class::<PyPowerFlow>()?;
    m.add_class::<PyInertiaMap>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyWaveField>()?;
    m.add_function(wrap_pyfunction!(power_flow, m)?)?;
    m.add_function(wrap_pyfunction!(distribute_inertia, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_path, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
