//! Python bindings for the `tclflex` flexibility engine.

// false positive from the pyo3 0.22 macros on `PyResult` returns
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tclflex::analytics::{self, RequestKind, Scheme};
use tclflex::protocol::{self, Amplitude, PlanMode, ReductionRequest, SchemePreference};
use tclflex::scenario::Scenario;
use tclflex::sim::{self, FleetSpec, Policy, Sampling};
use tclflex::thermo::{self, ApplianceKind};

fn to_py(e: tclflex::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyIOError::new_err(e.to_string())
    }
}

fn parse_kind(kind: &str) -> PyResult<RequestKind> {
    match kind {
        "reduce" => Ok(RequestKind::Reduce),
        "increase" => Ok(RequestKind::Increase),
        other => Err(PyValueError::new_err(format!(
            "kind must be 'reduce' or 'increase', got {other:?}"
        ))),
    }
}

fn parse_scheme(scheme: &str) -> PyResult<Scheme> {
    match scheme {
        "upper" => Ok(Scheme::UpperBound),
        "indiv" => Ok(Scheme::Indiv),
        "coord" => Ok(Scheme::Coord),
        other => Err(PyValueError::new_err(format!(
            "scheme must be upper, indiv or coord, got {other:?}"
        ))),
    }
}

/// Thermal and electrical parameters of one appliance class.
#[pyclass(name = "ApplianceParams", frozen)]
#[derive(Clone, Copy)]
struct PyParams(thermo::ApplianceParams);

#[pymethods]
impl PyParams {
    /// Band `[0, delta]`, cooling appliance.
    #[new]
    #[pyo3(signature = (delta, v, w, p))]
    fn new(delta: f64, v: f64, w: f64, p: f64) -> PyResult<Self> {
        thermo::ApplianceParams::from_band(delta, v, w, p)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (temp_min, temp_max, drive_rate, drift_rate, power, kind = "cooling"))]
    fn with_band(
        temp_min: f64,
        temp_max: f64,
        drive_rate: f64,
        drift_rate: f64,
        power: f64,
        kind: &str,
    ) -> PyResult<Self> {
        let kind = match kind {
            "cooling" => ApplianceKind::Cooling,
            "heating" => ApplianceKind::Heating,
            other => return Err(PyValueError::new_err(format!("unknown appliance kind {other:?}"))),
        };
        thermo::ApplianceParams::new(temp_min, temp_max, drive_rate, drift_rate, power, kind)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    #[getter]
    fn v(&self) -> f64 {
        self.0.drive_rate()
    }

    #[getter]
    fn w(&self) -> f64 {
        self.0.drift_rate()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.power()
    }

    #[getter]
    fn cycle_length(&self) -> f64 {
        thermo::cycle_length(&self.0)
    }

    /// Parameters with the roles of ON and OFF swapped.
    fn mirror(&self) -> Self {
        Self(thermo::mirror(&self.0))
    }

    fn __repr__(&self) -> String {
        format!(
            "ApplianceParams(delta={}, v={}, w={}, p={})",
            self.0.delta(),
            self.0.drive_rate(),
            self.0.drift_rate(),
            self.0.power()
        )
    }
}

/// A broadcast message as produced by `plan`.
#[pyclass(name = "BroadcastMessage", frozen)]
#[derive(Clone)]
struct PyMessage(protocol::BroadcastMessage);

#[pymethods]
impl PyMessage {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(Self)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.0.scheme().as_scheme().as_str()
    }

    #[getter]
    fn threshold_hours(&self) -> f64 {
        self.0.threshold()
    }

    #[getter]
    fn participation(&self) -> f64 {
        self.0.participation()
    }

    /// `(t_tilde, y1, y2)` for coordinated messages, else `None`.
    #[getter]
    fn schedule(&self) -> Option<(f64, f64, f64)> {
        self.0.schedule().map(|s| (s.t_tilde, s.y1, s.y2))
    }

    fn promised_watts(&self, params: &PyParams, n: u64) -> PyResult<f64> {
        protocol::promised_watts(&self.0, &params.0, n).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "BroadcastMessage(kind={}, scheme={}, threshold_hours={}, participation={})",
            self.kind(),
            self.scheme(),
            self.threshold_hours(),
            self.participation()
        )
    }
}

#[pyfunction]
fn steady_state_power(params: &PyParams, n: u64) -> f64 {
    analytics::steady_state_power(&params.0, n)
}

#[pyfunction]
fn survival(params: &PyParams, t: f64) -> PyResult<f64> {
    analytics::survival(&params.0, t).map_err(to_py)
}

#[pyfunction]
fn coord_max_duration(params: &PyParams) -> f64 {
    analytics::coord_max_duration(&params.0)
}

/// Relative flexibility of a scheme for duration `t`.
#[pyfunction]
#[pyo3(signature = (params, t, scheme, kind = "reduce"))]
fn fraction(params: &PyParams, t: f64, scheme: &str, kind: &str) -> PyResult<f64> {
    let eff = parse_kind(kind)?.effective_params(&params.0);
    analytics::scheme_fraction(&eff, t, parse_scheme(scheme)?).map_err(to_py)
}

/// `(fraction, watts)` for `n` appliances.
#[pyfunction]
#[pyo3(signature = (params, n, t, scheme, kind = "reduce"))]
fn quote(params: &PyParams, n: u64, t: f64, scheme: &str, kind: &str) -> PyResult<(f64, f64)> {
    let q = analytics::quote(&params.0, n, t, parse_scheme(scheme)?, parse_kind(kind)?).map_err(to_py)?;
    Ok((q.fraction, q.watts))
}

/// Message serving a request; `amplitude` is watts or `"max"`.
#[pyfunction]
#[pyo3(signature = (params, n, t, amplitude = "max", kind = "reduce", mode = "probabilistic", scheme = "auto"))]
fn plan(
    params: &PyParams,
    n: u64,
    t: f64,
    amplitude: &str,
    kind: &str,
    mode: &str,
    scheme: &str,
) -> PyResult<PyMessage> {
    let amplitude: Amplitude = amplitude.parse().map_err(to_py)?;
    let request = ReductionRequest::new(parse_kind(kind)?, t, amplitude).map_err(to_py)?;
    let mode = match mode {
        "longest" => PlanMode::Longest,
        "probabilistic" => PlanMode::Probabilistic,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let pref = match scheme {
        "auto" => SchemePreference::Auto,
        "indiv" => SchemePreference::Indiv,
        "coord" => SchemePreference::Coord,
        other => return Err(PyValueError::new_err(format!("unknown scheme preference {other:?}"))),
    };
    protocol::plan(&request, &params.0, n, mode, pref)
        .map(PyMessage)
        .map_err(to_py)
}

/// Simulates `n` appliances; returns a dict with the trace breakpoints and
/// run statistics.
#[pyfunction]
#[pyo3(signature = (params, n, horizon, message = None, policy = "normal", sampling = "stratified", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyParams,
    n: u64,
    horizon: f64,
    message: Option<&PyMessage>,
    policy: &str,
    sampling: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let policy = match policy {
        "normal" => Policy::Normal,
        "min_energy" => Policy::MinEnergy,
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    };
    let sampling = match sampling {
        "stratified" => Sampling::Stratified,
        "uniform_random" => Sampling::UniformRandom,
        other => return Err(PyValueError::new_err(format!("unknown sampling {other:?}"))),
    };
    let spec = FleetSpec {
        params: params.0,
        n,
        sampling,
        seed,
    };
    let run = py
        .allow_threads(|| {
            let fleet = sim::build_fleet(&spec)?;
            sim::simulate(&fleet, &params.0, message.map(|m| &m.0), policy, horizon, seed)
        })
        .map_err(to_py)?;
    let (times, watts): (Vec<f64>, Vec<f64>) = run.trace.breakpoints().iter().copied().unzip();
    let out = PyDict::new_bound(py);
    out.set_item("times", times)?;
    out.set_item("watts", watts)?;
    out.set_item("horizon", run.trace.horizon())?;
    out.set_item("acting", run.acting)?;
    out.set_item("noop_forced", run.noop_forced)?;
    out.set_item("temp_violations", run.temp_violations)?;
    out.set_item("max_temp_excursion", run.max_temp_excursion)?;
    Ok(out)
}

/// Runs a JSON scenario and returns its report as a dict.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, scenario_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let scenario = Scenario::from_json(scenario_json).map_err(to_py)?;
    let run = py.allow_threads(|| scenario.run()).map_err(to_py)?;
    let r = &run.report;
    let out = PyDict::new_bound(py);
    out.set_item("window_hours", r.window_hours)?;
    out.set_item("promised_watts", r.promised_watts)?;
    out.set_item("avg_reduction_watts", r.avg_reduction_watts)?;
    out.set_item("sup_deviation_watts", r.sup_deviation_watts)?;
    out.set_item("max_shortfall_watts", r.max_shortfall_watts)?;
    out.set_item("max_excess_watts", r.max_excess_watts)?;
    out.set_item("rebound_peak_watts", r.rebound_peak_watts)?;
    out.set_item("rebound_energy_watt_hours", r.rebound_energy_watt_hours)?;
    out.set_item("temp_violations", r.temp_violations)?;
    out.set_item("over_delivery", r.over_delivery)?;
    out.set_item("acting", run.acting)?;
    Ok(out)
}

#[pymodule]
fn tclflex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyMessage>()?;
    m.add_function(wrap_pyfunction!(steady_state_power, m)?)?;
    m.add_function(wrap_pyfunction!(survival, m)?)?;
    m.add_function(wrap_pyfunction!(coord_max_duration, m)?)?;
    m.add_function(wrap_pyfunction!(fraction, m)?)?;
    m.add_function(wrap_pyfunction!(quote, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
