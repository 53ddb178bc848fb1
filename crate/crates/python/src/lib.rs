//! Python bindings: case loading, scenario sampling, market clearing,
//! design evaluation, sweeps and the LP solver.
//!
//! Structured results (outcomes, sweeps, requirements) come back as plain
//! dicts and lists.

use bml_core::evaluation::{
    self, EvalParams, SweepResult, SweepSettings, UncertaintyModel,
};
use bml_core::lp::{export_mps, LpProblem, LpStatus, Sense, VarId};
use bml_core::markets::Design;
use bml_core::system::{
    apply_reserve_offer_policy, load_system, scale_wind_penetration, two_zone_reduction, Network,
    ReservePolicy,
};
use bml_core::uncertainty::{network_marginals, sample_scenarios, CopulaSpec, ScenarioSet};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Converts any serializable value into Python objects through JSON.
fn to_python<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_design(name: &str) -> PyResult<Design> {
    name.parse().map_err(PyValueError::new_err)
}

fn parse_sense(sense: &str) -> PyResult<Sense> {
    match sense {
        "<=" | "le" => Ok(Sense::Le),
        ">=" | "ge" => Ok(Sense::Ge),
        "=" | "==" | "eq" => Ok(Sense::Eq),
        _ => Err(PyValueError::new_err(format!("unknown constraint sense `{sense}`"))),
    }
}

fn settings(seed: u64, n: usize, rho: f64, xi: f64, samples: usize, ratio: f64, workers: usize) -> SweepSettings {
    SweepSettings {
        seed,
        scenarios: n,
        rho,
        xi,
        requirement_samples: samples,
        area_ratio: ratio,
        workers,
    }
}

/// A validated power system case.
#[pyclass(name = "Network", module = "bml", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// Reads and validates a JSON case file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: load_system(path).map_err(value_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn bus_ids(&self) -> Vec<String> {
        self.inner.buses.iter().map(|b| b.id.clone()).collect()
    }

    #[getter]
    fn area_ids(&self) -> Vec<String> {
        self.inner.areas.iter().map(|a| a.id.clone()).collect()
    }

    #[getter]
    fn unit_ids(&self) -> Vec<String> {
        self.inner.units.iter().map(|u| u.id.clone()).collect()
    }

    #[getter]
    fn wind_capacities(&self) -> Vec<f64> {
        self.inner.wind_farms.iter().map(|w| w.capacity).collect()
    }

    /// `(id, f_max, x)` per line.
    #[getter]
    fn lines(&self) -> Vec<(String, f64, f64)> {
        self.inner
            .lines
            .iter()
            .map(|l| (l.id.clone(), l.f_max, l.x_share))
            .collect()
    }

    #[getter]
    fn total_demand(&self) -> f64 {
        self.inner.total_demand()
    }

    #[getter]
    fn voll(&self) -> f64 {
        self.inner.voll
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn with_x(&self, x: f64) -> PyResult<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(PyValueError::new_err(format!("X {x} outside [0, 1]")));
        }
        Ok(PyNetwork {
            inner: self.inner.with_x(x),
        })
    }

    fn with_dc_capacity(&self, mw: f64) -> PyResult<Self> {
        if !(mw.is_finite() && mw > 0.0) {
            return Err(PyValueError::new_err(format!("capacity {mw} must be positive")));
        }
        Ok(PyNetwork {
            inner: self.inner.with_dc_capacity(mw),
        })
    }

    fn with_voll(&self, voll: f64) -> Self {
        PyNetwork {
            inner: self.inner.with_voll(voll),
        }
    }

    /// Rewrites reserve offers with `"baseline"` or `"penalizing"` terms.
    fn with_policy(&self, policy: &str) -> PyResult<Self> {
        let policy: ReservePolicy = policy.parse().map_err(PyValueError::new_err)?;
        Ok(PyNetwork {
            inner: apply_reserve_offer_policy(&self.inner, policy),
        })
    }

    #[pyo3(signature = (penetration, ratio = 2.0))]
    fn with_penetration(&self, penetration: f64, ratio: f64) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: scale_wind_penetration(&self.inner, penetration, ratio).map_err(value_err)?,
        })
    }

    /// One bus per area, keeping only inter-area lines.
    fn reduced(&self) -> Self {
        PyNetwork {
            inner: two_zone_reduction(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({:?}, buses={}, units={}, wind_farms={}, lines={})",
            self.inner.name,
            self.inner.buses.len(),
            self.inner.units.len(),
            self.inner.wind_farms.len(),
            self.inner.lines.len()
        )
    }
}

/// Equiprobable wind scenarios in MW.
#[pyclass(name = "Scenarios", module = "bml", frozen)]
struct PyScenarios {
    inner: ScenarioSet,
}

#[pymethods]
impl PyScenarios {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn farm_ids(&self) -> Vec<String> {
        self.inner.farm_ids().to_vec()
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.inner.probabilities().to_vec()
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.inner.seed()
    }

    /// One row per scenario, one MW value per farm.
    fn values(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|w| self.inner.realization(w)).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

/// Draws `n` scenarios for the network's wind farms.
#[pyfunction]
#[pyo3(signature = (network, n, seed, rho = 0.35))]
fn generate_scenarios(network: &PyNetwork, n: usize, seed: u64, rho: f64) -> PyResult<PyScenarios> {
    let net = &network.inner;
    let marginals = network_marginals(net).map_err(value_err)?;
    let copula = CopulaSpec::uniform(marginals.len(), rho).map_err(value_err)?;
    let caps: Vec<f64> = net.wind_farms.iter().map(|w| w.capacity).collect();
    let ids = net.wind_farms.iter().map(|w| w.id.clone()).collect();
    let set = sample_scenarios(&marginals, &caps, &copula, n, seed).map_err(value_err)?;
    Ok(PyScenarios {
        inner: set.with_farm_ids(ids),
    })
}

fn prepared(network: &Network, s: &SweepSettings) -> PyResult<(ScenarioSet, EvalParams)> {
    let model = UncertaintyModel::new(network, s).map_err(value_err)?;
    let (scenarios, requirements) = model.at(network).map_err(runtime_err)?;
    Ok((scenarios, EvalParams { requirements }))
}

/// Clears one design and returns the full outcome as a dict.
#[pyfunction]
#[pyo3(signature = (network, design, n = 100, seed = 1, rho = 0.35, xi = 0.99, requirement_samples = 100_000))]
#[allow(clippy::too_many_arguments)]
fn clear<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    design: &str,
    n: usize,
    seed: u64,
    rho: f64,
    xi: f64,
    requirement_samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let design = parse_design(design)?;
    let s = settings(seed, n, rho, xi, requirement_samples, 2.0, 0);
    let (scenarios, params) = prepared(&network.inner, &s)?;
    let outcome = evaluation::run_design(&network.inner, &scenarios, design, &params).map_err(runtime_err)?;
    to_python(py, &outcome)
}

/// Expected cost components of one design.
#[pyfunction]
#[pyo3(signature = (network, design, n = 100, seed = 1, rho = 0.35, xi = 0.99, requirement_samples = 100_000))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    design: &str,
    n: usize,
    seed: u64,
    rho: f64,
    xi: f64,
    requirement_samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let design = parse_design(design)?;
    let s = settings(seed, n, rho, xi, requirement_samples, 2.0, 0);
    let (scenarios, params) = prepared(&network.inner, &s)?;
    let run = evaluation::evaluate_design(&network.inner, &scenarios, design, &params).map_err(runtime_err)?;
    to_python(py, &run)
}

/// System and per-area reserve requirements at reliability `xi`.
#[pyfunction]
#[pyo3(signature = (network, seed = 1, rho = 0.35, xi = 0.99, requirement_samples = 100_000))]
fn requirements<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    seed: u64,
    rho: f64,
    xi: f64,
    requirement_samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = settings(seed, 1, rho, xi, requirement_samples, 2.0, 0);
    let (_, params) = prepared(&network.inner, &s)?;
    to_python(py, &params.requirements)
}

fn sweep_dict<'py>(py: Python<'py>, result: &SweepResult) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, result)
}

/// Expected cost of each design over a penetration grid.
#[pyfunction]
#[pyo3(signature = (network, grid, designs = None, n = 100, seed = 1, rho = 0.35, xi = 0.99, requirement_samples = 100_000, ratio = 2.0, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn sweep_penetration<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    grid: Vec<f64>,
    designs: Option<Vec<String>>,
    n: usize,
    seed: u64,
    rho: f64,
    xi: f64,
    requirement_samples: usize,
    ratio: f64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let designs = match designs {
        Some(names) => names.iter().map(|d| parse_design(d)).collect::<PyResult<Vec<_>>>()?,
        None => Design::ALL.to_vec(),
    };
    let s = settings(seed, n, rho, xi, requirement_samples, ratio, workers);
    let result = py
        .detach(|| evaluation::sweep_penetration(&network.inner, &designs, &grid, &s))
        .map_err(value_err)?;
    sweep_dict(py, &result)
}

/// Sequential-design cost over tie capacity and X, with the least-cost locus.
#[pyfunction]
#[pyo3(signature = (network, x_grid, capacities, penetration = 0.24, n = 100, seed = 1, rho = 0.35, xi = 0.99, requirement_samples = 100_000, ratio = 2.0, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn sweep_x_capacity<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    x_grid: Vec<f64>,
    capacities: Vec<f64>,
    penetration: f64,
    n: usize,
    seed: u64,
    rho: f64,
    xi: f64,
    requirement_samples: usize,
    ratio: f64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = settings(seed, n, rho, xi, requirement_samples, ratio, workers);
    let result = py
        .detach(|| evaluation::sweep_x_capacity(&network.inner, &x_grid, &capacities, penetration, &s))
        .map_err(value_err)?;
    sweep_dict(py, &result)
}

/// A linear program `min c'x` over bounded variables.
#[pyclass(name = "LinearProgram", module = "bml")]
struct PyLinearProgram {
    inner: LpProblem,
}

#[pymethods]
impl PyLinearProgram {
    #[new]
    #[pyo3(signature = (name = "lp"))]
    fn new(name: &str) -> Self {
        PyLinearProgram {
            inner: LpProblem::new(name),
        }
    }

    /// Adds a variable and returns its index. Bounds may be infinite.
    #[pyo3(signature = (lower, upper, cost, name = None))]
    fn add_variable(&mut self, lower: f64, upper: f64, cost: f64, name: Option<String>) -> PyResult<usize> {
        let v = match name {
            Some(n) => self.inner.add_named_variable(n, lower, upper, cost),
            None => self.inner.add_variable(lower, upper, cost),
        };
        Ok(v.map_err(value_err)?.0)
    }

    /// Adds `sum(coef * x[index]) sense rhs` with sense `<=`, `>=` or `=`.
    #[pyo3(signature = (terms, sense, rhs, name = None))]
    fn add_constraint(
        &mut self,
        terms: Vec<(usize, f64)>,
        sense: &str,
        rhs: f64,
        name: Option<String>,
    ) -> PyResult<usize> {
        let sense = parse_sense(sense)?;
        let terms: Vec<(VarId, f64)> = terms.into_iter().map(|(j, a)| (VarId(j), a)).collect();
        let c = match name {
            Some(n) => self.inner.add_named_constraint(n, &terms, sense, rhs),
            None => self.inner.add_constraint(&terms, sense, rhs),
        };
        Ok(c.map_err(value_err)?.0)
    }

    /// Returns `{"status", "objective", "x", "duals"}`; status is
    /// `"optimal"`, `"infeasible"` or `"unbounded"`.
    fn solve<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let sol = self.inner.solve().map_err(runtime_err)?;
        let status = match sol.status {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        #[derive(Serialize)]
        struct Out<'a> {
            status: &'a str,
            objective: f64,
            x: &'a [f64],
            duals: &'a [f64],
        }
        to_python(
            py,
            &Out {
                status,
                objective: sol.objective,
                x: &sol.primal,
                duals: &sol.dual,
            },
        )
    }

    fn write_mps(&self, path: &str) -> PyResult<()> {
        export_mps(&self.inner, path).map_err(runtime_err)
    }

    fn __len__(&self) -> usize {
        self.inner.num_variables()
    }
}

#[pymodule]
fn bml(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyScenarios>()?;
    m.add_class::<PyLinearProgram>()?;
    m.add_function(wrap_pyfunction!(generate_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(clear, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(requirements, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_penetration, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_x_capacity, m)?)?;
    m.add("DESIGNS", Design::ALL.iter().map(|d| d.name()).collect::<Vec<_>>())?;
    Ok(())
}
