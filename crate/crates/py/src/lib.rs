//! Python bindings: `import pyhytask`.

use std::collections::BTreeMap;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use hytask::adapt::{simulate as run_scenario, AdaptOptions, Scenario};
use hytask::planner::{plan_mission, validate_plan, Plan, PlannerConfig};
use hytask::synthesis::{exhaustive_synthesize, plan_hash, synthesize as run_ga, GaConfig, ParetoArchive};
use hytask::uncertainty::{build_parametric_model, evaluate, export_model_source, export_properties, ParametricPlanModel};
use hytask::ProblemSpec;

create_exception!(pyhytask, HytaskError, PyException, "Raised by every failing hytask call; the message starts with the error kind.");

fn err(e: impl Into<hytask::Error>) -> PyErr {
    let e = e.into();
    HytaskError::new_err(format!("{}: {}", e.kind(), e))
}

fn json_to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| HytaskError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A mission: map, tasks, agents and constraints.
#[pyclass(name = "Spec", frozen)]
struct PySpec {
    inner: ProblemSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySpec { inner: hytask::parse_problem_spec(text).map_err(err)? })
    }

    /// The nine-cell vineyard mission.
    #[staticmethod]
    fn vineyard() -> Self {
        PySpec { inner: hytask::fixtures::vineyard() }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn agents(&self) -> Vec<String> {
        self.inner.agents().iter().map(|a| a.id.clone()).collect()
    }

    #[getter]
    fn tasks(&self) -> Vec<String> {
        self.inner.tasks().iter().map(|t| t.id.clone()).collect()
    }

    #[getter]
    fn locations(&self) -> Vec<String> {
        self.inner.locations().iter().map(|l| l.id.clone()).collect()
    }

    /// Warnings (errors are raised at construction).
    fn warnings(&self) -> Vec<String> {
        self.inner.validate().iter().map(ToString::to_string).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec(agents={}, tasks={}, locations={})",
            self.inner.agents().len(),
            self.inner.tasks().len(),
            self.inner.locations().len()
        )
    }
}

#[pyclass(name = "Plan", frozen)]
struct PyPlan {
    spec: ProblemSpec,
    inner: Plan,
}

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn from_json(spec: &PySpec, text: &str) -> PyResult<Self> {
        let inner = Plan::from_json(&spec.inner, text).map_err(err)?;
        Ok(PyPlan { spec: spec.inner.clone(), inner })
    }

    /// The hand-written optimal vineyard plan.
    #[staticmethod]
    fn vineyard_reference() -> Self {
        let spec = hytask::fixtures::vineyard();
        let inner = hytask::planner::vineyard_reference_plan(&spec);
        PyPlan { spec, inner }
    }

    #[getter]
    fn travel_cost(&self) -> f64 {
        self.inner.travel_cost
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.total_order.iter().map(|a| a.display(&self.spec).to_string()).collect()
    }

    #[getter]
    fn hash(&self) -> String {
        plan_hash(&self.spec, &self.inner)
    }

    /// Constraint violations; empty for a valid plan.
    fn violations(&self) -> Vec<String> {
        validate_plan(&self.spec, &self.inner).iter().map(|v| format!("{v:?}")).collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json(&self.spec)
    }

    fn __len__(&self) -> usize {
        self.inner.total_order.len()
    }
}

/// Parametric model of a plan: one chain per agent, one retry slot per task.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ParametricPlanModel,
    hash: String,
}

#[pymethods]
impl PyModel {
    /// (task id, lowest budget, highest budget) per slot.
    #[getter]
    fn slots(&self) -> Vec<(String, u32, u32)> {
        self.inner.slots.iter().map(|s| (s.task_id.clone(), s.lo, s.hi)).collect()
    }

    #[getter]
    fn space_size(&self) -> u128 {
        self.inner.space_size()
    }

    #[getter]
    fn p_succ(&self) -> f64 {
        self.inner.p_succ
    }

    /// (expected cost, success probability) under the given budgets; tasks
    /// left out get their lowest budget.
    fn evaluate(&self, retries: BTreeMap<String, u32>) -> PyResult<(f64, f64)> {
        let a = self.inner.from_dict(&retries, Some(0)).map_err(err)?;
        let m = evaluate(&self.inner, &a).map_err(err)?;
        Ok((m.expected_cost, m.success_prob))
    }

    /// Guarded-command source, parametric unless budgets are given.
    #[pyo3(signature = (retries=None))]
    fn export_prism(&self, retries: Option<BTreeMap<String, u32>>) -> PyResult<String> {
        let a = retries.map(|r| self.inner.from_dict(&r, Some(0))).transpose().map_err(err)?;
        export_model_source(&self.inner, a.as_ref()).map_err(err)
    }

    fn export_properties(&self) -> String {
        export_properties(&self.inner)
    }
}

/// Feasible non-dominated retry assignments of one plan.
#[pyclass(name = "Archive", frozen)]
struct PyArchive {
    inner: ParetoArchive,
}

#[pymethods]
impl PyArchive {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyArchive { inner: ParetoArchive::from_json(text).map_err(err)? })
    }

    /// (expected cost, success probability) points, cheapest first.
    #[getter]
    fn front(&self) -> Vec<(f64, f64)> {
        self.inner.front.clone()
    }

    #[getter]
    fn entries(&self) -> Vec<BTreeMap<String, u32>> {
        self.inner.entries.iter().map(|e| e.retries.clone()).collect()
    }

    #[getter]
    fn evaluations(&self) -> usize {
        self.inner.evaluations
    }

    #[getter]
    fn plan_hash(&self) -> String {
        self.inner.plan_hash.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }
}

fn planner_config(strategy: &str, timeout: f64) -> PyResult<PlannerConfig> {
    let base = match strategy {
        "astar" => PlannerConfig::default(),
        "gbfs" => PlannerConfig::gbfs(),
        other => return Err(HytaskError::new_err(format!("usage: unknown strategy '{other}'"))),
    };
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(HytaskError::new_err("usage: timeout must be positive"));
    }
    Ok(PlannerConfig { timeout: Duration::from_secs_f64(timeout), ..base })
}

/// Allocates and orders the mission's tasks.
#[pyfunction]
#[pyo3(signature = (spec, strategy="astar", timeout=60.0))]
fn plan(py: Python<'_>, spec: &PySpec, strategy: &str, timeout: f64) -> PyResult<PyPlan> {
    let cfg = planner_config(strategy, timeout)?;
    let s = spec.inner.clone();
    let (inner, _) = py.detach(|| plan_mission(&s, &cfg)).map_err(err)?;
    Ok(PyPlan { spec: s, inner })
}

#[pyfunction]
fn build_model(spec: &PySpec, plan: &PyPlan) -> PyResult<PyModel> {
    let inner = build_parametric_model(&spec.inner, &plan.inner).map_err(err)?;
    Ok(PyModel { inner, hash: plan_hash(&spec.inner, &plan.inner) })
}

/// Evolutionary search over retry budgets.
#[pyfunction]
#[pyo3(signature = (model, seed=42, population=30, evaluations=150, jobs=None))]
fn synthesize(
    py: Python<'_>,
    model: &PyModel,
    seed: u64,
    population: usize,
    evaluations: usize,
    jobs: Option<usize>,
) -> PyResult<PyArchive> {
    let cfg = GaConfig { seed, population, evaluations, jobs, ..Default::default() };
    let (inner, _) = py.detach(|| run_ga(&model.inner, &cfg, model.hash.clone())).map_err(err)?;
    Ok(PyArchive { inner })
}

/// Evaluates every assignment; refuses spaces larger than `limit`.
#[pyfunction]
#[pyo3(signature = (model, limit=1_000_000))]
fn synthesize_exhaustive(py: Python<'_>, model: &PyModel, limit: u128) -> PyResult<PyArchive> {
    let (inner, _) = py.detach(|| exhaustive_synthesize(&model.inner, limit, model.hash.clone())).map_err(err)?;
    Ok(PyArchive { inner })
}

/// Runs a scenario (JSON text) and returns the trace as a dict with
/// `status`, `total_cost`, `levels` and `records`.
#[pyfunction]
#[pyo3(signature = (spec, plan, archive, scenario, seed=0))]
fn simulate<'py>(
    py: Python<'py>,
    spec: &PySpec,
    plan: &PyPlan,
    archive: &PyArchive,
    scenario: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sc = Scenario::from_json(scenario).map_err(err)?;
    let trace = py
        .detach(|| run_scenario(&spec.inner, &plan.inner, &archive.inner, &sc, seed, AdaptOptions::default()))
        .map_err(err)?;
    let levels: Vec<(usize, hytask::adapt::Level)> = trace.levels();
    let doc = serde_json::json!({
        "status": trace.status,
        "total_cost": trace.total_cost,
        "levels": levels,
        "records": trace.records,
    });
    json_to_py(py, &doc)
}

/// Monolithic MDP of the mission: sizes, Pmax of success and bounded
/// minimum cost.
#[pyfunction]
#[pyo3(signature = (spec, max_states=1_000_000, horizon=20))]
fn baseline<'py>(py: Python<'py>, spec: &PySpec, max_states: usize, horizon: usize) -> PyResult<Bound<'py, PyAny>> {
    let s = spec.inner.clone();
    let report = py
        .detach(|| {
            let full = hytask::baseline::build_full_mdp(&s, max_states)?;
            hytask::baseline::analyse(&full, horizon)
        })
        .map_err(err)?;
    json_to_py(py, &report)
}

#[pymodule]
fn pyhytask(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HytaskError", m.py().get_type::<HytaskError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyArchive>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(build_model, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    Ok(())
}
