//! Python bindings: catalogs, plans, the rule-based recommender, greedy
//! enumeration over the synthetic oracle, prompts, response parsing and
//! simulated validation.

use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use idxtune::advisor::parse_response as core_parse_response;
use idxtune::catalog::{load_catalog, Catalog, IndexDefinition};
use idxtune::cost_oracle::SyntheticWorkloadSpec;
use idxtune::enumerator::{greedy_select as core_greedy, CandidatePool, Configuration, GreedyOptions};
use idxtune::plan::{parse_plan, render_json, render_plan_table, total_cost, PlanTree};
use idxtune::prompt::{build_multi_query_prompt, build_single_query_prompt, PromptTemplates};
use idxtune::rule_tuner::{simple_index_recommendation, TunerParams};
use idxtune::validator::{
    breakdown_report, validate_configurations as core_validate, EventLog, NamedConfiguration,
    SimulatedExecutor, ValidationReport,
};

fn err(e: idxtune::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "IndexDefinition", module = "idxtune_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyIndex {
    inner: IndexDefinition,
}

#[pymethods]
impl PyIndex {
    #[new]
    #[pyo3(signature = (table, key_columns, included_columns = Vec::new(), name = None))]
    fn new(table: &str, key_columns: Vec<String>, included_columns: Vec<String>, name: Option<String>) -> Self {
        let mut inner = IndexDefinition::new(table, key_columns, included_columns);
        if let Some(name) = name {
            inner.name = name;
        }
        PyIndex { inner }
    }

    #[getter]
    fn table(&self) -> String {
        self.inner.table.to_string()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn key_columns(&self) -> Vec<String> {
        self.inner.key_columns.iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn included_columns(&self) -> Vec<String> {
        self.inner.included_columns.iter().map(ToString::to_string).collect()
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn to_ddl(&self) -> String {
        self.inner.to_ddl()
    }

    fn same_structure(&self, other: PyRef<'_, PyIndex>) -> bool {
        self.inner.same_structure(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "IndexDefinition({:?}, {:?}, {:?}, name={:?})",
            self.table(),
            self.key_columns(),
            self.included_columns(),
            self.inner.name
        )
    }
}

fn wrap(indexes: Vec<IndexDefinition>) -> Vec<PyIndex> {
    indexes.into_iter().map(|inner| PyIndex { inner }).collect()
}

fn unwrap(indexes: &[PyRef<'_, PyIndex>]) -> Vec<IndexDefinition> {
    indexes.iter().map(|i| i.inner.clone()).collect()
}

#[pyclass(name = "Catalog", module = "idxtune_py", frozen)]
pub struct PyCatalog {
    inner: Catalog,
}

#[pymethods]
impl PyCatalog {
    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        load_catalog(document).map(|inner| PyCatalog { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn tables(&self) -> Vec<String> {
        self.inner.tables.iter().map(|t| t.name.to_string()).collect()
    }

    fn row_count(&self, table: &str) -> PyResult<u64> {
        self.inner
            .table(table)
            .map(|t| t.row_count)
            .ok_or_else(|| PyValueError::new_err(format!("unknown table `{table}`")))
    }

    /// Reasons the index cannot be built; empty when it is valid.
    fn validate_index(&self, index: PyRef<'_, PyIndex>) -> Vec<String> {
        self.inner
            .validate_index(&index.inner)
            .iter()
            .map(ToString::to_string)
            .collect()
    }
}

#[pyclass(name = "PlanTree", module = "idxtune_py", frozen)]
pub struct PyPlan {
    inner: PlanTree,
}

#[pymethods]
impl PyPlan {
    #[staticmethod]
    fn from_json(document: &str, catalog: PyRef<'_, PyCatalog>) -> PyResult<Self> {
        parse_plan(document, &catalog.inner).map(|inner| PyPlan { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        render_json(&self.inner)
    }

    #[getter]
    fn query_id(&self) -> String {
        self.inner.query_id.clone()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        total_cost(&self.inner)
    }

    fn render_table(&self) -> String {
        render_plan_table(&self.inner)
    }
}

#[pyclass(name = "SyntheticWorkload", module = "idxtune_py", frozen)]
pub struct PyWorkload {
    inner: SyntheticWorkloadSpec,
}

#[pymethods]
impl PyWorkload {
    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        SyntheticWorkloadSpec::from_json(document)
            .map(|inner| PyWorkload { inner })
            .map_err(err)
    }

    #[getter]
    fn query_ids(&self) -> Vec<String> {
        self.inner.queries.iter().map(|q| q.id.clone()).collect()
    }

    fn estimated_cost(&self, indexes: Vec<PyRef<'_, PyIndex>>, query_id: &str) -> PyResult<f64> {
        self.inner.estimated_cost(&unwrap(&indexes), query_id).map_err(err)
    }

    /// Simulated execution time in milliseconds.
    fn true_time(&self, indexes: Vec<PyRef<'_, PyIndex>>, query_id: &str) -> PyResult<f64> {
        self.inner.true_time(&unwrap(&indexes), query_id).map_err(err)
    }
}

#[pyclass(name = "Configuration", module = "idxtune_py", frozen)]
pub struct PyConfiguration {
    inner: Configuration,
}

#[pymethods]
impl PyConfiguration {
    #[new]
    fn new(k: usize, indexes: Vec<PyRef<'_, PyIndex>>) -> PyResult<Self> {
        Configuration::new(k, unwrap(&indexes))
            .map(|inner| PyConfiguration { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        Configuration::from_json(document)
            .map(|inner| PyConfiguration { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.constraint_k
    }

    #[getter]
    fn indexes(&self) -> Vec<PyIndex> {
        wrap(self.inner.indexes.clone())
    }

    #[getter]
    fn estimated_workload_cost(&self) -> Option<f64> {
        self.inner.estimated_workload_cost
    }
}

#[pyclass(name = "ValidationReport", module = "idxtune_py", frozen)]
pub struct PyReport {
    inner: ValidationReport,
    events: String,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn winner(&self) -> Option<String> {
        self.inner.winner.clone()
    }

    #[getter]
    fn distinct_indexes(&self) -> usize {
        self.inner.distinct_indexes
    }

    /// Per-configuration (id, cap seconds, total seconds).
    fn totals(&self) -> Vec<(String, f64, f64)> {
        self.inner
            .configs
            .iter()
            .map(|c| (c.id.clone(), c.cap.as_secs_f64(), c.total.as_secs_f64()))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn events_jsonl(&self) -> String {
        self.events.clone()
    }

    fn breakdown_text(&self) -> String {
        breakdown_report(&self.inner.breakdown).to_text()
    }
}

/// Rule-based covering-index recommendations for one plan.
#[pyfunction]
#[pyo3(signature = (plan, alpha = 0.0))]
fn recommend(plan: PyRef<'_, PyPlan>, alpha: f64) -> PyResult<Vec<PyIndex>> {
    let params = TunerParams::new(alpha).map_err(err)?;
    simple_index_recommendation(&plan.inner, params)
        .map(wrap)
        .map_err(err)
}

/// Two-phase greedy selection of at most `k` indexes from `pool`.
#[pyfunction]
#[pyo3(signature = (pool, workload, k, oracle, full_pool_phase2 = false))]
fn greedy_select(
    pool: Vec<PyRef<'_, PyIndex>>,
    workload: Vec<String>,
    k: usize,
    oracle: PyRef<'_, PyWorkload>,
    full_pool_phase2: bool,
) -> PyResult<PyConfiguration> {
    let pool = CandidatePool::from_source("python", unwrap(&pool));
    core_greedy(&pool, &workload, k, &oracle.inner, GreedyOptions { full_pool_phase2 })
        .map(|inner| PyConfiguration { inner })
        .map_err(err)
}

#[pyfunction]
fn single_query_prompt(sql: &str, catalog: PyRef<'_, PyCatalog>, plan: PyRef<'_, PyPlan>) -> PyResult<String> {
    build_single_query_prompt(&PromptTemplates::default(), sql, &catalog.inner, &plan.inner)
        .map(|b| b.text)
        .map_err(err)
}

#[pyfunction]
fn multi_query_prompt(
    queries: Vec<(String, PyRef<'_, PyPlan>)>,
    catalog: PyRef<'_, PyCatalog>,
    k: usize,
) -> PyResult<String> {
    let queries: Vec<(String, PlanTree)> = queries
        .into_iter()
        .map(|(sql, plan)| (sql, plan.inner.clone()))
        .collect();
    build_multi_query_prompt(&PromptTemplates::default(), &queries, &catalog.inner, k)
        .map(|b| b.text)
        .map_err(err)
}

/// Valid indexes from an advisor reply, plus the rejected entries as JSON strings.
#[pyfunction]
fn parse_response(raw: &str, catalog: PyRef<'_, PyCatalog>) -> PyResult<(Vec<PyIndex>, Vec<String>)> {
    let parsed = core_parse_response(raw, &catalog.inner).map_err(err)?;
    let dropped = parsed
        .dropped
        .iter()
        .map(|d| format!("{} ({})", d.entry, d.reasons.join("; ")))
        .collect();
    Ok((wrap(parsed.indexes), dropped))
}

/// Validates named configurations in order against the simulator.
#[pyfunction]
#[pyo3(signature = (configs, oracle, cap_secs = 300.0))]
fn validate_configurations(
    configs: Vec<(String, PyRef<'_, PyConfiguration>)>,
    oracle: PyRef<'_, PyWorkload>,
    cap_secs: f64,
) -> PyResult<PyReport> {
    if !(cap_secs.is_finite() && cap_secs > 0.0) {
        return Err(PyValueError::new_err("cap_secs must be positive"));
    }
    let configs: Vec<NamedConfiguration> = configs
        .into_iter()
        .map(|(id, c)| NamedConfiguration {
            id,
            config: c.inner.clone(),
        })
        .collect();
    let workload: Vec<String> = oracle.inner.queries.iter().map(|q| q.id.clone()).collect();
    let mut executor = SimulatedExecutor::new(&oracle.inner);
    let mut log = EventLog::default();
    let report = core_validate(
        &configs,
        &workload,
        &mut executor,
        Duration::from_secs_f64(cap_secs),
        &mut log,
    )
    .map_err(err)?;
    Ok(PyReport {
        inner: report,
        events: log.to_jsonl(),
    })
}

#[pymodule]
fn idxtune_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIndex>()?;
    m.add_class::<PyCatalog>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyWorkload>()?;
    m.add_class::<PyConfiguration>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_select, m)?)?;
    m.add_function(wrap_pyfunction!(single_query_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(multi_query_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(validate_configurations, m)?)?;
    Ok(())
}
