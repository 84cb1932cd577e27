//! Python bindings: networks, task sets, graph states, planning, checking
//! and the experiment harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qresource_core::app::ScenarioConfig;
use qresource_core::checker::{network_success, satisfy as core_satisfy};
use qresource_core::graphstate::QubitGraph as CoreGraph;
use qresource_core::harness::{run_scenario_with_threads, summarize, to_csv};
use qresource_core::oracle::{exhaustive_sweep, random_sweep};
use qresource_core::planner::{self, ResourcePlan as CorePlan, Setting};
use qresource_core::taskgen::{self, Task, TaskSet as CoreTaskSet};
use qresource_core::topology::{Coord, GridNetwork as CoreNetwork};
use qresource_core::Error;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Users on a rectangular device grid with a distance threshold `d`.
#[pyclass(module = "qresource", from_py_object)]
#[derive(Clone)]
pub struct GridNetwork {
    inner: CoreNetwork,
}

#[pymethods]
impl GridNetwork {
    #[new]
    #[pyo3(signature = (width, height, users, d, edge_km=200.0))]
    fn new(width: u32, height: u32, users: Vec<(u32, u32)>, d: u32, edge_km: f64) -> PyResult<Self> {
        let users = users.into_iter().map(|(x, y)| Coord::new(x, y)).collect();
        let inner = CoreNetwork::new(width, height, edge_km, users, d).map_err(err)?;
        Ok(Self { inner })
    }

    /// The six-user reference network.
    #[staticmethod]
    #[pyo3(signature = (d=2))]
    fn example(d: u32) -> Self {
        Self {
            inner: CoreNetwork::example(d),
        }
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn threshold(&self) -> u32 {
        self.inner.threshold()
    }

    #[getter]
    fn users(&self) -> Vec<(u32, u32)> {
        self.inner.users().iter().map(|c| (c.x, c.y)).collect()
    }

    fn user_distance(&self, i: usize, j: usize) -> PyResult<u32> {
        self.inner.user_distance(i, j).map_err(err)
    }

    /// Fewest-hop route within the threshold, or `None`.
    #[pyo3(signature = (i, j, seed=0))]
    fn constrained_path(&self, i: usize, j: usize, seed: u64) -> PyResult<Option<Vec<usize>>> {
        self.inner.constrained_path(i, j, &mut rng(seed)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "GridNetwork({}x{}, users={}, d={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.n_users(),
            self.inner.threshold()
        )
    }
}

/// Ordered list of tasks; each task is a list of 0-based user pairs.
#[pyclass(module = "qresource", from_py_object)]
#[derive(Clone)]
pub struct TaskSet {
    inner: CoreTaskSet,
}

#[pymethods]
impl TaskSet {
    #[new]
    fn new(n_users: usize, tasks: Vec<Vec<(usize, usize)>>) -> PyResult<Self> {
        let tasks = tasks
            .into_iter()
            .map(|t| Task::new(t.into_iter().map(|(i, j)| (i.min(j), i.max(j)))))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let inner = CoreTaskSet::new(n_users, tasks).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn example() -> Self {
        Self {
            inner: taskgen::example_task_set(),
        }
    }

    /// Random matchings with Binomial(n_users // 2, p) sizes.
    #[staticmethod]
    #[pyo3(signature = (n_users, n_tasks, p=0.8, seed=0))]
    fn generate(n_users: usize, n_tasks: usize, p: f64, seed: u64) -> PyResult<Self> {
        let inner = taskgen::generate_tasks(n_users, n_tasks, p, &mut rng(seed)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn tasks(&self) -> Vec<Vec<(usize, usize)>> {
        self.inner.tasks().iter().map(|t| t.pairs().collect()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Graph state with qubits owned by users. Rewrites return new graphs.
#[pyclass(module = "qresource", from_py_object)]
#[derive(Clone, Default)]
pub struct QubitGraph {
    inner: CoreGraph,
}

#[pymethods]
impl QubitGraph {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    fn add_qubit(&mut self, owner: usize) -> usize {
        self.inner.add_qubit(owner)
    }

    fn add_edge(&mut self, a: usize, b: usize) -> PyResult<()> {
        self.inner.add_edge(a, b).map_err(err)
    }

    fn local_complement(&self, v: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.local_complement(v).map_err(err)?,
        })
    }

    fn measure_z(&self, v: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.measure_z(v).map_err(err)?,
        })
    }

    fn measure_y(&self, v: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.measure_y(v).map_err(err)?,
        })
    }

    fn measure_x(&self, v: usize, helper: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.measure_x(v, helper).map_err(err)?,
        })
    }

    /// Merges `v` into `u`; returns the new graph and the merged qubit id.
    fn merge(&self, u: usize, v: usize) -> PyResult<(Self, usize)> {
        let (inner, w) = self.inner.merge(u, v).map_err(err)?;
        Ok((Self { inner }, w))
    }

    fn owner(&self, v: usize) -> Option<usize> {
        self.inner.owner(v)
    }

    #[getter]
    fn qubits(&self) -> Vec<usize> {
        self.inner.qubits().collect()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "QubitGraph(qubits={}, edges={})",
            self.inner.len(),
            self.inner.edge_count()
        )
    }
}

/// A resource state plus everything needed to serve its tasks.
#[pyclass(module = "qresource", from_py_object)]
#[derive(Clone)]
pub struct ResourcePlan {
    inner: CorePlan,
}

#[pymethods]
impl ResourcePlan {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[getter]
    fn setting(&self) -> &'static str {
        self.inner.setting.name()
    }

    #[getter]
    fn q_pre(&self) -> usize {
        self.inner.q_pre
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn state(&self) -> QubitGraph {
        QubitGraph {
            inner: self.inner.state.clone(),
        }
    }

    #[getter]
    fn sed_choice(&self) -> Vec<Option<(usize, usize)>> {
        self.inner.sed_choice.clone()
    }

    #[getter]
    fn ec_paths(&self) -> Vec<((usize, usize), Vec<usize>)> {
        self.inner.ec_paths.iter().map(|p| (p.pair, p.path.clone())).collect()
    }

    #[getter]
    fn infeasible_tasks(&self) -> Vec<usize> {
        self.inner.infeasible_tasks.iter().copied().collect()
    }

    /// Copy with the merging algorithm applied.
    fn merged(&self) -> PyResult<Self> {
        Ok(Self {
            inner: planner::merging_algorithm(&self.inner).map_err(err)?,
        })
    }

    /// Per task, the schedule in measurement notation or `None`.
    fn schedules(&self) -> PyResult<Vec<Option<String>>> {
        let report = network_success(&self.inner).map_err(err)?;
        Ok(report
            .schedules
            .iter()
            .map(|s| s.as_ref().map(|s| s.notation(&self.inner.state)))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ResourcePlan({}, Q={} -> {})",
            self.inner.setting,
            self.inner.q_pre,
            self.inner.q()
        )
    }
}

/// Builds a plan for `setting` (BM, SED, EC or SED_EC), merged by default.
#[pyfunction]
#[pyo3(signature = (setting, tasks, network, seed=0, merge=true))]
fn build_plan(setting: &str, tasks: &TaskSet, network: &GridNetwork, seed: u64, merge: bool) -> PyResult<ResourcePlan> {
    let setting: Setting = setting.parse().map_err(err)?;
    let plan = planner::build(setting, &tasks.inner, &network.inner, &mut rng(seed)).map_err(err)?;
    let inner = if merge {
        planner::merging_algorithm(&plan).map_err(err)?
    } else {
        plan
    };
    Ok(ResourcePlan { inner })
}

/// Schedule notation serving `task` from `state`, or `None`.
#[pyfunction]
#[pyo3(signature = (state, task, sed_pair=None))]
fn satisfy(
    state: &QubitGraph,
    task: Vec<(usize, usize)>,
    sed_pair: Option<(usize, usize)>,
) -> PyResult<Option<String>> {
    let task = Task::new(task.into_iter().map(|(i, j)| (i.min(j), i.max(j)))).map_err(err)?;
    let sch = core_satisfy(&state.inner, &task, sed_pair).map_err(err)?;
    Ok(sch.map(|s| s.notation(&state.inner)))
}

/// Oracle check of the rewrite rules; returns the per-rule summary line.
#[pyfunction]
#[pyo3(signature = (max_n=4, random=0, seed=0))]
fn verify_rules(max_n: usize, random: usize, seed: u64) -> PyResult<(bool, String)> {
    let mut report = exhaustive_sweep(max_n).map_err(err)?;
    if random > 0 {
        let extra = random_sweep(random, 6, 8, &mut rng(seed)).map_err(err)?;
        report = report.combine(extra);
    }
    Ok((report.all_passed(), report.summary()))
}

/// Runs the sweep in a scenario JSON document; returns (csv, summary json).
#[pyfunction]
#[pyo3(signature = (config_json, seed=None, threads=0))]
fn simulate(py: Python<'_>, config_json: &str, seed: Option<u64>, threads: usize) -> PyResult<(String, String)> {
    let cfg = ScenarioConfig::from_json(config_json).map_err(err)?;
    let sc = cfg.scenario(seed).map_err(err)?;
    let records = py.detach(|| run_scenario_with_threads(&sc, threads)).map_err(err)?;
    let rows = summarize(&records).map_err(err)?;
    Ok((to_csv(&records), serde_json::to_string(&rows).map_err(json_err)?))
}

#[pymodule]
fn qresource(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GridNetwork>()?;
    m.add_class::<TaskSet>()?;
    m.add_class::<QubitGraph>()?;
    m.add_class::<ResourcePlan>()?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(satisfy, m)?)?;
    m.add_function(wrap_pyfunction!(verify_rules, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("CSV_HEADER", qresource_core::harness::CSV_HEADER)?;
    Ok(())
}
