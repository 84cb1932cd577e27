//! Resource-state builders for the four settings and the qubit-merging
//! post-optimization.
//!
//! * `BM`: one EPR pair per entry of the union matrix of the tasks.
//! * `SED`: the satellite serves the longest pair of every task; the rest is
//!   built as in `BM`.
//! * `EC`: pairs longer than the threshold are replaced, in every task, by a
//!   route through intermediate users.
//! * `SED_EC`: satellite removal first, then routing of what is left.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstate::{QubitGraph, QubitId};
use crate::multigraph::{
    adjacency_matrix, pair, restricted_simultaneous, simultaneous_adjacency, union_adjacency, AdjMatrix, UserGraph,
    UserPair,
};
use crate::taskgen::{Task, TaskSet};
use crate::topology::GridNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "BM")]
    Bm,
    #[serde(rename = "SED")]
    Sed,
    #[serde(rename = "EC")]
    Ec,
    #[serde(rename = "SED_EC")]
    SedEc,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::Bm, Setting::Sed, Setting::Ec, Setting::SedEc];

    pub fn uses_sed(self) -> bool {
        matches!(self, Setting::Sed | Setting::SedEc)
    }

    pub fn uses_ec(self) -> bool {
        matches!(self, Setting::Ec | Setting::SedEc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::Bm => "BM",
            Setting::Sed => "SED",
            Setting::Ec => "EC",
            Setting::SedEc => "SED_EC",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['-', '+'], "_").as_str() {
            "BM" => Ok(Setting::Bm),
            "SED" => Ok(Setting::Sed),
            "EC" => Ok(Setting::Ec),
            "SED_EC" | "SEDEC" => Ok(Setting::SedEc),
            _ => Err(Error::Config(format!("unknown setting '{s}'"))),
        }
    }
}

/// Route chosen for a user pair that exceeds the distance threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcPath {
    pub pair: UserPair,
    pub path: Vec<usize>,
}

/// Which merging criterion licensed a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "simultaneous")]
    Simultaneous,
    #[serde(rename = "restricted")]
    Restricted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStep {
    pub user: usize,
    pub kept: QubitId,
    pub removed: QubitId,
    pub criterion: Criterion,
}

/// A resource state together with everything needed to serve and replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePlan {
    pub setting: Setting,
    /// Distance threshold applied by the EC settings.
    pub threshold: Option<u32>,
    pub tasks: TaskSet,
    pub state: QubitGraph,
    /// Satellite pair per task (`None` for empty tasks and non-SED settings).
    pub sed_choice: Vec<Option<UserPair>>,
    pub ec_paths: Vec<EcPath>,
    /// Per task, the user multigraph the stored state must serve. Infeasible
    /// tasks are kept as empty graphs so indices line up with `tasks`.
    pub transformed_tasks: Vec<UserGraph>,
    pub infeasible_tasks: BTreeSet<usize>,
    /// Qubit count before merging.
    pub q_pre: usize,
    pub merges: Vec<MergeStep>,
}

impl ResourcePlan {
    pub fn q(&self) -> usize {
        q_count(&self.state)
    }

    pub fn is_feasible(&self) -> bool {
        self.infeasible_tasks.is_empty()
    }

    /// Total number of intermediate users over all routed pairs.
    pub fn intermediate_slots(&self) -> usize {
        self.ec_paths.iter().map(|p| p.path.len().saturating_sub(2)).sum()
    }
}

/// Number of qubits stored in the resource state.
pub fn q_count(state: &QubitGraph) -> usize {
    state.len()
}

/// Realizes a union matrix: `m` disjoint two-qubit edges per entry `m`.
fn realize(u: &AdjMatrix) -> QubitGraph {
    let mut g = QubitGraph::new();
    for ((i, j), m) in u.nonzero_upper() {
        for _ in 0..m {
            let a = g.add_qubit(i);
            let b = g.add_qubit(j);
            g.add_edge(a, b).expect("fresh qubits");
        }
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn finish(
    setting: Setting,
    threshold: Option<u32>,
    ts: &TaskSet,
    sed_choice: Vec<Option<UserPair>>,
    ec_paths: Vec<EcPath>,
    transformed_tasks: Vec<UserGraph>,
    infeasible_tasks: BTreeSet<usize>,
    stored: Option<AdjMatrix>,
) -> Result<ResourcePlan> {
    let u = match stored {
        Some(u) => u,
        None => union_adjacency(ts.n_users(), &transformed_tasks)?,
    };
    let state = realize(&u);
    Ok(ResourcePlan {
        setting,
        threshold,
        tasks: ts.clone(),
        q_pre: state.len(),
        state,
        sed_choice,
        ec_paths,
        transformed_tasks,
        infeasible_tasks,
        merges: Vec::new(),
    })
}

fn check_network(ts: &TaskSet, net: &GridNetwork) -> Result<()> {
    if ts.n_users() != net.n_users() {
        return Err(Error::DimensionMismatch {
            expected: net.n_users(),
            found: ts.n_users(),
        });
    }
    Ok(())
}

/// Benchmark state: every pair requested by any task is stored directly.
pub fn build_bm(ts: &TaskSet) -> Result<ResourcePlan> {
    finish(
        Setting::Bm,
        None,
        ts,
        vec![None; ts.len()],
        Vec::new(),
        ts.to_user_graphs(),
        BTreeSet::new(),
        None,
    )
}

/// Picks one longest pair per task; ties are broken uniformly by `rng`.
fn satellite_choice<R: Rng + ?Sized>(task: &Task, net: &GridNetwork, rng: &mut R) -> Result<Option<UserPair>> {
    let mut best: Vec<UserPair> = Vec::new();
    let mut best_len = 0;
    for (i, j) in task.pairs() {
        let len = net.user_distance(i, j)?;
        if best.is_empty() || len > best_len {
            best.clear();
            best_len = len;
            best.push((i, j));
        } else if len == best_len {
            best.push((i, j));
        }
    }
    Ok(match best.len() {
        0 => None,
        1 => Some(best[0]),
        n => Some(best[rng.random_range(0..n)]),
    })
}

fn sed_reduce<R: Rng + ?Sized>(
    ts: &TaskSet,
    net: &GridNetwork,
    rng: &mut R,
) -> Result<(Vec<Option<UserPair>>, Vec<UserGraph>)> {
    let mut choices = Vec::with_capacity(ts.len());
    let mut reduced = ts.to_user_graphs();
    for (task, g) in ts.tasks().iter().zip(reduced.iter_mut()) {
        let choice = satellite_choice(task, net, rng)?;
        if let Some((i, j)) = choice {
            g.remove_edge(i, j);
        }
        choices.push(choice);
    }
    Ok((choices, reduced))
}

/// Satellite-aided state: the longest pair of each task is left to the
/// satellite and the remaining pairs are stored as in the benchmark.
pub fn build_sed<R: Rng + ?Sized>(ts: &TaskSet, net: &GridNetwork, rng: &mut R) -> Result<ResourcePlan> {
    check_network(ts, net)?;
    let (choices, reduced) = sed_reduce(ts, net, rng)?;
    finish(
        Setting::Sed,
        None,
        ts,
        choices,
        Vec::new(),
        reduced,
        BTreeSet::new(),
        None,
    )
}

/// Output of routing a task set under the distance threshold.
struct EcTransform {
    tasks: Vec<UserGraph>,
    paths: Vec<EcPath>,
    infeasible: BTreeSet<usize>,
    /// The union of the feasible tasks with every routed pair subdivided
    /// along its route. Routes do not share edges with each other or with
    /// direct pairs.
    stored: AdjMatrix,
}

/// Replaces every over-threshold pair by a constrained route.
fn ec_transform<R: Rng + ?Sized>(graphs: &[UserGraph], net: &GridNetwork, rng: &mut R) -> Result<EcTransform> {
    let n = net.n_users();
    let u = union_adjacency(n, graphs)?;
    let mut paths = Vec::new();
    let mut unroutable = BTreeSet::new();
    for ((i, j), _) in u.nonzero_upper() {
        if net.edge_allowed(i, j)? {
            continue;
        }
        match net.constrained_path(i, j, rng)? {
            Some(path) => paths.push(EcPath { pair: (i, j), path }),
            None => {
                unroutable.insert((i, j));
            }
        }
    }

    let mut transformed = Vec::with_capacity(graphs.len());
    let mut infeasible = BTreeSet::new();
    for (k, g) in graphs.iter().enumerate() {
        if g.edges().any(|(p, _)| unroutable.contains(&p)) {
            infeasible.insert(k);
            transformed.push(UserGraph::new(n));
            continue;
        }
        let mut out = UserGraph::new(n);
        for (p, m) in g.edges() {
            match paths.iter().find(|e| e.pair == p) {
                Some(route) => {
                    for hop in route.path.windows(2) {
                        out.add_edge_with(hop[0], hop[1], m)?;
                    }
                }
                None => out.add_edge_with(p.0, p.1, m)?,
            }
        }
        transformed.push(out);
    }

    let feasible: Vec<UserGraph> = graphs
        .iter()
        .enumerate()
        .filter(|(k, _)| !infeasible.contains(k))
        .map(|(_, g)| g.clone())
        .collect();
    let mut stored = UserGraph::new(n);
    for ((i, j), m) in union_adjacency(n, &feasible)?.nonzero_upper() {
        let m = u32::try_from(m).map_err(|_| Error::Overflow)?;
        match paths.iter().find(|e| e.pair == (i, j)) {
            Some(route) => {
                for hop in route.path.windows(2) {
                    stored.add_edge_with(hop[0], hop[1], m)?;
                }
            }
            None => stored.add_edge_with(i, j, m)?,
        }
    }
    Ok(EcTransform {
        tasks: transformed,
        paths,
        infeasible,
        stored: adjacency_matrix(&stored),
    })
}

/// Entanglement-constrained state: long pairs are routed through users so
/// that no stored edge exceeds the threshold. Tasks with an unroutable pair
/// are recorded as infeasible.
pub fn build_ec<R: Rng + ?Sized>(ts: &TaskSet, net: &GridNetwork, rng: &mut R) -> Result<ResourcePlan> {
    check_network(ts, net)?;
    let ec = ec_transform(&ts.to_user_graphs(), net, rng)?;
    finish(
        Setting::Ec,
        Some(net.threshold()),
        ts,
        vec![None; ts.len()],
        ec.paths,
        ec.tasks,
        ec.infeasible,
        Some(ec.stored),
    )
}

/// Satellite removal followed by constrained routing of the remainder.
pub fn build_sed_ec<R: Rng + ?Sized>(ts: &TaskSet, net: &GridNetwork, rng: &mut R) -> Result<ResourcePlan> {
    check_network(ts, net)?;
    let (choices, reduced) = sed_reduce(ts, net, rng)?;
    let ec = ec_transform(&reduced, net, rng)?;
    finish(
        Setting::SedEc,
        Some(net.threshold()),
        ts,
        choices,
        ec.paths,
        ec.tasks,
        ec.infeasible,
        Some(ec.stored),
    )
}

pub fn build<R: Rng + ?Sized>(setting: Setting, ts: &TaskSet, net: &GridNetwork, rng: &mut R) -> Result<ResourcePlan> {
    match setting {
        Setting::Bm => {
            check_network(ts, net)?;
            build_bm(ts)
        }
        Setting::Sed => build_sed(ts, net, rng),
        Setting::Ec => build_ec(ts, net, rng),
        Setting::SedEc => build_sed_ec(ts, net, rng),
    }
}

/// User pairs of the edges incident to `qubits`.
fn incident_pairs(state: &QubitGraph, qubits: &[QubitId]) -> BTreeSet<UserPair> {
    let mut out = BTreeSet::new();
    for &q in qubits {
        let owner = state.owner(q).expect("qubit in state");
        for &x in state.neighbors(q).expect("qubit in state") {
            out.insert(pair(owner, state.owner(x).expect("neighbour in state")));
        }
    }
    out
}

fn merge_criterion(
    state: &QubitGraph,
    a: QubitId,
    b: QubitId,
    n_users: usize,
    graphs: &[UserGraph],
    simultaneous: &AdjMatrix,
) -> Result<Option<Criterion>> {
    let na = state.neighbors(a).expect("qubit in state");
    let nb = state.neighbors(b).expect("qubit in state");
    // A shared neighbour would lose its edge to the merged qubit.
    if na.intersection(nb).next().is_some() {
        return Ok(None);
    }
    let incident = incident_pairs(state, &[a, b]);
    if incident.iter().all(|&(i, j)| simultaneous.get(i, j) == 1) {
        return Ok(Some(Criterion::Simultaneous));
    }
    let around: Vec<QubitId> = na.union(nb).copied().collect();
    let window = incident_pairs(state, &around);
    let reduced = restricted_simultaneous(n_users, graphs, &window)?;
    if incident.iter().all(|&(i, j)| reduced.get(i, j) == 1) {
        return Ok(Some(Criterion::Restricted));
    }
    Ok(None)
}

/// Merges pairs of qubits held by the same user while the simultaneous
/// matrix of the plan's transformed tasks (or its neighbourhood-restricted
/// variant) shows unit entries on every incident edge.
///
/// Scan order: users ascending, qubit pairs lexicographic; the scan restarts
/// after every merge and stops after a full pass without one.
pub fn merging_algorithm(plan: &ResourcePlan) -> Result<ResourcePlan> {
    let n_users = plan.tasks.n_users();
    let graphs = &plan.transformed_tasks;
    let simultaneous = simultaneous_adjacency(n_users, graphs)?;
    let mut state = plan.state.clone();
    let mut merges = plan.merges.clone();

    'restart: loop {
        for user in state.users() {
            let qubits = state.qubits_of(user);
            for (k, &a) in qubits.iter().enumerate() {
                for &b in &qubits[k + 1..] {
                    if let Some(criterion) = merge_criterion(&state, a, b, n_users, graphs, &simultaneous)? {
                        state.merge_mut(a, b)?;
                        merges.push(MergeStep {
                            user,
                            kept: a,
                            removed: b,
                            criterion,
                        });
                        continue 'restart;
                    }
                }
            }
        }
        break;
    }

    Ok(ResourcePlan {
        state,
        merges,
        ..plan.clone()
    })
}
