//! Serving tasks from a stored resource state.
//!
//! A task is served when every requested pair (except the one the satellite
//! supplies) can be given its own qubit path, the paths are pairwise
//! non-adjacent induced paths, and the rest of the touched components is
//! measured away. A path may step between two qubits of the same
//! intermediate user. Each path is then shortened by merging consecutive
//! intermediates held by one user (as at a repeater) and X-measuring what
//! remains. This is a sufficient test: a `None` answer does not prove that
//! no LOCC protocol exists. Every returned schedule has been replayed and
//! checked.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstate::{QubitGraph, QubitId};
use crate::multigraph::{pair, UserPair};
use crate::planner::ResourcePlan;
use crate::taskgen::Task;

/// Upper bound on search steps per task before giving up.
pub const SEARCH_STEP_LIMIT: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Op {
    #[serde(rename = "Z")]
    MeasureZ { qubit: QubitId },
    #[serde(rename = "merge")]
    Merge { kept: QubitId, removed: QubitId },
    #[serde(rename = "X")]
    MeasureX { qubit: QubitId, helper: QubitId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPath {
    pub pair: UserPair,
    pub qubits: Vec<QubitId>,
}

/// Operations turning a resource state into one task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub sed_pair: Option<UserPair>,
    pub pair_paths: Vec<PairPath>,
    pub ops: Vec<Op>,
}

impl Schedule {
    /// Applies the operations to `state`.
    pub fn replay(&self, state: &QubitGraph) -> Result<QubitGraph> {
        let mut g = state.clone();
        for op in &self.ops {
            match *op {
                Op::MeasureZ { qubit } => g.remove_qubit(qubit)?,
                Op::Merge { kept, removed } => {
                    g.merge_mut(kept, removed)?;
                }
                Op::MeasureX { qubit, helper } => g.measure_x_mut(qubit, helper)?,
            }
        }
        Ok(g)
    }

    /// Replays the schedule and checks that the touched part of the state
    /// becomes exactly one edge per requested pair, with the rest untouched.
    pub fn verify(&self, state: &QubitGraph, task: &Task) -> Result<()> {
        let fail = |msg: String| Err(Error::Replay(msg));
        let required = required_pairs(task, self.sed_pair)?;
        let served: BTreeSet<UserPair> = self.pair_paths.iter().map(|p| p.pair).collect();
        if served != required.iter().copied().collect() {
            return fail("paths do not match the requested pairs".into());
        }
        let mut touched = BTreeSet::new();
        for p in &self.pair_paths {
            for &q in &p.qubits {
                if !touched.contains(&q) {
                    touched.extend(state.component(q));
                }
            }
        }
        for op in &self.ops {
            let qs = match *op {
                Op::MeasureZ { qubit } => vec![qubit],
                Op::Merge { kept, removed } => vec![kept, removed],
                Op::MeasureX { qubit, helper } => vec![qubit, helper],
            };
            if qs.iter().any(|q| !touched.contains(q)) {
                return fail(format!("operation {op:?} acts outside the served components"));
            }
        }
        let result = self.replay(state)?;
        let mut endpoints = BTreeMap::new();
        for p in &self.pair_paths {
            let (&first, &last) = match (p.qubits.first(), p.qubits.last()) {
                (Some(f), Some(l)) if p.qubits.len() >= 2 => (f, l),
                _ => return fail(format!("path for {:?} is too short", p.pair)),
            };
            let owners = (result.owner(first), result.owner(last));
            match owners {
                (Some(a), Some(b)) if pair(a, b) == p.pair => {}
                _ => return fail(format!("endpoints of {:?} are not held by the pair", p.pair)),
            }
            endpoints.insert(first, last);
            endpoints.insert(last, first);
        }
        for q in result.qubits() {
            if !touched.contains(&q) {
                continue;
            }
            let Some(&partner) = endpoints.get(&q) else {
                return fail(format!("qubit {q} survives in a served component"));
            };
            let nbrs = result.neighbors(q).unwrap();
            if nbrs.len() != 1 || !nbrs.contains(&partner) {
                return fail(format!("qubit {q} is not paired exactly with {partner}"));
            }
        }
        if endpoints.keys().any(|&q| !result.contains(q)) {
            return fail("an endpoint was measured".into());
        }
        Ok(())
    }

    /// Compact notation with users numbered from 1, e.g. `S_{2,4} Z_6`.
    /// A user holding several qubits labels them `u_k` in id order.
    pub fn notation(&self, state: &QubitGraph) -> String {
        let label = |q: QubitId| -> String {
            let owner = state.owner(q).unwrap_or(usize::MAX);
            let mine = state.qubits_of(owner);
            if mine.len() <= 1 {
                format!("{}", owner.wrapping_add(1))
            } else {
                let k = mine.iter().position(|&x| x == q).unwrap_or(0) + 1;
                format!("{{{}_{k}}}", owner + 1)
            }
        };
        let mut parts = Vec::new();
        if let Some((a, b)) = self.sed_pair {
            parts.push(format!("S_{{{},{}}}", a + 1, b + 1));
        }
        for op in &self.ops {
            parts.push(match *op {
                Op::MeasureZ { qubit } => format!("Z_{}", label(qubit)),
                Op::MeasureX { qubit, .. } => format!("X_{}", label(qubit)),
                Op::Merge { kept, removed } => {
                    format!(
                        "M_{{{},{}}}",
                        label(kept).trim_matches(['{', '}']),
                        label(removed).trim_matches(['{', '}'])
                    )
                }
            });
        }
        if parts.is_empty() {
            "-".to_string()
        } else {
            parts.join(" ")
        }
    }
}

fn required_pairs(task: &Task, sed_pair: Option<UserPair>) -> Result<Vec<UserPair>> {
    let sed = match sed_pair {
        Some((a, b)) => {
            let p = pair(a, b);
            if !task.contains(p) {
                return Err(Error::SedPairNotInTask(a, b));
            }
            Some(p)
        }
        None => None,
    };
    Ok(task.pairs().filter(|&p| Some(p) != sed).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Found,
    NotFound,
    Exhausted,
}

/// Backtracking over per-pair induced qubit paths, shortest first.
struct PathSearch<'g> {
    g: &'g QubitGraph,
    pairs: Vec<UserPair>,
    blocked: BTreeMap<QubitId, u32>,
    remaining: Vec<usize>,
    chosen: Vec<(usize, Vec<QubitId>)>,
    steps: u64,
    /// Per pair, lower bounds on the remaining steps to the far end.
    dist: Vec<HashMap<QubitId, usize>>,
    /// Proven-unsolvable states with the largest budget tried.
    dead: HashMap<(Vec<usize>, Vec<QubitId>), usize>,
    slack_bound_hit: bool,
}

impl<'g> PathSearch<'g> {
    fn is_blocked(&self, q: QubitId) -> bool {
        self.blocked.get(&q).is_some_and(|&c| c > 0)
    }

    fn block(&mut self, path: &[QubitId], delta: i32) {
        let mut hit: BTreeSet<QubitId> = path.iter().copied().collect();
        for &q in path {
            hit.extend(self.g.neighbors(q).unwrap().iter().copied());
        }
        for q in hit {
            let c = self.blocked.entry(q).or_insert(0);
            *c = (*c as i32 + delta) as u32;
        }
    }

    fn blocked_set(&self) -> Vec<QubitId> {
        self.blocked.iter().filter(|(_, &c)| c > 0).map(|(&q, _)| q).collect()
    }

    /// Breadth-first distances to the unblocked qubits of `b`, moving along
    /// edges or between qubits of one intermediate user.
    fn distances(&self, a: usize, b: usize) -> HashMap<QubitId, usize> {
        let mut dist = HashMap::new();
        let mut queue = VecDeque::new();
        for q in self.g.qubits_of(b) {
            if !self.is_blocked(q) {
                dist.insert(q, 0);
                queue.push_back(q);
            }
        }
        let mut users_done = BTreeSet::new();
        while let Some(q) = queue.pop_front() {
            let d = dist[&q];
            let owner = self.g.owner(q).unwrap();
            if owner == a {
                continue;
            }
            let mut next: Vec<QubitId> = self.g.neighbors(q).unwrap().iter().copied().collect();
            if owner != b && users_done.insert(owner) {
                next.extend(self.g.qubits_of(owner));
            }
            for x in next {
                if dist.contains_key(&x) || self.is_blocked(x) || self.g.owner(x) == Some(b) {
                    continue;
                }
                dist.insert(x, d + 1);
                queue.push_back(x);
            }
        }
        dist
    }

    /// Serves the pair with the fewest open starts next; fails early when
    /// any remaining pair can no longer reach its far end. The paths chosen
    /// below this point may exceed their shortest length by `slack` steps
    /// in total.
    fn solve(&mut self, slack: usize) -> Outcome {
        if self.remaining.is_empty() {
            return Outcome::Found;
        }
        let key = (self.remaining.clone(), self.blocked_set());
        if let Some(&proven) = self.dead.get(&key).filter(|&&s| s >= slack) {
            self.slack_bound_hit |= proven != usize::MAX;
            return Outcome::NotFound;
        }
        let mut pick: Option<(usize, usize, Vec<QubitId>)> = None;
        for idx in 0..self.remaining.len() {
            let k = self.remaining[idx];
            let (a, b) = self.pairs[k];
            self.dist[k] = self.distances(a, b);
            let mut seen = Vec::new();
            let starts: Vec<QubitId> = self
                .g
                .qubits_of(a)
                .into_iter()
                .filter(|&q| {
                    let n = self.g.neighbors(q).unwrap();
                    let fresh = !self.is_blocked(q) && self.dist[k].contains_key(&q) && !seen.contains(&n);
                    seen.push(n);
                    fresh
                })
                .collect();
            if starts.is_empty() {
                self.dead.insert(key, usize::MAX);
                return Outcome::NotFound;
            }
            if pick.as_ref().is_none_or(|(_, _, best)| starts.len() < best.len()) {
                pick = Some((idx, k, starts));
            }
        }
        let (idx, k, starts) = pick.unwrap();
        self.remaining.remove(idx);
        let shortest = starts.iter().map(|q| self.dist[k][q]).min().unwrap();
        let longest = self.dist[k].len();
        let mut outcome = Outcome::NotFound;
        let bound_hit_before = self.slack_bound_hit;
        self.slack_bound_hit = false;
        'targets: for target in shortest..=longest {
            if target - shortest > slack {
                self.slack_bound_hit = true;
                break;
            }
            for &s in &starts {
                if self.dist[k][&s] > target {
                    continue;
                }
                let mut path = vec![s];
                outcome = self.extend(k, &mut path, target, slack - (target - shortest));
                if outcome != Outcome::NotFound {
                    break 'targets;
                }
            }
        }
        self.remaining.insert(idx, k);
        if outcome == Outcome::NotFound {
            // without any cut by the budget, no larger budget helps here
            let proven = if self.slack_bound_hit { slack } else { usize::MAX };
            self.dead.insert(key, proven);
        }
        self.slack_bound_hit |= bound_hit_before;
        outcome
    }

    /// Runs `solve` with growing detour budgets.
    fn solve_all(&mut self) -> Outcome {
        for slack in 0.. {
            self.slack_bound_hit = false;
            match self.solve(slack) {
                Outcome::NotFound if self.slack_bound_hit => {}
                other => return other,
            }
        }
        unreachable!()
    }

    fn extend(&mut self, k: usize, path: &mut Vec<QubitId>, target: usize, slack: usize) -> Outcome {
        self.extend_from(k, path, target, slack, false)
    }

    /// Grows `path` by one step: along an edge, or (`hop`) to another qubit
    /// of the same intermediate user, to be merged with it later.
    fn extend_from(&mut self, k: usize, path: &mut Vec<QubitId>, target: usize, slack: usize, hopped: bool) -> Outcome {
        self.steps += 1;
        if self.steps > SEARCH_STEP_LIMIT {
            return Outcome::Exhausted;
        }
        let (a, b) = self.pairs[k];
        let last = *path.last().unwrap();
        let last_owner = self.g.owner(last).unwrap();
        let mut next: Vec<(QubitId, bool)> = self.g.neighbors(last).unwrap().iter().map(|&x| (x, false)).collect();
        if !hopped && last_owner != a && last_owner != b {
            next.extend(
                self.g
                    .qubits_of(last_owner)
                    .into_iter()
                    .filter(|&x| x != last)
                    .map(|x| (x, true)),
            );
        }
        let steps = path.len() - 1;
        // qubits of one user with equal neighbourhoods are interchangeable
        let mut tried: Vec<(usize, &BTreeSet<QubitId>)> = Vec::new();
        for (x, hop) in next {
            let owner = self.g.owner(x).unwrap();
            if owner == a || self.is_blocked(x) || path.contains(&x) {
                continue;
            }
            let signature = (owner, self.g.neighbors(x).unwrap());
            if tried.contains(&signature) {
                continue;
            }
            tried.push(signature);
            let nx = self.g.neighbors(x).unwrap();
            if path[..path.len() - 1].iter().any(|q| nx.contains(q)) {
                continue;
            }
            match self.dist[k].get(&x) {
                Some(&d) if steps + 1 + d <= target => {}
                _ => continue,
            }
            if steps + 1 == target {
                if owner == b {
                    path.push(x);
                    self.block(path, 1);
                    self.chosen.push((k, path.clone()));
                    let r = self.solve(slack);
                    if r == Outcome::Found {
                        path.pop();
                        return r;
                    }
                    self.chosen.pop();
                    self.block(path, -1);
                    path.pop();
                    if r == Outcome::Exhausted {
                        return r;
                    }
                }
            } else if owner != b {
                path.push(x);
                let r = self.extend_from(k, path, target, slack, hop);
                path.pop();
                if r != Outcome::NotFound {
                    return r;
                }
            }
        }
        Outcome::NotFound
    }
}

fn build_ops(state: &QubitGraph, paths: &[Vec<QubitId>]) -> Vec<Op> {
    let on_path: BTreeSet<QubitId> = paths.iter().flatten().copied().collect();
    let mut touched = BTreeSet::new();
    for &q in &on_path {
        if !touched.contains(&q) {
            touched.extend(state.component(q));
        }
    }
    let mut ops: Vec<Op> = touched
        .difference(&on_path)
        .map(|&qubit| Op::MeasureZ { qubit })
        .collect();
    for path in paths {
        let start = path[0];
        let interior = &path[1..path.len() - 1];
        let mut kept: Vec<QubitId> = Vec::new();
        let mut run_head: Option<QubitId> = None;
        for &q in interior {
            match run_head {
                Some(h) if state.owner(h) == state.owner(q) => {
                    ops.push(Op::Merge { kept: h, removed: q });
                }
                _ => {
                    run_head = Some(q);
                    kept.push(q);
                }
            }
        }
        // start is a leaf once its predecessor side is gone, so X here acts
        // like a Y measurement and splices the path.
        for q in kept {
            ops.push(Op::MeasureX {
                qubit: q,
                helper: start,
            });
        }
    }
    ops
}

/// Tries to serve `task` from `state`, with `sed_pair` supplied by the
/// satellite. Returns `Ok(None)` when no schedule is found.
pub fn satisfy(state: &QubitGraph, task: &Task, sed_pair: Option<UserPair>) -> Result<Option<Schedule>> {
    let pairs = required_pairs(task, sed_pair)?;
    let mut search = PathSearch {
        g: state,
        pairs: pairs.clone(),
        blocked: BTreeMap::new(),
        remaining: (0..pairs.len()).collect(),
        chosen: Vec::new(),
        steps: 0,
        dist: vec![HashMap::new(); pairs.len()],
        dead: HashMap::new(),
        slack_bound_hit: false,
    };
    let outcome = search.solve_all();
    if outcome != Outcome::Found {
        return Ok(None);
    }
    let mut chosen = search.chosen;
    chosen.sort_by_key(|(k, _)| *k);
    let paths: Vec<Vec<QubitId>> = chosen.into_iter().map(|(_, p)| p).collect();
    let schedule = Schedule {
        sed_pair: sed_pair.map(|(a, b)| pair(a, b)),
        pair_paths: pairs
            .iter()
            .zip(&paths)
            .map(|(&p, qubits)| PairPath {
                pair: p,
                qubits: orient(state, p, qubits),
            })
            .collect(),
        ops: build_ops(state, &paths),
    };
    schedule.verify(state, task)?;
    Ok(Some(schedule))
}

// Paths start at the pair's first user.
fn orient(state: &QubitGraph, p: UserPair, qubits: &[QubitId]) -> Vec<QubitId> {
    let mut q = qubits.to_vec();
    if state.owner(q[0]) != Some(p.0) {
        q.reverse();
    }
    q
}

/// Per-task outcome of serving a task set from one plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub satisfied: Vec<bool>,
    pub schedules: Vec<Option<Schedule>>,
    pub failures: usize,
}

impl NetworkReport {
    pub fn is_successful(&self) -> bool {
        self.failures == 0
    }

    pub fn failed_tasks(&self) -> Vec<usize> {
        self.satisfied
            .iter()
            .enumerate()
            .filter(|(_, &ok)| !ok)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Serves every task of the plan with its recorded satellite pair; tasks the
/// planner marked infeasible count as failures.
pub fn network_success(plan: &ResourcePlan) -> Result<NetworkReport> {
    let mut satisfied = Vec::with_capacity(plan.tasks.len());
    let mut schedules = Vec::with_capacity(plan.tasks.len());
    for (k, task) in plan.tasks.tasks().iter().enumerate() {
        let schedule = if plan.infeasible_tasks.contains(&k) {
            None
        } else {
            satisfy(&plan.state, task, plan.sed_choice.get(k).copied().flatten())?
        };
        satisfied.push(schedule.is_some());
        schedules.push(schedule);
    }
    let failures = satisfied.iter().filter(|&&ok| !ok).count();
    Ok(NetworkReport {
        satisfied,
        schedules,
        failures,
    })
}
