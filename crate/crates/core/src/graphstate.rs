//! Graph-level rewriting of graph states: local complementation, Pauli
//! measurements and the two-qubit merging measurement.
//!
//! All rewrites describe the `+1` (respectively `P_0`) outcome branch; the
//! outcome-dependent local corrections are not tracked.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type QubitId = usize;

/// Simple undirected graph over qubits, each qubit owned by a user.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(into = "QubitGraphRepr", try_from = "QubitGraphRepr")]
pub struct QubitGraph {
    owners: BTreeMap<QubitId, usize>,
    adj: BTreeMap<QubitId, BTreeSet<QubitId>>,
    next_id: QubitId,
}

// Equality is structural; the id allocator is not part of it.
impl PartialEq for QubitGraph {
    fn eq(&self, other: &Self) -> bool {
        self.owners == other.owners && self.adj == other.adj
    }
}

impl Eq for QubitGraph {}

impl QubitGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a fresh qubit owned by `owner` and returns its id.
    pub fn add_qubit(&mut self, owner: usize) -> QubitId {
        let id = self.next_id;
        self.insert_qubit(id, owner);
        id
    }

    fn insert_qubit(&mut self, id: QubitId, owner: usize) {
        self.owners.insert(id, owner);
        self.adj.insert(id, BTreeSet::new());
        self.next_id = self.next_id.max(id + 1);
    }

    pub fn add_edge(&mut self, a: QubitId, b: QubitId) -> Result<()> {
        self.require(a)?;
        self.require(b)?;
        if a == b {
            return Err(Error::InvalidPair(a, b));
        }
        self.adj.get_mut(&a).unwrap().insert(b);
        self.adj.get_mut(&b).unwrap().insert(a);
        Ok(())
    }

    fn toggle_edge(&mut self, a: QubitId, b: QubitId) {
        debug_assert_ne!(a, b);
        let na = self.adj.get_mut(&a).unwrap();
        if !na.remove(&b) {
            na.insert(b);
            self.adj.get_mut(&b).unwrap().insert(a);
        } else {
            self.adj.get_mut(&b).unwrap().remove(&a);
        }
    }

    /// Removes a qubit and its incident edges.
    pub fn remove_qubit(&mut self, v: QubitId) -> Result<()> {
        let nbrs = self.adj.remove(&v).ok_or(Error::QubitNotFound(v))?;
        self.owners.remove(&v);
        for u in nbrs {
            self.adj.get_mut(&u).unwrap().remove(&v);
        }
        Ok(())
    }

    fn require(&self, v: QubitId) -> Result<()> {
        if self.owners.contains_key(&v) {
            Ok(())
        } else {
            Err(Error::QubitNotFound(v))
        }
    }

    pub fn contains(&self, v: QubitId) -> bool {
        self.owners.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.owners.keys().copied()
    }

    pub fn owner(&self, v: QubitId) -> Option<usize> {
        self.owners.get(&v).copied()
    }

    /// Qubits held by `user`, ascending.
    pub fn qubits_of(&self, user: usize) -> Vec<QubitId> {
        self.owners
            .iter()
            .filter(|&(_, &o)| o == user)
            .map(|(&q, _)| q)
            .collect()
    }

    /// Users owning at least one qubit, ascending.
    pub fn users(&self) -> BTreeSet<usize> {
        self.owners.values().copied().collect()
    }

    pub fn neighbors(&self, v: QubitId) -> Option<&BTreeSet<QubitId>> {
        self.adj.get(&v)
    }

    pub fn degree(&self, v: QubitId) -> usize {
        self.adj.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, a: QubitId, b: QubitId) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (QubitId, QubitId)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, n)| n.range(a + 1..).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Connected component containing `v`.
    pub fn component(&self, v: QubitId) -> BTreeSet<QubitId> {
        let mut seen = BTreeSet::new();
        if !self.contains(v) {
            return seen;
        }
        let mut stack = vec![v];
        seen.insert(v);
        while let Some(u) = stack.pop() {
            for &w in &self.adj[&u] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Complements the subgraph induced on `N(v)`.
    pub fn local_complement(&self, v: QubitId) -> Result<QubitGraph> {
        let mut g = self.clone();
        g.local_complement_mut(v)?;
        Ok(g)
    }

    pub(crate) fn local_complement_mut(&mut self, v: QubitId) -> Result<()> {
        let nbrs: Vec<QubitId> = self
            .adj
            .get(&v)
            .ok_or(Error::QubitNotFound(v))?
            .iter()
            .copied()
            .collect();
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                self.toggle_edge(a, b);
            }
        }
        Ok(())
    }

    /// Z measurement: deletes `v` and its edges.
    pub fn measure_z(&self, v: QubitId) -> Result<QubitGraph> {
        let mut g = self.clone();
        g.remove_qubit(v)?;
        Ok(g)
    }

    /// Y measurement: local complementation at `v`, then Z measurement of `v`.
    pub fn measure_y(&self, v: QubitId) -> Result<QubitGraph> {
        let mut g = self.clone();
        g.measure_y_mut(v)?;
        Ok(g)
    }

    fn measure_y_mut(&mut self, v: QubitId) -> Result<()> {
        self.local_complement_mut(v)?;
        self.remove_qubit(v)
    }

    /// X measurement of `v` around `helper`, a neighbour of `v`. An isolated
    /// `v` is simply removed and `helper` is ignored.
    pub fn measure_x(&self, v: QubitId, helper: QubitId) -> Result<QubitGraph> {
        let mut g = self.clone();
        g.measure_x_mut(v, helper)?;
        Ok(g)
    }

    pub(crate) fn measure_x_mut(&mut self, v: QubitId, helper: QubitId) -> Result<()> {
        let nbrs = self.adj.get(&v).ok_or(Error::QubitNotFound(v))?;
        if nbrs.is_empty() {
            return self.remove_qubit(v);
        }
        if !nbrs.contains(&helper) {
            return Err(Error::InvalidHelper { qubit: v, helper });
        }
        self.local_complement_mut(helper)?;
        self.measure_y_mut(v)?;
        self.local_complement_mut(helper)
    }

    /// Merging measurement of `u` and `v` into one qubit, which keeps `u`'s
    /// id. The merged neighbourhood is `N(u) xor N(v)` without `u`, `v`:
    /// parallel edges cancel in pairs. Adjacency of `u`, `v` is not required.
    pub fn merge(&self, u: QubitId, v: QubitId) -> Result<(QubitGraph, QubitId)> {
        let mut g = self.clone();
        let w = g.merge_mut(u, v)?;
        Ok((g, w))
    }

    pub(crate) fn merge_mut(&mut self, u: QubitId, v: QubitId) -> Result<QubitId> {
        self.require(u)?;
        self.require(v)?;
        if u == v {
            return Err(Error::InvalidPair(u, v));
        }
        let nv: Vec<QubitId> = self.adj[&v].iter().copied().filter(|&x| x != u).collect();
        // w keeps u's id and owner
        self.remove_qubit(v)?;
        for x in nv {
            self.toggle_edge(u, x);
        }
        Ok(u)
    }
}

/// JSON form: qubit list with owners plus an edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitGraphRepr {
    qubits: Vec<QubitRepr>,
    edges: Vec<(QubitId, QubitId)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QubitRepr {
    id: QubitId,
    owner: usize,
}

impl From<QubitGraph> for QubitGraphRepr {
    fn from(g: QubitGraph) -> Self {
        Self {
            qubits: g.owners.iter().map(|(&id, &owner)| QubitRepr { id, owner }).collect(),
            edges: g.edges().collect(),
        }
    }
}

impl TryFrom<QubitGraphRepr> for QubitGraph {
    type Error = Error;

    fn try_from(r: QubitGraphRepr) -> Result<Self> {
        let mut g = QubitGraph::new();
        for q in r.qubits {
            if g.contains(q.id) {
                return Err(Error::Config(format!("duplicate qubit id {}", q.id)));
            }
            g.insert_qubit(q.id, q.owner);
        }
        for (a, b) in r.edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a graph on qubits 0..n (owner = id) with the given edges.
    pub(crate) fn graph(n: usize, edges: &[(QubitId, QubitId)]) -> QubitGraph {
        let mut g = QubitGraph::new();
        for k in 0..n {
            g.add_qubit(k);
        }
        for &(a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        g
    }

    fn edge_set(g: &QubitGraph) -> Vec<(QubitId, QubitId)> {
        g.edges().collect()
    }

    #[test]
    fn local_complement_of_path_is_triangle() {
        let g = graph(3, &[(0, 1), (1, 2)]).local_complement(1).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn local_complement_at_leaf_is_noop() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(g.local_complement(0).unwrap(), g);
        let h = graph(3, &[(0, 1)]);
        assert_eq!(h.local_complement(2).unwrap(), h);
    }

    #[test]
    fn local_complement_unknown_qubit() {
        assert_eq!(graph(2, &[]).local_complement(7), Err(Error::QubitNotFound(7)));
    }

    #[test]
    fn measure_z_cases() {
        let g = graph(2, &[(0, 1)]).measure_z(1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.degree(0), 0);

        let g = graph(3, &[(0, 1)]);
        let h = g.measure_z(2).unwrap();
        assert_eq!(edge_set(&h), vec![(0, 1)]);
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn measure_z_on_satellite_example_state() {
        // qubits of 1-based users 1,4,3,5,6 with edges 1-4, 3-5, 5-6
        let mut g = QubitGraph::new();
        let q: Vec<_> = [0, 3, 2, 4, 5].iter().map(|&u| g.add_qubit(u)).collect();
        g.add_edge(q[0], q[1]).unwrap();
        g.add_edge(q[2], q[3]).unwrap();
        g.add_edge(q[3], q[4]).unwrap();
        let h = g.measure_z(q[4]).unwrap();
        assert_eq!(edge_set(&h), vec![(q[0], q[1]), (q[2], q[3])]);
    }

    #[test]
    fn measure_y_cases() {
        let g = graph(3, &[(0, 1), (1, 2)]).measure_y(1).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 2)]);
        let g = graph(2, &[]).measure_y(1).unwrap();
        assert_eq!(g.len(), 1);
        // star centre -> clique on leaves
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]).measure_y(0).unwrap();
        assert_eq!(edge_set(&g), vec![(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn measure_x_cases() {
        let g = graph(3, &[(0, 1), (1, 2)]).measure_x(1, 0).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 2)]);
        let g = graph(2, &[(0, 1)]).measure_x(1, 0).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edge_count(), 0);
        let g = graph(2, &[]).measure_x(0, 1).unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn measure_x_rejects_non_neighbour_helper() {
        let g = graph(3, &[(0, 1)]);
        assert_eq!(g.measure_x(0, 2), Err(Error::InvalidHelper { qubit: 0, helper: 2 }));
    }

    #[test]
    fn merge_contracts_path() {
        // a-u-v-b
        let (g, w) = graph(4, &[(0, 1), (1, 2), (2, 3)]).merge(1, 2).unwrap();
        assert_eq!(w, 1);
        assert_eq!(edge_set(&g), vec![(0, 1), (1, 3)]);
    }

    #[test]
    fn merge_cancels_common_neighbours() {
        // triangle a-u, a-v, u-v
        let (g, w) = graph(3, &[(0, 1), (0, 2), (1, 2)]).merge(1, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert!(!g.has_edge(0, w));
    }

    #[test]
    fn merge_as_repeater() {
        // a - x   y - b, x and y at one user
        let mut g = QubitGraph::new();
        let a = g.add_qubit(0);
        let x = g.add_qubit(1);
        let y = g.add_qubit(1);
        let b = g.add_qubit(2);
        g.add_edge(a, x).unwrap();
        g.add_edge(y, b).unwrap();
        let (g, w) = g.merge(x, y).unwrap();
        let g = g.measure_x(w, a).unwrap();
        assert_eq!(edge_set(&g), vec![(a, b)]);
    }

    #[test]
    fn merge_same_qubit_rejected() {
        assert_eq!(graph(2, &[]).merge(1, 1), Err(Error::InvalidPair(1, 1)));
    }

    #[test]
    fn json_round_trip() {
        let g = graph(4, &[(0, 1), (2, 3), (1, 3)]);
        let s = serde_json::to_string(&g).unwrap();
        let back: QubitGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_rejects_self_loop() {
        let s = r#"{"qubits":[{"id":0,"owner":0}],"edges":[[0,0]]}"#;
        assert!(serde_json::from_str::<QubitGraph>(s).is_err());
    }
}
