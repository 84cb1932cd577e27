//! Undirected user-level multigraphs and the adjacency, union and
//! simultaneous matrices that drive every planning decision.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An unordered pair of user indices, stored with the smaller index first.
pub type UserPair = (usize, usize);

/// Normalizes `(i, j)` to `(min, max)`.
#[inline]
pub fn pair(i: usize, j: usize) -> UserPair {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Undirected multigraph over users `0..n_users`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "UserGraphRepr", into = "UserGraphRepr")]
pub struct UserGraph {
    n_users: usize,
    edges: BTreeMap<UserPair, u32>,
}

impl UserGraph {
    pub fn new(n_users: usize) -> Self {
        Self {
            n_users,
            edges: BTreeMap::new(),
        }
    }

    /// Builds a graph with one unit edge per listed pair (repeats add up).
    pub fn from_pairs(n_users: usize, pairs: &[UserPair]) -> Result<Self> {
        let mut g = Self::new(n_users);
        for &(i, j) in pairs {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        for index in [i, j] {
            if index >= self.n_users {
                return Err(Error::UserOutOfRange {
                    index,
                    n_users: self.n_users,
                });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    /// Adds one unit of multiplicity to edge `(i, j)`.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.add_edge_with(i, j, 1)
    }

    pub fn add_edge_with(&mut self, i: usize, j: usize, multiplicity: u32) -> Result<()> {
        self.check(i, j)?;
        if multiplicity == 0 {
            return Ok(());
        }
        let entry = self.edges.entry(pair(i, j)).or_insert(0);
        *entry = entry.checked_add(multiplicity).ok_or(Error::Overflow)?;
        Ok(())
    }

    /// Removes one unit of multiplicity; returns whether the edge existed.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        let key = pair(i, j);
        match self.edges.get_mut(&key) {
            Some(m) if *m > 1 => {
                *m -= 1;
                true
            }
            Some(_) => {
                self.edges.remove(&key);
                true
            }
            None => false,
        }
    }

    pub fn multiplicity(&self, i: usize, j: usize) -> u32 {
        self.edges.get(&pair(i, j)).copied().unwrap_or(0)
    }

    /// Distinct edges with their multiplicities, in ascending pair order.
    pub fn edges(&self) -> impl Iterator<Item = (UserPair, u32)> + '_ {
        self.edges.iter().map(|(&p, &m)| (p, m))
    }

    /// Sum of all edge multiplicities.
    pub fn total_edges(&self) -> u64 {
        self.edges.values().map(|&m| u64::from(m)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// JSON form: `{"n_users": n, "edges": [[i, j, multiplicity], ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserGraphRepr {
    n_users: usize,
    edges: Vec<(usize, usize, u32)>,
}

impl TryFrom<UserGraphRepr> for UserGraph {
    type Error = Error;

    fn try_from(r: UserGraphRepr) -> Result<Self> {
        let mut g = UserGraph::new(r.n_users);
        for (i, j, m) in r.edges {
            if m == 0 {
                return Err(Error::Config(format!("zero multiplicity on ({i}, {j})")));
            }
            g.add_edge_with(i, j, m)?;
        }
        Ok(g)
    }
}

impl From<UserGraph> for UserGraphRepr {
    fn from(g: UserGraph) -> Self {
        Self {
            n_users: g.n_users,
            edges: g.edges().map(|((i, j), m)| (i, j, m)).collect(),
        }
    }
}

/// Dense symmetric matrix of non-negative integer counts with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjMatrix {
    n: usize,
    entries: Vec<u64>,
}

impl AdjMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, value: u64) {
        self.entries[i * self.n + j] = value;
        self.entries[j * self.n + i] = value;
    }

    /// Nonzero entries of the strict upper triangle, row-major.
    pub fn nonzero_upper(&self) -> impl Iterator<Item = (UserPair, u64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let v = self.get(i, j);
                (v > 0).then_some(((i, j), v))
            })
        })
    }

    /// Sum of the strict upper triangle.
    pub fn sum_upper(&self) -> u64 {
        self.nonzero_upper().map(|(_, v)| v).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0)
    }
}

pub fn adjacency_matrix(g: &UserGraph) -> AdjMatrix {
    let mut a = AdjMatrix::zeros(g.n_users);
    for ((i, j), m) in g.edges() {
        a.set(i, j, u64::from(m));
    }
    a
}

fn check_dims(n_users: usize, graphs: &[UserGraph]) -> Result<()> {
    match graphs.iter().find(|g| g.n_users != n_users) {
        Some(g) => Err(Error::DimensionMismatch {
            expected: n_users,
            found: g.n_users,
        }),
        None => Ok(()),
    }
}

/// Entrywise maximum of the adjacency matrices of `graphs`.
pub fn union_adjacency(n_users: usize, graphs: &[UserGraph]) -> Result<AdjMatrix> {
    check_dims(n_users, graphs)?;
    let mut u = AdjMatrix::zeros(n_users);
    for g in graphs {
        for ((i, j), m) in g.edges() {
            let m = u64::from(m);
            if m > u.get(i, j) {
                u.set(i, j, m);
            }
        }
    }
    Ok(u)
}

/// Per pair, the largest `A_ij * (total edge count)` over the graphs.
pub fn simultaneous_adjacency(n_users: usize, graphs: &[UserGraph]) -> Result<AdjMatrix> {
    check_dims(n_users, graphs)?;
    let mut s = AdjMatrix::zeros(n_users);
    for g in graphs {
        let total = g.total_edges();
        for ((i, j), m) in g.edges() {
            let v = u64::from(m).checked_mul(total).ok_or(Error::Overflow)?;
            if v > s.get(i, j) {
                s.set(i, j, v);
            }
        }
    }
    Ok(s)
}

/// Simultaneous matrix where each graph's edge total only counts edges
/// inside `window`; entries outside `window` are zero.
pub fn restricted_simultaneous(n_users: usize, graphs: &[UserGraph], window: &BTreeSet<UserPair>) -> Result<AdjMatrix> {
    check_dims(n_users, graphs)?;
    let mut s = AdjMatrix::zeros(n_users);
    for g in graphs {
        let mut total: u64 = 0;
        for (p, m) in g.edges() {
            if window.contains(&p) {
                total = total.checked_add(u64::from(m)).ok_or(Error::Overflow)?;
            }
        }
        for ((i, j), m) in g.edges() {
            if !window.contains(&(i, j)) {
                continue;
            }
            let v = u64::from(m).checked_mul(total).ok_or(Error::Overflow)?;
            if v > s.get(i, j) {
                s.set(i, j, v);
            }
        }
    }
    Ok(s)
}
