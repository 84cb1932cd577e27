//! Tasks (matchings of requested EPR pairs), task sets and the random
//! task generator.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multigraph::{pair, UserGraph, UserPair};

/// One task: a set of requested EPR pairs in which every user appears at
/// most once.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<UserPair>", into = "Vec<UserPair>")]
pub struct Task {
    pairs: BTreeSet<UserPair>,
}

impl Task {
    pub fn new(pairs: impl IntoIterator<Item = UserPair>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut set = BTreeSet::new();
        for (i, j) in pairs {
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            for u in [i, j] {
                if !seen.insert(u) {
                    return Err(Error::NotAMatching(u));
                }
            }
            set.insert(pair(i, j));
        }
        Ok(Self { pairs: set })
    }

    pub fn pairs(&self) -> impl Iterator<Item = UserPair> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, p: UserPair) -> bool {
        self.pairs.contains(&pair(p.0, p.1))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn involves(&self, user: usize) -> bool {
        self.pairs.iter().any(|&(i, j)| i == user || j == user)
    }

    pub fn max_user(&self) -> Option<usize> {
        self.pairs.iter().map(|&(_, j)| j).max()
    }

    pub fn to_user_graph(&self, n_users: usize) -> Result<UserGraph> {
        UserGraph::from_pairs(n_users, &self.pairs.iter().copied().collect::<Vec<_>>())
    }
}

impl TryFrom<Vec<UserPair>> for Task {
    type Error = Error;

    fn try_from(v: Vec<UserPair>) -> Result<Self> {
        Task::new(v)
    }
}

impl From<Task> for Vec<UserPair> {
    fn from(t: Task) -> Self {
        t.pairs.into_iter().collect()
    }
}

/// An ordered, finite list of tasks over `n_users` users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskSetRepr", into = "TaskSetRepr")]
pub struct TaskSet {
    n_users: usize,
    tasks: Vec<Task>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSetRepr {
    n_users: usize,
    tasks: Vec<Task>,
}

impl TryFrom<TaskSetRepr> for TaskSet {
    type Error = Error;

    fn try_from(r: TaskSetRepr) -> Result<Self> {
        TaskSet::new(r.n_users, r.tasks)
    }
}

impl From<TaskSet> for TaskSetRepr {
    fn from(t: TaskSet) -> Self {
        Self {
            n_users: t.n_users,
            tasks: t.tasks,
        }
    }
}

impl TaskSet {
    pub fn new(n_users: usize, tasks: Vec<Task>) -> Result<Self> {
        for t in &tasks {
            if let Some(index) = t.max_user().filter(|&u| u >= n_users) {
                return Err(Error::UserOutOfRange { index, n_users });
            }
        }
        Ok(Self { n_users, tasks })
    }

    /// Builds a task set from 0-based pair lists.
    pub fn from_pairs(n_users: usize, tasks: &[&[UserPair]]) -> Result<Self> {
        let tasks = tasks
            .iter()
            .map(|t| Task::new(t.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_users, tasks)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn to_user_graphs(&self) -> Vec<UserGraph> {
        self.tasks
            .iter()
            .map(|t| t.to_user_graph(self.n_users).expect("validated on construction"))
            .collect()
    }
}

/// The six-user, four-task reference set (users 1..6 stored 0-based):
/// `{(1,2),(3,6)}`, `{(1,5)}`, `{(2,4),(3,5)}`, `{(1,4),(2,3),(5,6)}`.
pub fn example_task_set() -> TaskSet {
    TaskSet::from_pairs(
        6,
        &[
            &[(0, 1), (2, 5)],
            &[(0, 4)],
            &[(1, 3), (2, 4)],
            &[(0, 3), (1, 2), (4, 5)],
        ],
    )
    .expect("example task set is valid")
}

/// Draws `n_tasks` tasks. Each task size is `Binomial(floor(n_users/2), p)`
/// and its pairs form a uniformly random matching of that size.
pub fn generate_tasks<R: Rng + ?Sized>(n_users: usize, n_tasks: usize, p: f64, rng: &mut R) -> Result<TaskSet> {
    if n_users < 2 {
        return Err(Error::InvalidGrid("at least two users are required".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let trials = (n_users / 2) as u64;
    let size_dist = Binomial::new(trials, p).map_err(|_| Error::InvalidProbability(p))?;
    let mut users: Vec<usize> = (0..n_users).collect();
    let mut tasks = Vec::with_capacity(n_tasks);
    for _ in 0..n_tasks {
        let size = size_dist.sample(rng) as usize;
        users.sort_unstable();
        users.shuffle(rng);
        let pairs = users[..2 * size].chunks_exact(2).map(|c| pair(c[0], c[1]));
        tasks.push(Task::new(pairs)?);
    }
    TaskSet::new(n_users, tasks)
}
