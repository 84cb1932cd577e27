//! Physical grid network: device grid, user placement, the distance
//! threshold and routing of long user pairs through intermediate users.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A device position on the grid, `x` along the width and `y` along the height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// Rectangular device grid with users placed on distinct devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridNetwork {
    width: u32,
    height: u32,
    edge_length_km: f64,
    users: Vec<Coord>,
    d: u32,
}

/// User placement of the six-user reference network, users in index order.
pub const EXAMPLE_USERS: [Coord; 6] = [
    Coord::new(2, 2),
    Coord::new(0, 3),
    Coord::new(4, 1),
    Coord::new(2, 1),
    Coord::new(4, 0),
    Coord::new(3, 0),
];

impl GridNetwork {
    pub fn new(width: u32, height: u32, edge_length_km: f64, users: Vec<Coord>, d: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid("grid must have at least one device".into()));
        }
        if users.len() < 2 {
            return Err(Error::InvalidGrid("at least two users are required".into()));
        }
        for (k, c) in users.iter().enumerate() {
            if c.x >= width || c.y >= height {
                return Err(Error::InvalidGrid(format!(
                    "user {k} at ({}, {}) lies outside the {width}x{height} grid",
                    c.x, c.y
                )));
            }
            if users[..k].contains(c) {
                return Err(Error::InvalidGrid(format!(
                    "user {k} shares position ({}, {}) with another user",
                    c.x, c.y
                )));
            }
        }
        Ok(Self {
            width,
            height,
            edge_length_km,
            users,
            d,
        })
    }

    /// 5x5 grid, 200 km spacing, six users as in the reference example.
    pub fn example(d: u32) -> Self {
        Self::new(5, 5, 200.0, EXAMPLE_USERS.to_vec(), d).expect("example grid is valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn edge_length_km(&self) -> f64 {
        self.edge_length_km
    }

    pub fn users(&self) -> &[Coord] {
        &self.users
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn threshold(&self) -> u32 {
        self.d
    }

    pub fn with_threshold(&self, d: u32) -> Self {
        Self { d, ..self.clone() }
    }

    /// Largest possible `user_distance` on this grid.
    pub fn max_distance(&self) -> u32 {
        (self.width - 1 + self.height - 1).saturating_sub(1)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let n_users = self.users.len();
        for index in [i, j] {
            if index >= n_users {
                return Err(Error::UserOutOfRange { index, n_users });
            }
        }
        if i == j {
            return Err(Error::InvalidPair(i, j));
        }
        Ok(())
    }

    /// Number of devices strictly between users `i` and `j` on a shortest
    /// rectilinear route.
    pub fn user_distance(&self, i: usize, j: usize) -> Result<u32> {
        self.check_pair(i, j)?;
        Ok(self.users[i].manhattan(self.users[j]) - 1)
    }

    fn distance_unchecked(&self, i: usize, j: usize) -> u32 {
        self.users[i].manhattan(self.users[j]) - 1
    }

    pub fn edge_allowed(&self, i: usize, j: usize) -> Result<bool> {
        Ok(self.user_distance(i, j)? <= self.d)
    }

    fn allowed_unchecked(&self, i: usize, j: usize) -> bool {
        i != j && self.distance_unchecked(i, j) <= self.d
    }

    /// Fewest-hop path from `i` to `j` through users whose every hop is
    /// within the threshold. Ties go to the smallest summed Manhattan length,
    /// then uniformly at random. `None` when no such path exists.
    pub fn constrained_path<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> Result<Option<Vec<usize>>> {
        self.check_pair(i, j)?;
        if self.allowed_unchecked(i, j) {
            return Ok(Some(vec![i, j]));
        }
        let n = self.users.len();

        // Hop distance to j.
        let mut hops = vec![usize::MAX; n];
        hops[j] = 0;
        let mut queue = VecDeque::from([j]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if hops[v] == usize::MAX && self.allowed_unchecked(u, v) {
                    hops[v] = hops[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if hops[i] == usize::MAX {
            return Ok(None);
        }

        // Minimal summed length to j along the shortest-hop DAG, and the
        // number of paths achieving it.
        let mut order: Vec<usize> = (0..n).filter(|&v| hops[v] <= hops[i]).collect();
        order.sort_by_key(|&v| hops[v]);
        let mut cost = vec![u64::MAX; n];
        let mut count = vec![0u128; n];
        cost[j] = 0;
        count[j] = 1;
        for &u in order.iter().filter(|&&u| u != j) {
            for v in self.successors(u, &hops) {
                let c = cost[v] + u64::from(self.users[u].manhattan(self.users[v]));
                if c < cost[u] {
                    cost[u] = c;
                    count[u] = count[v];
                } else if c == cost[u] {
                    count[u] += count[v];
                }
            }
        }

        let mut path = vec![i];
        let mut u = i;
        while u != j {
            let best: Vec<usize> = self
                .successors(u, &hops)
                .filter(|&v| cost[v] + u64::from(self.users[u].manhattan(self.users[v])) == cost[u])
                .collect();
            let next = if best.len() == 1 {
                best[0]
            } else {
                let mut pick = rng.random_range(0..count[u]);
                let mut chosen = best[best.len() - 1];
                for &v in &best {
                    if pick < count[v] {
                        chosen = v;
                        break;
                    }
                    pick -= count[v];
                }
                chosen
            };
            path.push(next);
            u = next;
        }
        Ok(Some(path))
    }

    fn successors<'a>(&'a self, u: usize, hops: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        (0..self.users.len()).filter(move |&v| {
            hops[u] != usize::MAX && hops[v] != usize::MAX && hops[v] + 1 == hops[u] && self.allowed_unchecked(u, v)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_distances() {
        let net = GridNetwork::example(7);
        // 1-based users 2 and 5
        assert_eq!(net.user_distance(1, 4).unwrap(), 6);
        // users 3 and 5 are grid neighbours
        assert_eq!(net.user_distance(2, 4).unwrap(), 0);
    }

    #[test]
    fn opposite_corners() {
        let net = GridNetwork::new(5, 5, 200.0, vec![Coord::new(0, 0), Coord::new(4, 4)], 0).unwrap();
        assert_eq!(net.user_distance(0, 1).unwrap(), 7);
        assert_eq!(net.max_distance(), 7);
    }

    #[test]
    fn same_user_is_invalid() {
        let net = GridNetwork::example(2);
        assert_eq!(net.user_distance(3, 3), Err(Error::InvalidPair(3, 3)));
    }

    #[test]
    fn threshold_blocks_long_edges() {
        assert!(!GridNetwork::example(5).edge_allowed(1, 4).unwrap());
        let net = GridNetwork::example(4);
        for other in [2, 4, 5] {
            assert!(!net.edge_allowed(1, other).unwrap());
        }
        let net = GridNetwork::example(7);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(net.edge_allowed(i, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(GridNetwork::new(5, 5, 1.0, vec![Coord::new(0, 0)], 1).is_err());
        assert!(GridNetwork::new(5, 5, 1.0, vec![Coord::new(0, 0), Coord::new(0, 0)], 1).is_err());
        assert!(GridNetwork::new(5, 5, 1.0, vec![Coord::new(0, 0), Coord::new(5, 0)], 1).is_err());
    }

    #[test]
    fn direct_path_when_allowed() {
        let net = GridNetwork::example(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(net.constrained_path(1, 4, &mut rng).unwrap(), Some(vec![1, 4]));
    }

    #[test]
    fn two_hop_route_at_threshold_four() {
        let net = GridNetwork::example(4);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = net.constrained_path(1, 2, &mut rng).unwrap().unwrap();
            assert_eq!(p.len(), 3);
            assert_eq!((p[0], p[2]), (1, 2));
            // via 1-based user 1 or 4; both have summed length 4
            assert!(p[1] == 0 || p[1] == 3);
        }
    }

    #[test]
    fn isolated_user_is_unroutable() {
        let net = GridNetwork::example(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for other in [0, 2, 3, 4, 5] {
            assert_eq!(net.constrained_path(1, other, &mut rng).unwrap(), None);
        }
    }
}
