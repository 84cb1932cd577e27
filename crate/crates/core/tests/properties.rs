mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qresource_core::checker::{network_success, satisfy};
use qresource_core::graphstate::QubitGraph;
use qresource_core::multigraph::{
    adjacency_matrix, restricted_simultaneous, simultaneous_adjacency, union_adjacency, AdjMatrix, UserGraph,
};
use qresource_core::oracle::{graph_state_tableau, graph_state_vector, project_merge, project_pauli, Basis};
use qresource_core::planner::{build, merging_algorithm, Setting};
use qresource_core::taskgen::generate_tasks;
use qresource_core::topology::{Coord, GridNetwork};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::rng;

// --- strategies --------------------------------------------------------------

fn qubit_graph(max_n: usize) -> impl Strategy<Value = QubitGraph> {
    (1..=max_n)
        .prop_flat_map(|n| {
            let m = n * (n - 1) / 2;
            (
                Just(n),
                prop::collection::vec(any::<bool>(), m),
                prop::collection::vec(0..4usize, n),
            )
        })
        .prop_map(|(n, bits, owners)| {
            let mut g = QubitGraph::new();
            let ids: Vec<_> = owners.iter().map(|&o| g.add_qubit(o)).collect();
            let mut k = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    if bits[k] {
                        g.add_edge(ids[a], ids[b]).unwrap();
                    }
                    k += 1;
                }
            }
            g
        })
}

/// Distinct cells on a 5x5 grid.
fn network(max_n: usize, max_d: u32) -> impl Strategy<Value = GridNetwork> {
    (2..=max_n, 0..=max_d, any::<u64>()).prop_map(|(n, d, seed)| {
        let mut cells: Vec<Coord> = (0..5).flat_map(|y| (0..5).map(move |x| Coord::new(x, y))).collect();
        cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        cells.truncate(n);
        GridNetwork::new(5, 5, 200.0, cells, d).unwrap()
    })
}

fn multigraphs() -> impl Strategy<Value = (usize, Vec<UserGraph>)> {
    (2..=7usize).prop_flat_map(|n| {
        let edge = (0..n, 0..n, 1..4u32);
        let graph = prop::collection::vec(edge, 0..8).prop_map(move |es| {
            let mut g = UserGraph::new(n);
            for (i, j, m) in es {
                if i != j {
                    g.add_edge_with(i, j, m).unwrap();
                }
            }
            g
        });
        (Just(n), prop::collection::vec(graph, 0..6))
    })
}

fn assert_simple(g: &QubitGraph) {
    for v in g.qubits() {
        let nbrs = g.neighbors(v).unwrap();
        assert!(!nbrs.contains(&v), "self-loop on {v}");
        for &x in nbrs {
            assert!(g.neighbors(x).unwrap().contains(&v), "asymmetric edge {v}-{x}");
        }
    }
}

fn well_formed(m: &AdjMatrix) -> bool {
    m.is_symmetric() && m.has_zero_diagonal()
}

fn all_pairs(n: usize) -> BTreeSet<(usize, usize)> {
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
}

// --- multigraph ----------------------------------------------------------------

proptest! {
    #[test]
    fn matrices_symmetric_zero_diagonal((n, graphs) in multigraphs()) {
        prop_assert!(well_formed(&union_adjacency(n, &graphs).unwrap()));
        prop_assert!(well_formed(&simultaneous_adjacency(n, &graphs).unwrap()));
        let window: BTreeSet<_> = all_pairs(n).into_iter().step_by(2).collect();
        prop_assert!(well_formed(&restricted_simultaneous(n, &graphs, &window).unwrap()));
        for g in &graphs {
            prop_assert!(well_formed(&adjacency_matrix(g)));
        }
    }

    #[test]
    fn union_is_idempotent((n, graphs) in multigraphs()) {
        let u = union_adjacency(n, &graphs).unwrap();
        let mut ug = UserGraph::new(n);
        for ((i, j), m) in u.nonzero_upper() {
            ug.add_edge_with(i, j, u32::try_from(m).unwrap()).unwrap();
        }
        prop_assert_eq!(union_adjacency(n, &[ug]).unwrap(), u);
    }

    #[test]
    fn full_window_is_simultaneous((n, graphs) in multigraphs()) {
        let full = restricted_simultaneous(n, &graphs, &all_pairs(n)).unwrap();
        prop_assert_eq!(full, simultaneous_adjacency(n, &graphs).unwrap());
    }

    #[test]
    fn simultaneous_dominates_union(n in 2..=10usize, t in 0..8usize, p in 0.0..=1.0f64, seed in any::<u64>()) {
        let ts = generate_tasks(n, t, p, &mut rng(seed)).unwrap();
        let graphs = ts.to_user_graphs();
        let u = union_adjacency(n, &graphs).unwrap();
        let s = simultaneous_adjacency(n, &graphs).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(s.get(i, j) >= u.get(i, j));
                prop_assert_eq!(s.get(i, j) == 0, u.get(i, j) == 0);
            }
        }
    }
}

// --- topology ------------------------------------------------------------------

/// Simple user paths from `i` to `j` with at most `max_hops` allowed hops.
fn brute_paths(net: &GridNetwork, i: usize, j: usize, max_hops: usize) -> Vec<Vec<usize>> {
    fn go(net: &GridNetwork, path: &mut Vec<usize>, j: usize, max_hops: usize, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        if last == j {
            out.push(path.clone());
            return;
        }
        if path.len() > max_hops {
            return;
        }
        for v in 0..net.n_users() {
            if !path.contains(&v) && net.edge_allowed(last, v).unwrap() {
                path.push(v);
                go(net, path, j, max_hops, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(net, &mut vec![i], j, max_hops, &mut out);
    out
}

fn length(net: &GridNetwork, path: &[usize]) -> u32 {
    path.windows(2)
        .map(|w| net.users()[w[0]].manhattan(net.users()[w[1]]))
        .sum()
}

proptest! {
    #[test]
    fn distance_symmetric(net in network(10, 7)) {
        for i in 0..net.n_users() {
            for j in (0..net.n_users()).filter(|&j| j != i) {
                prop_assert_eq!(net.user_distance(i, j).unwrap(), net.user_distance(j, i).unwrap());
            }
        }
    }

    #[test]
    fn constrained_path_minimal(net in network(8, 3), seed in any::<u64>()) {
        let n = net.n_users();
        for i in 0..n {
            for j in (i + 1)..n {
                let got = net.constrained_path(i, j, &mut rng(seed)).unwrap();
                let again = net.constrained_path(i, j, &mut rng(seed)).unwrap();
                prop_assert_eq!(&got, &again);
                let brute = brute_paths(&net, i, j, 4);
                match got {
                    None => prop_assert!(brute.is_empty()),
                    Some(path) => {
                        prop_assert_eq!(path.first(), Some(&i));
                        prop_assert_eq!(path.last(), Some(&j));
                        for w in path.windows(2) {
                            prop_assert!(net.edge_allowed(w[0], w[1]).unwrap());
                        }
                        let hops = path.len() - 1;
                        for b in &brute {
                            prop_assert!(b.len() > hops);
                            if b.len() - 1 == hops {
                                prop_assert!(length(&net, b) >= length(&net, &path));
                            }
                        }
                    }
                }
            }
        }
    }
}

// --- graphstate ------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Rewrite {
    Lc(usize),
    Z(usize),
    Y(usize),
    X(usize, usize),
    Merge(usize, usize),
}

fn rewrite() -> impl Strategy<Value = Rewrite> {
    prop_oneof![
        any::<usize>().prop_map(Rewrite::Lc),
        any::<usize>().prop_map(Rewrite::Z),
        any::<usize>().prop_map(Rewrite::Y),
        (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Rewrite::X(a, b)),
        (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Rewrite::Merge(a, b)),
    ]
}

fn apply(g: &QubitGraph, op: &Rewrite) -> Option<QubitGraph> {
    let qs: Vec<_> = g.qubits().collect();
    if qs.is_empty() {
        return None;
    }
    let pick = |k: usize| qs[k % qs.len()];
    Some(match *op {
        Rewrite::Lc(k) => g.local_complement(pick(k)).unwrap(),
        Rewrite::Z(k) => g.measure_z(pick(k)).unwrap(),
        Rewrite::Y(k) => g.measure_y(pick(k)).unwrap(),
        Rewrite::X(k, h) => {
            let v = pick(k);
            let nbrs: Vec<_> = g.neighbors(v).unwrap().iter().copied().collect();
            let helper = if nbrs.is_empty() { v } else { nbrs[h % nbrs.len()] };
            g.measure_x(v, helper).unwrap()
        }
        Rewrite::Merge(a, b) => {
            let (u, v) = (pick(a), pick(b));
            if u == v {
                return Some(g.clone());
            }
            g.merge(u, v).unwrap().0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn rewrites_keep_graphs_simple(g in qubit_graph(12), ops in prop::collection::vec(rewrite(), 1..6)) {
        let mut g = g;
        for op in &ops {
            match apply(&g, op) {
                Some(next) => g = next,
                None => break,
            }
            assert_simple(&g);
        }
    }
}

proptest! {
    #[test]
    fn local_complement_is_involution(g in qubit_graph(12), k in any::<usize>()) {
        let qs: Vec<_> = g.qubits().collect();
        let v = qs[k % qs.len()];
        prop_assert_eq!(g.local_complement(v).unwrap().local_complement(v).unwrap(), g);
    }

    #[test]
    fn z_measurements_commute(g in qubit_graph(12), seed in any::<u64>()) {
        // greedy independent set in a random order
        let mut qs: Vec<_> = g.qubits().collect();
        qs.shuffle(&mut rng(seed));
        let mut set = Vec::new();
        for q in qs {
            if set.iter().all(|&s| !g.has_edge(s, q)) {
                set.push(q);
            }
        }
        let measure = |order: &[usize]| {
            order.iter().fold(g.clone(), |acc, &v| acc.measure_z(v).unwrap())
        };
        let forward = measure(&set);
        set.reverse();
        prop_assert_eq!(measure(&set), forward);
    }
}

// --- oracle ------------------------------------------------------------------------

proptest! {
    #[test]
    fn tableau_stabilizes_vector(g in qubit_graph(8)) {
        let sv = graph_state_vector(&g).unwrap();
        let tab = graph_state_tableau(&g);
        prop_assert!(tab.is_valid());
        prop_assert!(tab.stabilizes(&sv, 1e-10));
    }

    #[test]
    fn projections_are_normalized(g in qubit_graph(7), k in any::<usize>(), b in 0..3usize) {
        let sv = graph_state_vector(&g).unwrap();
        let qs: Vec<_> = g.qubits().collect();
        let v = qs[k % qs.len()];
        let basis = [Basis::X, Basis::Y, Basis::Z][b];
        if let Ok(p) = project_pauli(&sv, basis, v) {
            prop_assert!((p.norm() - 1.0).abs() < 1e-10);
        }
        if qs.len() > 1 {
            let u = qs[(k + 1) % qs.len()];
            if let Ok(p) = project_merge(&sv, u, v) {
                prop_assert!((p.norm() - 1.0).abs() < 1e-10);
            }
        }
    }
}

// --- checker -------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedules_replay_to_tasks(net in network(8, 4), seed in any::<u64>(), s in 0..4usize) {
        let n = net.n_users();
        let ts = generate_tasks(n, n - 1, 0.8, &mut rng(seed)).unwrap();
        let plan = merging_algorithm(&build(Setting::ALL[s], &ts, &net, &mut rng(seed)).unwrap()).unwrap();
        let report = network_success(&plan).unwrap();
        prop_assert_eq!(report.failures, plan.infeasible_tasks.len());
        for (k, sch) in report.schedules.iter().enumerate() {
            if let Some(sch) = sch {
                prop_assert!(sch.verify(&plan.state, &ts.tasks()[k]).is_ok());
            }
        }
        // same question asked directly
        for (k, task) in ts.tasks().iter().enumerate().filter(|(k, _)| !plan.infeasible_tasks.contains(k)) {
            let sch = satisfy(&plan.state, task, plan.sed_choice[k]).unwrap();
            prop_assert!(sch.is_some());
        }
    }
}
