#![allow(dead_code)]

use std::collections::BTreeMap;

use qresource_core::checker::network_success;
use qresource_core::planner::{build, merging_algorithm, Setting};
use qresource_core::taskgen::generate_tasks;
use qresource_core::topology::{Coord, GridNetwork};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one setting on one random instance.
#[derive(Debug, Clone, Copy)]
pub struct SettingRun {
    pub q_pre: usize,
    pub q_post: usize,
    pub feasible: bool,
    pub routed_pairs: usize,
    pub failures: usize,
    pub infeasible: usize,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub n: usize,
    pub d: u32,
    pub runs: BTreeMap<Setting, SettingRun>,
}

/// Random 5x5 placement with N in [4, 10], D in [1, 7], N-1 tasks at p = 0.8.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=10);
    let d = rng.random_range(1..=7);
    let mut cells: Vec<Coord> = (0..5).flat_map(|y| (0..5).map(move |x| Coord::new(x, y))).collect();
    cells.shuffle(&mut rng);
    cells.truncate(n);
    let net = GridNetwork::new(5, 5, 200.0, cells, d).unwrap();
    let ts = generate_tasks(n, n - 1, 0.8, &mut rng).unwrap();
    let mut runs = BTreeMap::new();
    for s in Setting::ALL {
        let plan = build(s, &ts, &net, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let merged = merging_algorithm(&plan).unwrap();
        let report = network_success(&merged).unwrap();
        runs.insert(
            s,
            SettingRun {
                q_pre: plan.q_pre,
                q_post: merged.q(),
                feasible: plan.is_feasible(),
                routed_pairs: plan.ec_paths.len(),
                failures: report.failures,
                infeasible: merged.infeasible_tasks.len(),
            },
        );
    }
    Instance { seed, n, d, runs }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
