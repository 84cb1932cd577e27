//! Monte-Carlo experiments: sweeps over task draws, user placements, user
//! counts and task-set sizes, with deterministic per-trial seeding.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::network_success;
use crate::error::{Error, Result};
use crate::planner::{build, merging_algorithm, Setting};
use crate::taskgen::generate_tasks;
use crate::topology::{Coord, GridNetwork};

pub const CSV_HEADER: &str = "sweep,trial,setting,q_pre,q_post,tasks_total,tasks_failed,set_failed,seed";

const PLACEMENT_STREAM: u64 = 0x706c_6163_656d_656e;
const TASK_STREAM: u64 = 0;

/// What varies along the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Fixed network, fresh task sets; the value is only a label.
    TaskDraws,
    /// One random placement of the template's user count per value.
    Positions,
    /// The value is the number of users.
    NUsers,
    /// The value is the number of tasks.
    NTasks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub net: GridNetwork,
    pub sweep: SweepKind,
    pub sweep_values: Vec<u64>,
    pub trials_per_point: usize,
    pub p: f64,
    pub d: u32,
    /// Tasks per set; `None` means one fewer than the number of users.
    pub n_tasks: Option<usize>,
    pub settings: Vec<Setting>,
    pub master_seed: u64,
}

impl Scenario {
    /// Fixed reference placement, `D = 2`, `p = 0.8`, all four settings.
    pub fn example(sweep: SweepKind, sweep_values: Vec<u64>, trials_per_point: usize, master_seed: u64) -> Self {
        Self {
            net: GridNetwork::example(2),
            sweep,
            sweep_values,
            trials_per_point,
            p: 0.8,
            d: 2,
            n_tasks: None,
            settings: Setting::ALL.to_vec(),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::Config("sweep values must not be empty".into()));
        }
        if self.settings.is_empty() {
            return Err(Error::Config("at least one setting is required".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidProbability(self.p));
        }
        let cells = u64::from(self.net.width()) * u64::from(self.net.height());
        if self.sweep == SweepKind::NUsers {
            if let Some(&v) = self.sweep_values.iter().find(|&&v| v < 2 || v > cells) {
                return Err(Error::Config(format!("cannot place {v} users on {cells} devices")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub sweep: u64,
    pub trial: usize,
    pub setting: Setting,
    pub q_pre: usize,
    pub q_post: usize,
    pub tasks_total: usize,
    pub tasks_failed: usize,
    pub set_failed: bool,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep index `index`. Each input passes through
/// its own mixing round, so new sweep points or trials leave existing seeds
/// unchanged.
pub fn derive_seed(master: u64, index: u64, trial: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ index) ^ trial)
}

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)))
}

fn all_cells(net: &GridNetwork) -> Vec<Coord> {
    (0..net.height())
        .flat_map(|y| (0..net.width()).map(move |x| Coord::new(x, y)))
        .collect()
}

/// Network for one sweep point.
fn network_for(sc: &Scenario, index: usize, value: u64) -> Result<GridNetwork> {
    let template = &sc.net;
    let users = match sc.sweep {
        SweepKind::TaskDraws | SweepKind::NTasks => template.users().to_vec(),
        SweepKind::Positions => {
            let mut cells = all_cells(template);
            let mut rng = sub_rng(derive_seed(sc.master_seed, index as u64, 0), PLACEMENT_STREAM);
            cells.shuffle(&mut rng);
            cells.truncate(template.n_users());
            cells
        }
        SweepKind::NUsers => {
            // template users first, then a fixed shuffle of the free cells,
            // so larger networks extend smaller ones
            let n = value as usize;
            let mut users = template.users().to_vec();
            let mut free: Vec<Coord> = all_cells(template).into_iter().filter(|c| !users.contains(c)).collect();
            free.shuffle(&mut sub_rng(splitmix(sc.master_seed), PLACEMENT_STREAM));
            users.extend(free);
            users.truncate(n);
            users
        }
    };
    GridNetwork::new(
        template.width(),
        template.height(),
        template.edge_length_km(),
        users,
        sc.d,
    )
}

fn run_trial(
    sc: &Scenario,
    net: &GridNetwork,
    index: usize,
    value: u64,
    trial: usize,
) -> Result<Vec<ExperimentRecord>> {
    let seed = derive_seed(sc.master_seed, index as u64, trial as u64);
    let n_tasks = match sc.sweep {
        SweepKind::NTasks => value as usize,
        _ => sc.n_tasks.unwrap_or(net.n_users() - 1),
    };
    let tasks = generate_tasks(net.n_users(), n_tasks, sc.p, &mut sub_rng(seed, TASK_STREAM))?;
    let mut out = Vec::with_capacity(sc.settings.len());
    for &setting in &sc.settings {
        let stream = 1 + Setting::ALL.iter().position(|&s| s == setting).unwrap() as u64;
        let plan = build(setting, &tasks, net, &mut sub_rng(seed, stream))?;
        let merged = merging_algorithm(&plan)?;
        let report = network_success(&merged)?;
        out.push(ExperimentRecord {
            sweep: value,
            trial,
            setting,
            q_pre: plan.q_pre,
            q_post: merged.q(),
            tasks_total: tasks.len(),
            tasks_failed: report.failures,
            set_failed: !report.is_successful(),
            seed,
        });
    }
    Ok(out)
}

/// Runs every trial of every sweep point. Output order is canonical: sweep
/// index, then trial, then the scenario's setting order.
pub fn run_scenario(sc: &Scenario) -> Result<Vec<ExperimentRecord>> {
    sc.validate()?;
    let nets = sc
        .sweep_values
        .iter()
        .enumerate()
        .map(|(k, &v)| network_for(sc, k, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..sc.sweep_values.len())
        .flat_map(|k| (0..sc.trials_per_point).map(move |t| (k, t)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(k, t)| run_trial(sc, &nets[k], k, sc.sweep_values[k], t))
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// `run_scenario` on a dedicated pool of `threads` workers.
pub fn run_scenario_with_threads(sc: &Scenario, threads: usize) -> Result<Vec<ExperimentRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_scenario(sc))
}

pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.sweep,
            r.trial,
            r.setting,
            r.q_pre,
            r.q_post,
            r.tasks_total,
            r.tasks_failed,
            u8::from(r.set_failed),
            r.seed
        )
        .unwrap();
    }
    s
}

/// Aggregate over all trials of one setting at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep: u64,
    pub setting: Setting,
    pub trials: usize,
    pub q_pre_sum: u64,
    pub q_post_sum: u64,
    pub q_post_mean: f64,
    pub q_post_min: usize,
    pub q_post_max: usize,
    pub tasks_failed: usize,
    pub sets_failed: usize,
}

impl SummaryRow {
    pub fn q_pre_mean(&self) -> f64 {
        self.q_pre_sum as f64 / self.trials as f64
    }
}

/// Rows sorted by sweep value, then setting.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    let mut groups: BTreeMap<(u64, Setting), SummaryRow> = BTreeMap::new();
    for r in records {
        let row = groups.entry((r.sweep, r.setting)).or_insert(SummaryRow {
            sweep: r.sweep,
            setting: r.setting,
            trials: 0,
            q_pre_sum: 0,
            q_post_sum: 0,
            q_post_mean: 0.0,
            q_post_min: usize::MAX,
            q_post_max: 0,
            tasks_failed: 0,
            sets_failed: 0,
        });
        row.trials += 1;
        row.q_pre_sum += r.q_pre as u64;
        row.q_post_sum += r.q_post as u64;
        row.q_post_min = row.q_post_min.min(r.q_post);
        row.q_post_max = row.q_post_max.max(r.q_post);
        row.tasks_failed += r.tasks_failed;
        row.sets_failed += usize::from(r.set_failed);
    }
    Ok(groups
        .into_values()
        .map(|mut row| {
            row.q_post_mean = row.q_post_sum as f64 / row.trials as f64;
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_draw_cardinality() {
        let sc = Scenario::example(SweepKind::TaskDraws, (1..=10).collect(), 1, 7);
        let records = run_scenario(&sc).unwrap();
        assert_eq!(records.len(), 40);
        assert!(records.iter().all(|r| r.tasks_total == 5 && r.q_post <= r.q_pre));
    }

    #[test]
    fn seeds_are_stable_under_extension() {
        let a = Scenario::example(SweepKind::NTasks, vec![2, 3], 2, 11);
        let mut b = a.clone();
        b.sweep_values.push(4);
        b.trials_per_point = 3;
        let ra = run_scenario(&a).unwrap();
        let rb = run_scenario(&b).unwrap();
        for r in &ra {
            assert!(rb.contains(r));
        }
    }

    #[test]
    fn nested_user_placements() {
        let sc = Scenario::example(SweepKind::NUsers, vec![6, 8], 1, 3);
        let small = network_for(&sc, 0, 6).unwrap();
        let large = network_for(&sc, 1, 8).unwrap();
        assert_eq!(small.users(), &large.users()[..6]);
        assert_eq!(small.users(), GridNetwork::example(2).users());
    }

    #[test]
    fn positions_are_distinct() {
        let sc = Scenario::example(SweepKind::Positions, vec![0, 1, 2], 1, 5);
        let nets: Vec<_> = (0..3).map(|k| network_for(&sc, k, k as u64).unwrap()).collect();
        assert_ne!(nets[0].users(), nets[1].users());
        assert_eq!(nets[0].users(), network_for(&sc, 0, 0).unwrap().users());
    }

    #[test]
    fn csv_shape() {
        let sc = Scenario::example(SweepKind::TaskDraws, vec![1], 2, 0);
        let csv = to_csv(&run_scenario(&sc).unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 9);
        assert!(csv.ends_with('\n') && !csv.contains("\r") && !csv.contains(" \n"));
        assert!(lines[1].starts_with("1,0,BM,"));
    }

    #[test]
    fn summary_of_single_record() {
        let r = ExperimentRecord {
            sweep: 3,
            trial: 0,
            setting: Setting::Sed,
            q_pre: 8,
            q_post: 5,
            tasks_total: 4,
            tasks_failed: 1,
            set_failed: true,
            seed: 9,
        };
        let rows = summarize(&[r]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].q_post_mean, 5.0);
        assert_eq!(rows[0].sets_failed, 1);
        assert_eq!(summarize(&[]), Err(Error::Empty("records")));
    }

    #[test]
    fn invalid_scenarios() {
        let mut sc = Scenario::example(SweepKind::TaskDraws, vec![], 1, 0);
        assert!(run_scenario(&sc).is_err());
        sc.sweep_values = vec![1];
        sc.trials_per_point = 0;
        assert!(run_scenario(&sc).is_err());
        let sc = Scenario::example(SweepKind::NUsers, vec![26], 1, 0);
        assert!(run_scenario(&sc).is_err());
    }
}
