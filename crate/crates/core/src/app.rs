//! Command-line front end: scenario configuration, the `qresource`
//! subcommands and their exit codes.
//!
//! Users and tasks are 0-based in every file format. Console output uses
//! 1-based user labels.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checker::satisfy;
use crate::error::{Error, Result};
use crate::harness::{run_scenario_with_threads, summarize, to_csv, Scenario, SweepKind};
use crate::oracle::exhaustive_sweep;
use crate::planner::{build, merging_algorithm, ResourcePlan, Setting};
use crate::taskgen::{example_task_set, generate_tasks, Task, TaskSet};
use crate::topology::{Coord, GridNetwork, EXAMPLE_USERS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSATISFIED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STRICT_INFEASIBLE: i32 = 3;

const DEFAULT_P: f64 = 0.8;
const EXAMPLE_D: u32 = 2;

// --- configuration ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    pub edge_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Defaults to one fewer than the number of users.
    #[serde(default)]
    pub n_tasks: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_p() -> f64 {
    DEFAULT_P
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSource {
    Inline(Vec<Task>),
    Generator(GeneratorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub values: Vec<u64>,
    pub trials_per_point: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

/// Scenario file. See `schema/scenario.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub users: Vec<[u32; 2]>,
    #[serde(rename = "D")]
    pub d: u32,
    #[serde(default)]
    pub tasks: Option<TaskSource>,
    #[serde(default)]
    pub settings: Option<Vec<Setting>>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl ScenarioConfig {
    /// The six-user reference network with its four-task set.
    pub fn example() -> Self {
        Self {
            grid: GridConfig {
                width: 5,
                height: 5,
                edge_km: 200.0,
            },
            users: EXAMPLE_USERS.iter().map(|c| [c.x, c.y]).collect(),
            d: EXAMPLE_D,
            tasks: Some(TaskSource::Inline(example_task_set().tasks().to_vec())),
            settings: None,
            sweep: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read(path)?)
    }

    pub fn network(&self) -> Result<GridNetwork> {
        let users = self.users.iter().map(|&[x, y]| Coord::new(x, y)).collect();
        GridNetwork::new(self.grid.width, self.grid.height, self.grid.edge_km, users, self.d)
    }

    /// The task set named by `tasks`; generated sets use the generator seed.
    pub fn task_set(&self) -> Result<TaskSet> {
        let n = self.users.len();
        match &self.tasks {
            Some(TaskSource::Inline(tasks)) => TaskSet::new(n, tasks.clone()),
            Some(TaskSource::Generator(g)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                generate_tasks(n, g.n_tasks.unwrap_or(n.saturating_sub(1)), g.p, &mut rng)
            }
            None => Err(Error::Config("scenario has no tasks".into())),
        }
    }

    pub fn settings(&self) -> Vec<Setting> {
        self.settings.clone().unwrap_or_else(|| Setting::ALL.to_vec())
    }

    /// Monte-Carlo scenario; `seed` overrides the generator seed.
    pub fn scenario(&self, seed: Option<u64>) -> Result<Scenario> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("scenario has no sweep".into()))?;
        let (p, n_tasks, gen_seed) = match &self.tasks {
            Some(TaskSource::Generator(g)) => (g.p, g.n_tasks, g.seed),
            Some(TaskSource::Inline(_)) => {
                return Err(Error::Config(
                    "simulation needs a task generator, not inline tasks".into(),
                ))
            }
            None => (DEFAULT_P, None, 0),
        };
        let sc = Scenario {
            net: self.network()?,
            sweep: sweep.kind,
            sweep_values: sweep.values.clone(),
            trials_per_point: sweep.trials_per_point,
            p,
            d: self.d,
            n_tasks,
            settings: self.settings(),
            master_seed: seed.unwrap_or(gen_seed),
        };
        sc.validate()?;
        Ok(sc)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

// --- command line -----------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "qresource",
    version,
    about = "Plan, merge and check resource states for quantum networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and merge a resource state for one task set.
    Plan(PlanArgs),
    /// Check that a stored plan serves its tasks.
    Check(CheckArgs),
    /// Run a Monte-Carlo sweep and write per-trial CSV.
    Simulate(SimulateArgs),
    /// Draw a random task set.
    Taskgen(TaskgenArgs),
    /// Check the rewrite rules against the state-vector oracle.
    VerifyRules(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "example")]
    pub config: Option<PathBuf>,
    /// Use the six-user reference network and tasks.
    #[arg(long)]
    pub example: bool,
    /// Distance threshold, overriding the scenario.
    #[arg(long = "D", value_name = "D")]
    pub d: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "BM")]
    pub setting: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 3 when some task cannot be routed.
    #[arg(long)]
    pub strict: bool,
    /// Skip the merging step.
    #[arg(long)]
    pub no_merge: bool,
    /// Write the plan as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Plan JSON written by `plan`.
    pub plan: PathBuf,
    /// Task set JSON to check instead of the plan's own tasks.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Check only this task (1-based).
    #[arg(long)]
    pub task: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; defaults to the generator seed of the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "D", value_name = "D")]
    pub d: Option<u32>,
    /// CSV destination, overriding the scenario; `-` for stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON destination, overriding the scenario.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Worker threads; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct TaskgenArgs {
    #[arg(long, default_value_t = 6)]
    pub users: usize,
    /// Defaults to one fewer than the number of users.
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_P)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest graph size for the exhaustive sweep.
    #[arg(long, default_value_t = 5)]
    pub max_n: usize,
}

/// Outcome of a command: console text and exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: EXIT_OK }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            let _ = out.write_all(o.stdout.as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Plan(a) => cmd_plan(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Taskgen(a) => cmd_taskgen(a),
        Command::VerifyRules(a) => cmd_verify(a),
    }
}

fn load_source(src: &Source) -> Result<ScenarioConfig> {
    let mut cfg = match (&src.config, src.example) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, true) => ScenarioConfig::example(),
        (None, false) => return Err(Error::Config("pass --config FILE or --example".into())),
    };
    if let Some(d) = src.d {
        cfg.d = d;
    }
    Ok(cfg)
}

/// Builds (and by default merges) the plan for one setting.
pub fn make_plan(cfg: &ScenarioConfig, setting: Setting, seed: u64, merge: bool) -> Result<ResourcePlan> {
    let net = cfg.network()?;
    let ts = cfg.task_set()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = build(setting, &ts, &net, &mut rng)?;
    if merge {
        merging_algorithm(&plan)
    } else {
        Ok(plan)
    }
}

fn user_pair(p: (usize, usize)) -> String {
    format!("({},{})", p.0 + 1, p.1 + 1)
}

/// Human-readable plan summary.
pub fn describe_plan(plan: &ResourcePlan) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "setting {}", plan.setting);
    if let Some(d) = plan.threshold {
        let _ = writeln!(s, "D={d}");
    }
    let _ = writeln!(s, "Q={} \u{2192} {}", plan.q_pre, plan.q());
    if plan.setting.uses_sed() {
        let choices: Vec<String> = plan
            .sed_choice
            .iter()
            .enumerate()
            .map(|(k, c)| format!("t{}:{}", k + 1, c.map_or_else(|| "-".to_string(), user_pair)))
            .collect();
        let _ = writeln!(s, "satellite pairs {}", choices.join(" "));
    }
    if plan.setting.uses_ec() {
        if plan.ec_paths.is_empty() {
            let _ = writeln!(s, "routed pairs none");
        }
        for p in &plan.ec_paths {
            let hops: Vec<String> = p.path.iter().map(|u| (u + 1).to_string()).collect();
            let _ = writeln!(s, "routed {} via {}", user_pair(p.pair), hops.join("-"));
        }
    }
    if plan.infeasible_tasks.is_empty() {
        let _ = writeln!(s, "infeasible tasks none");
    } else {
        let ks: Vec<String> = plan.infeasible_tasks.iter().map(|k| (k + 1).to_string()).collect();
        let _ = writeln!(s, "infeasible tasks {}", ks.join(" "));
    }
    s
}

fn cmd_plan(a: &PlanArgs) -> Result<Outcome> {
    let cfg = load_source(&a.source)?;
    let setting: Setting = a.setting.parse()?;
    let plan = make_plan(&cfg, setting, a.seed, !a.no_merge)?;
    if let Some(path) = &a.out {
        let json = serde_json::to_string_pretty(&plan).map_err(|e| Error::Config(e.to_string()))?;
        write_file(path, &json)?;
    }
    let code = if a.strict && !plan.is_feasible() {
        EXIT_STRICT_INFEASIBLE
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        stdout: describe_plan(&plan),
        code,
    })
}

fn cmd_check(a: &CheckArgs) -> Result<Outcome> {
    let plan: ResourcePlan =
        serde_json::from_str(&read(&a.plan)?).map_err(|e| Error::Config(format!("{}: {e}", a.plan.display())))?;
    let tasks = match &a.tasks {
        Some(path) => {
            let ts: TaskSet =
                serde_json::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ts.tasks().to_vec()
        }
        None => plan.tasks.tasks().to_vec(),
    };
    let selected: Vec<usize> = match a.task {
        Some(0) => return Err(Error::Config("task numbers start at 1".into())),
        Some(k) if k > tasks.len() => {
            return Err(Error::Config(format!("task {k} out of range (1..={})", tasks.len())))
        }
        Some(k) => vec![k - 1],
        None => (0..tasks.len()).collect(),
    };
    let mut s = String::new();
    let mut failed = Vec::new();
    for k in selected {
        let task = &tasks[k];
        let known = plan.tasks.tasks().iter().position(|t| t == task);
        let sed = known.and_then(|i| plan.sed_choice.get(i).copied().flatten());
        let schedule = if known.is_some_and(|i| plan.infeasible_tasks.contains(&i)) {
            None
        } else {
            satisfy(&plan.state, task, sed)?
        };
        match schedule {
            Some(sch) => {
                let _ = writeln!(s, "task {}: {}", k + 1, sch.notation(&plan.state));
            }
            None => {
                let _ = writeln!(s, "task {}: unsatisfied", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if failed.is_empty() {
        return Ok(Outcome::ok(s));
    }
    let list: Vec<String> = failed.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(s, "failed tasks {}", list.join(" "));
    Ok(Outcome {
        stdout: s,
        code: EXIT_UNSATISFIED,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let mut cfg = ScenarioConfig::load(&a.config)?;
    if let Some(d) = a.d {
        cfg.d = d;
    }
    let sc = cfg.scenario(a.seed)?;
    let records = run_scenario_with_threads(&sc, a.threads)?;
    let csv = to_csv(&records);
    let output = cfg.output.clone().unwrap_or_default();
    let csv_path = a.out.clone().or(output.csv);
    let summary_path = a.summary.clone().or(output.summary);
    let mut stdout = String::new();
    match csv_path {
        Some(p) if p.as_os_str() != "-" => write_file(&p, &csv)?,
        _ => stdout.push_str(&csv),
    }
    if let Some(p) = summary_path {
        let rows = summarize(&records)?;
        let json = serde_json::to_string_pretty(&rows).map_err(|e| Error::Config(e.to_string()))?;
        write_file(&p, &json)?;
    }
    Ok(Outcome::ok(stdout))
}

fn cmd_taskgen(a: &TaskgenArgs) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let ts = generate_tasks(a.users, a.tasks.unwrap_or(a.users.saturating_sub(1)), a.p, &mut rng)?;
    let json = serde_json::to_string_pretty(&ts).map_err(|e| Error::Config(e.to_string()))?;
    match &a.out {
        Some(p) => {
            write_file(p, &json)?;
            Ok(Outcome::ok(String::new()))
        }
        None => Ok(Outcome::ok(json + "\n")),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let report = exhaustive_sweep(a.max_n)?;
    let code = if report.all_passed() { EXIT_OK } else { EXIT_UNSATISFIED };
    Ok(Outcome {
        stdout: format!("{}\n", report.summary()),
        code,
    })
}
