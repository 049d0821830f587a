//! Command-line interface: topology generators, experiment sweeps, the
//! property-suite runner, packing reports, and a predicate-table debugger.

use crate::analysis::{self, AttractorTarget, CheckMode, StepProperty};
use crate::daemon::{
    self, DaemonPolicy, ExecOptions, StopCondition, StopReason, TargetSelection, Trace,
};
use crate::model::{
    self, build_topology, pack, unpack, Color, Configuration, ModelError, NodeId, Phase,
    ProcessState, Status, Topology,
};
use crate::predicates::{self, PredicateName};
use crate::rules::GuardMode;
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Daemon(#[from] crate::daemon::DaemonError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("could not sample a connected graph in {0} attempts")]
    ConnectivityRetriesExhausted(u32),
    #[error("{0} trials failed their stop condition or a property check")]
    TrialsFailed(u64),
    #[error("{0} property violations found")]
    ViolationsFound(u64),
}

/// Topology selector, e.g. `path:5`, `grid:3x4`, `random:12,0.3`,
/// `file:topo.json`.
#[derive(Clone, Debug, PartialEq)]
pub enum TopologyKind {
    Path(usize),
    Cycle(usize),
    Star(usize),
    Grid(usize, usize),
    RandomConnected(usize, f64),
    Complete(usize),
    File(PathBuf),
}

impl TopologyKind {
    pub fn label(&self) -> String {
        match self {
            TopologyKind::Path(n) => format!("path:{n}"),
            TopologyKind::Cycle(n) => format!("cycle:{n}"),
            TopologyKind::Star(n) => format!("star:{n}"),
            TopologyKind::Grid(w, h) => format!("grid:{w}x{h}"),
            TopologyKind::RandomConnected(n, p) => format!("random:{n},{p}"),
            TopologyKind::Complete(n) => format!("complete:{n}"),
            TopologyKind::File(path) => format!("file:{}", path.display()),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("expected KIND:ARGS, got {s:?}"))?;
        let parse_n = |a: &str| -> Result<usize, String> {
            a.parse::<usize>().map_err(|e| format!("bad size {a:?}: {e}"))
        };
        match kind {
            "path" => Ok(TopologyKind::Path(parse_n(arg)?)),
            "cycle" => Ok(TopologyKind::Cycle(parse_n(arg)?)),
            "star" => Ok(TopologyKind::Star(parse_n(arg)?)),
            "complete" => Ok(TopologyKind::Complete(parse_n(arg)?)),
            "grid" => {
                let (w, h) = arg
                    .split_once('x')
                    .ok_or_else(|| format!("expected grid:WxH, got {arg:?}"))?;
                Ok(TopologyKind::Grid(parse_n(w)?, parse_n(h)?))
            }
            "random" => {
                let (n, p) = arg
                    .split_once(',')
                    .ok_or_else(|| format!("expected random:N,P, got {arg:?}"))?;
                let p: f64 = p.parse().map_err(|e| format!("bad probability: {e}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("edge probability {p} outside [0,1]"));
                }
                Ok(TopologyKind::RandomConnected(parse_n(n)?, p))
            }
            "file" => Ok(TopologyKind::File(PathBuf::from(arg))),
            other => Err(format!("unknown topology kind {other:?}")),
        }
    }
}

/// Generates the selected topology; random graphs resample until connected
/// (bounded retries), deriving edge coins from `seed`.
pub fn generate_topology(kind: &TopologyKind, seed: u64) -> Result<Topology, CliError> {
    let line = |n: usize, closed: bool| -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if closed && n > 2 {
            edges.push((n - 1, 0));
        }
        edges
    };
    let topo = match kind {
        TopologyKind::Path(n) => {
            require(*n >= 2, "path needs at least 2 nodes")?;
            build_topology(&line(*n, false), 0)?
        }
        TopologyKind::Cycle(n) => {
            require(*n >= 3, "cycle needs at least 3 nodes")?;
            build_topology(&line(*n, true), 0)?
        }
        TopologyKind::Star(n) => {
            require(*n >= 2, "star needs at least 2 nodes")?;
            let edges: Vec<_> = (1..*n).map(|i| (0, i)).collect();
            build_topology(&edges, 0)?
        }
        TopologyKind::Grid(w, h) => {
            require(*w >= 1 && *h >= 1 && *w * *h >= 2, "grid needs at least 2 nodes")?;
            let id = |x: usize, y: usize| y * w + x;
            let mut edges = Vec::new();
            for y in 0..*h {
                for x in 0..*w {
                    if x + 1 < *w {
                        edges.push((id(x, y), id(x + 1, y)));
                    }
                    if y + 1 < *h {
                        edges.push((id(x, y), id(x, y + 1)));
                    }
                }
            }
            build_topology(&edges, 0)?
        }
        TopologyKind::Complete(n) => {
            require(*n >= 2, "complete graph needs at least 2 nodes")?;
            let mut edges = Vec::new();
            for a in 0..*n {
                for b in a + 1..*n {
                    edges.push((a, b));
                }
            }
            build_topology(&edges, 0)?
        }
        TopologyKind::RandomConnected(n, p) => {
            require(*n >= 2, "random graph needs at least 2 nodes")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            const RETRIES: u32 = 1000;
            let mut found = None;
            for _ in 0..RETRIES {
                let mut edges = Vec::new();
                for a in 0..*n {
                    for b in a + 1..*n {
                        if rng.gen_bool(*p) {
                            edges.push((a, b));
                        }
                    }
                }
                match build_topology(&edges, 0) {
                    Ok(t) => {
                        found = Some(t);
                        break;
                    }
                    Err(
                        ModelError::Disconnected(_)
                        | ModelError::EmptyEdgeList
                        | ModelError::NonContiguousNodes { .. },
                    ) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            found.ok_or(CliError::ConnectivityRetriesExhausted(RETRIES))?
        }
        TopologyKind::File(path) => read_topology_file(path)?,
    };
    Ok(topo)
}

fn require(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::BadArgument(msg.to_string()))
    }
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    nodes: usize,
    root: NodeId,
    edges: Vec<(NodeId, NodeId)>,
}

pub fn parse_topology_json(text: &str) -> Result<Topology, String> {
    let file: TopologyFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let topo = build_topology(&file.edges, file.root).map_err(|e| e.to_string())?;
    if topo.node_count() != file.nodes {
        return Err(format!(
            "edge list spans {} nodes but the header declares {}",
            topo.node_count(),
            file.nodes
        ));
    }
    Ok(topo)
}

pub fn write_topology_json(topo: &Topology) -> String {
    serde_json::to_string_pretty(&TopologyFile {
        nodes: topo.node_count(),
        root: topo.root(),
        edges: topo.edges(),
    })
    .expect("topology serializes")
}

pub fn read_topology_file(path: &Path) -> Result<Topology, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_topology_json(&text).map_err(|detail| CliError::Parse {
        path: path.to_path_buf(),
        detail,
    })
}

#[derive(Serialize, Deserialize)]
struct NodeStateFile {
    #[serde(rename = "P")]
    parent: Option<NodeId>,
    #[serde(rename = "TS")]
    tree_parent: Option<NodeId>,
    #[serde(rename = "C")]
    color: u8,
    #[serde(rename = "S")]
    status: Status,
    #[serde(rename = "ph")]
    phase: String,
}

pub fn parse_configuration_json(text: &str, topo: &Topology) -> Result<Configuration, String> {
    let map: std::collections::BTreeMap<String, NodeStateFile> =
        serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut states = vec![None; topo.node_count()];
    for (key, ns) in map {
        let node: NodeId = key.parse().map_err(|e| format!("bad node id {key:?}: {e}"))?;
        if node >= topo.node_count() {
            return Err(format!("node {node} outside the topology"));
        }
        let color = Color::from_bit(ns.color).ok_or(format!("bad color {}", ns.color))?;
        let phase = match ns.phase.as_str() {
            "a" => Phase::A,
            "b" => Phase::B,
            other => return Err(format!("bad phase {other:?}")),
        };
        states[node] = Some(ProcessState::new(
            ns.parent,
            ns.tree_parent,
            color,
            ns.status,
            phase,
        ));
    }
    let states: Vec<ProcessState> = states
        .into_iter()
        .enumerate()
        .map(|(u, s)| s.ok_or(format!("node {u} missing from the configuration")))
        .collect::<Result<_, _>>()?;
    let cfg = Configuration::new(states);
    cfg.validate(topo).map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn write_configuration_json(cfg: &Configuration, topo: &Topology) -> String {
    let map: std::collections::BTreeMap<String, NodeStateFile> = topo
        .nodes()
        .map(|u| {
            let st = cfg.state(u);
            (
                u.to_string(),
                NodeStateFile {
                    parent: st.parent,
                    tree_parent: st.tree_parent,
                    color: st.color.as_bit(),
                    status: st.status,
                    phase: match st.phase {
                        Phase::A => "a".to_string(),
                        Phase::B => "b".to_string(),
                    },
                },
            )
        })
        .collect();
    serde_json::to_string_pretty(&map).expect("configuration serializes")
}

pub fn read_configuration_file(path: &Path, topo: &Topology) -> Result<Configuration, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_configuration_json(&text, topo).map_err(|detail| CliError::Parse {
        path: path.to_path_buf(),
        detail,
    })
}

// ---------------------------------------------------------------------------
// Argument grammar

fn parse_daemon(s: &str, adversary_from_file: &dyn Fn(&Path) -> Result<Vec<Vec<NodeId>>, CliError>)
    -> Result<DaemonPolicy, CliError>
{
    Ok(match s {
        "sync" => DaemonPolicy::Synchronous,
        "central-random" => DaemonPolicy::CentralRandom,
        "central-min" => DaemonPolicy::CentralMinId,
        "round-robin" => DaemonPolicy::RoundRobin,
        "weakly-fair" => DaemonPolicy::WeaklyFairQueue,
        other => {
            if let Some(p) = other.strip_prefix("dist-random:") {
                let p: f64 = p
                    .parse()
                    .map_err(|e| CliError::BadArgument(format!("bad probability: {e}")))?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(CliError::BadArgument(format!(
                        "activation probability {p} outside (0,1]"
                    )));
                }
                DaemonPolicy::DistributedRandom { p }
            } else if let Some(path) = other.strip_prefix("adversary:") {
                DaemonPolicy::AdversaryScript {
                    script: adversary_from_file(Path::new(path))?,
                }
            } else {
                return Err(CliError::BadArgument(format!("unknown daemon {other:?}")));
            }
        }
    })
}

fn read_adversary_file(path: &Path) -> Result<Vec<Vec<NodeId>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    daemon::parse_adversary_script(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

fn parse_stop(s: &str) -> Result<StopCondition, CliError> {
    Ok(match s {
        "A1" => StopCondition::Attractor(AttractorTarget::A1),
        "A2" => StopCondition::Attractor(AttractorTarget::A2),
        "A3" => StopCondition::Attractor(AttractorTarget::A3),
        "A4" => StopCondition::Attractor(AttractorTarget::A4),
        "Al" => StopCondition::Attractor(AttractorTarget::Al),
        other => {
            if let Some(n) = other.strip_prefix("rounds:") {
                StopCondition::Rounds(
                    n.parse()
                        .map_err(|e| CliError::BadArgument(format!("bad round count: {e}")))?,
                )
            } else if let Some(n) = other.strip_prefix("constructions:") {
                StopCondition::Constructions(
                    n.parse()
                        .map_err(|e| CliError::BadArgument(format!("bad construction count: {e}")))?,
                )
            } else {
                return Err(CliError::BadArgument(format!("unknown stop condition {other:?}")));
            }
        }
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "stabbfs",
    about = "Simulator and bounded model checker for a self-stabilizing BFS spanning-tree algorithm"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run seeded simulation trials and emit one CSV row per trial.
    Simulate(SimulateArgs),
    /// Run property suites (exhaustive model checking plus trace checks).
    Check(CheckArgs),
    /// Report packed sizes of a configuration and verify the round trip.
    Pack(PackArgs),
    /// Print the full predicate table of a configuration.
    Predicates(PredicatesArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// path:N | cycle:N | star:N | grid:WxH | random:N,P | complete:N | file:PATH
    #[arg(long)]
    pub topology: String,
    /// random | file:PATH
    #[arg(long, default_value = "random")]
    pub init: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// sync | central-random | central-min | dist-random:P | round-robin |
    /// adversary:PATH | weakly-fair
    #[arg(long, default_value = "sync")]
    pub daemon: String,
    /// A1 | A2 | A3 | A4 | Al | rounds:N | constructions:N
    #[arg(long, default_value = "Al")]
    pub stop: String,
    /// Step budget per trial; defaults to 64·n·(round bound to Al).
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | structured
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Write the trace of every trial as JSON lines under this path prefix.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// on | off
    #[arg(long, default_value = "on")]
    pub strict_guards: String,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// p2 | p3 | triangle | star4 | any topology selector
    #[arg(long)]
    pub graph: String,
    /// basics | closures | recovery | stages | languages | all
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enumeration cap for exhaustive suites.
    #[arg(long, default_value_t = model::DEFAULT_ENUMERATION_CAP)]
    pub cap: u128,
    /// Randomized trials for trace-based suites.
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
}

#[derive(Args, Debug)]
pub struct PackArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub topology: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredicatesArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub topology: PathBuf,
}

/// Everything one trial needs; assembled by `cmd_simulate`.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub topology_kind: TopologyKind,
    pub init_file: Option<PathBuf>,
    pub trials: u64,
    pub policy: DaemonPolicy,
    pub seed: u64,
    pub stop: StopCondition,
    pub max_steps: Option<u64>,
    pub guard_mode: GuardMode,
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub n: usize,
    pub diameter: usize,
    pub topology: String,
    pub seed: u64,
    pub policy: String,
    pub stop_reason: StopReason,
    pub rounds_to_a1: Option<u64>,
    pub rounds_to_a2: Option<u64>,
    pub rounds_to_a3: Option<u64>,
    pub rounds_to_a4: Option<u64>,
    pub rounds_to_al: Option<u64>,
    pub max_root_gap: Option<u64>,
    pub construction_rounds: Option<u64>,
    pub max_moves_per_process: Option<u32>,
}

pub const CSV_HEADER: &str = "# stabbfs-sweep v1: rounds are ceiling round indices; construction_rounds and max_moves_per_process aggregate constructions closed after the legitimate set was reached\nn,diameter,topology,seed,policy,stop_reason,rounds_to_a1,rounds_to_a2,rounds_to_a3,rounds_to_a4,rounds_to_al,max_root_gap,construction_rounds,max_moves_per_process";

fn csv_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl TrialRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:?},{},{},{},{},{},{},{},{}",
            self.n,
            self.diameter,
            self.topology,
            self.seed,
            self.policy,
            self.stop_reason,
            csv_cell(&self.rounds_to_a1),
            csv_cell(&self.rounds_to_a2),
            csv_cell(&self.rounds_to_a3),
            csv_cell(&self.rounds_to_a4),
            csv_cell(&self.rounds_to_al),
            csv_cell(&self.max_root_gap),
            csv_cell(&self.construction_rounds),
            csv_cell(&self.max_moves_per_process),
        )
    }
}

/// Default step budget: 64·n·(worst-case rounds to the legitimate set).
pub fn default_step_budget(topo: &Topology) -> u64 {
    let n = topo.node_count() as u64;
    let d = topo.diameter() as u64;
    let bound = 16 * n - 13 + (d + 2) * n * (2 * n + 3);
    64 * n * bound
}

/// Runs one seeded trial and summarizes it as a CSV row.
pub fn run_trial(
    topo: &Topology,
    initial: &Configuration,
    spec: &ExperimentSpec,
    trial_seed: u64,
) -> Result<(TrialRow, Trace), CliError> {
    let opts = ExecOptions {
        max_steps: spec.max_steps.unwrap_or_else(|| default_step_budget(topo)),
        guard_mode: spec.guard_mode,
        target_selection: TargetSelection::MinId,
    };
    let trace = daemon::execute(topo, initial, &spec.policy, trial_seed, &spec.stop, &opts)?;
    let report = analysis::bound_report(&trace, topo);
    let row = TrialRow {
        n: topo.node_count(),
        diameter: topo.diameter(),
        topology: spec.topology_kind.label(),
        seed: trial_seed,
        policy: spec.policy.label().to_string(),
        stop_reason: trace.stop_reason,
        rounds_to_a1: report.rounds_to.a1,
        rounds_to_a2: report.rounds_to.a2,
        rounds_to_a3: report.rounds_to.a3,
        rounds_to_a4: report.rounds_to.a4,
        rounds_to_al: report.rounds_to.al,
        max_root_gap: report.max_root_gap_rounds,
        construction_rounds: report.constructions.iter().map(|c| c.rounds).max(),
        max_moves_per_process: report.constructions.iter().map(|c| c.max_moves).max(),
    };
    Ok((row, trace))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    if args.trials == 0 {
        return Err(CliError::BadArgument("trials must be positive".into()));
    }
    let kind: TopologyKind = args
        .topology
        .parse()
        .map_err(CliError::BadArgument)?;
    let policy = parse_daemon(&args.daemon, &read_adversary_file)?;
    let stop = parse_stop(&args.stop)?;
    let guard_mode = match args.strict_guards.as_str() {
        "on" => GuardMode::Strict,
        "off" => GuardMode::Permissive,
        other => {
            return Err(CliError::BadArgument(format!(
                "--strict-guards takes on|off, got {other:?}"
            )))
        }
    };
    let init_file = match args.init.as_str() {
        "random" => None,
        other => match other.strip_prefix("file:") {
            Some(p) => Some(PathBuf::from(p)),
            None => {
                return Err(CliError::BadArgument(format!(
                    "--init takes random|file:PATH, got {other:?}"
                )))
            }
        },
    };
    let spec = ExperimentSpec {
        topology_kind: kind,
        init_file,
        trials: args.trials,
        policy,
        seed: args.seed,
        stop,
        max_steps: args.max_steps,
        guard_mode,
    };

    let results: Vec<Result<(TrialRow, Trace), CliError>> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = spec.seed.wrapping_add(i);
            let topo = generate_topology(&spec.topology_kind, trial_seed)?;
            let initial = match &spec.init_file {
                Some(path) => read_configuration_file(path, &topo)?,
                None => model::random_configuration(&topo, trial_seed),
            };
            run_trial(&topo, &initial, &spec, trial_seed)
        })
        .collect();

    let mut body = String::new();
    let mut failures = 0u64;
    let structured = args.format == "structured";
    for (i, result) in results.iter().enumerate() {
        match result {
            Ok((row, trace)) => {
                if row.stop_reason != StopReason::TargetReached {
                    failures += 1;
                }
                if structured {
                    let _ = writeln!(body, "{}", serde_json::to_string(row).expect("row"));
                } else {
                    let _ = writeln!(body, "{}", row.to_csv());
                }
                if let Some(prefix) = &args.trace {
                    let path = trace_path(prefix, i);
                    let file = std::fs::File::create(&path).map_err(|source| CliError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    daemon::write_trace_jsonl(trace, std::io::BufWriter::new(file)).map_err(
                        |source| CliError::Io {
                            path: path.clone(),
                            source,
                        },
                    )?;
                }
            }
            Err(e) => return Err(CliError::BadArgument(format!("trial {i}: {e}"))),
        }
    }
    let output = if structured {
        body
    } else {
        format!("{CSV_HEADER}\n{body}")
    };
    match &args.out {
        Some(path) => std::fs::write(path, output).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.as_bytes())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn trace_path(prefix: &Path, trial: usize) -> PathBuf {
    if prefix.extension().is_some() && trial == 0 {
        prefix.to_path_buf()
    } else {
        let mut name = prefix.as_os_str().to_os_string();
        name.push(format!(".{trial}.jsonl"));
        PathBuf::from(name)
    }
}

fn named_graph(name: &str, seed: u64) -> Result<Topology, CliError> {
    match name {
        "p2" => Ok(build_topology(&[(0, 1)], 0)?),
        "p3" => Ok(build_topology(&[(0, 1), (1, 2)], 0)?),
        "triangle" => Ok(build_topology(&[(0, 1), (1, 2), (2, 0)], 0)?),
        "star4" => Ok(build_topology(&[(0, 1), (0, 2), (0, 3)], 0)?),
        other => {
            let kind: TopologyKind = other.parse().map_err(CliError::BadArgument)?;
            generate_topology(&kind, seed)
        }
    }
}

pub fn cmd_check(args: &CheckArgs) -> Result<i32, CliError> {
    let topo = named_graph(&args.graph, args.seed)?;
    let mut total_violations = 0u64;
    let mut lines: Vec<String> = Vec::new();
    let run_basics = matches!(args.suite.as_str(), "basics" | "all");
    let run_closures = matches!(args.suite.as_str(), "closures" | "all");
    let run_recovery = matches!(args.suite.as_str(), "recovery" | "all");
    let run_stages = matches!(args.suite.as_str(), "stages" | "all");
    let run_languages = matches!(args.suite.as_str(), "languages" | "all");
    if !(run_basics || run_closures || run_recovery || run_stages || run_languages) {
        return Err(CliError::BadArgument(format!(
            "unknown suite {:?}",
            args.suite
        )));
    }

    if run_basics {
        let report = analysis::model_check_basics(&topo, args.cap)?;
        lines.push(format!(
            "liveness: {} violations / {} configurations",
            report.liveness_violations.len(),
            report.configurations
        ));
        lines.push(format!(
            "guard-exclusivity: {} violations / {} configurations",
            report.exclusivity_violations.len(),
            report.configurations
        ));
        lines.push(format!(
            "strong-conflict-reading-divergence: {} configurations (informational)",
            report.strong_conflict_divergences
        ));
        total_violations +=
            (report.liveness_violations.len() + report.exclusivity_violations.len()) as u64;
    }
    if run_closures {
        for property in StepProperty::ALL {
            let violations =
                analysis::closure_check(&topo, property, CheckMode::Exhaustive { cap: args.cap })?;
            lines.push(format!(
                "{}: {} violations (exhaustive)",
                property.label(),
                violations.len()
            ));
            total_violations += violations.len() as u64;
            let randomized = analysis::closure_check(
                &topo,
                property,
                CheckMode::Randomized {
                    trials: args.trials * 10,
                    seed: args.seed,
                },
            )?;
            lines.push(format!(
                "{}: {} violations (randomized)",
                property.label(),
                randomized.len()
            ));
            total_violations += randomized.len() as u64;
        }
    }
    if run_recovery || run_stages || run_languages {
        let policies = [
            DaemonPolicy::Synchronous,
            DaemonPolicy::CentralRandom,
            DaemonPolicy::RoundRobin,
            DaemonPolicy::WeaklyFairQueue,
            DaemonPolicy::DistributedRandom { p: 0.5 },
        ];
        let mut recovery = 0usize;
        let mut stages = 0usize;
        let mut step_lemmas = 0usize;
        let mut languages = 0usize;
        for trial in 0..args.trials {
            let policy = &policies[trial as usize % policies.len()];
            let initial = model::random_configuration(&topo, args.seed.wrapping_add(trial));
            let trace = daemon::execute(
                &topo,
                &initial,
                policy,
                args.seed.wrapping_add(trial),
                &StopCondition::Constructions(2),
                &ExecOptions::default(),
            )?;
            let ana = analysis::analyze_trace(&trace, &topo);
            if run_recovery {
                recovery += analysis::recovery_check(&trace, &topo, &ana).len();
            }
            if run_stages {
                stages += analysis::stage_span_check(&trace, &topo, &ana).len();
                step_lemmas += analysis::step_lemma_check(&trace, &topo).len();
            }
            if run_languages {
                if let Some(al_entry) = ana.al_entry {
                    languages += analysis::move_language_check(&trace, &topo, al_entry + 1)
                        .iter()
                        .filter(|v| !v.accepted)
                        .count();
                }
            }
        }
        if run_recovery {
            lines.push(format!(
                "erroneous-recovery-windows: {recovery} violations / {} traces",
                args.trials
            ));
            total_violations += recovery as u64;
        }
        if run_stages {
            lines.push(format!(
                "phase-stage-spans: {stages} violations / {} traces",
                args.trials
            ));
            lines.push(format!(
                "per-step-frame-lemmas: {step_lemmas} violations / {} traces",
                args.trials
            ));
            total_violations += (stages + step_lemmas) as u64;
        }
        if run_languages {
            lines.push(format!(
                "move-languages-from-legitimate-set: {languages} rejections / {} traces",
                args.trials
            ));
            total_violations += languages as u64;
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "check --graph {} --suite {} ({} nodes, diameter {})",
        args.graph,
        args.suite,
        topo.node_count(),
        topo.diameter()
    );
    for line in &lines {
        let _ = writeln!(out, "  {line}");
    }
    print!("{out}");
    if total_violations > 0 {
        return Err(CliError::ViolationsFound(total_violations));
    }
    Ok(0)
}

pub fn cmd_pack(args: &PackArgs) -> Result<i32, CliError> {
    let topo = read_topology_file(&args.topology)?;
    let cfg = read_configuration_file(&args.config, &topo)?;
    let mut total = 0u32;
    for u in topo.nodes() {
        let neighbors = topo.neighbors(u);
        let packed = pack(cfg.state(u), neighbors)?;
        let back = unpack(&packed, neighbors)?;
        assert_eq!(&back, cfg.state(u), "round-trip mismatch at node {u}");
        println!(
            "node {u}: degree {} -> {} bits (0x{:x})",
            topo.degree(u),
            packed.width,
            packed.bits
        );
        total += u32::from(packed.width);
    }
    println!("total: {total} bits; round-trip verified");
    Ok(0)
}

pub fn cmd_predicates(args: &PredicatesArgs) -> Result<i32, CliError> {
    let topo = read_topology_file(&args.topology)?;
    let cfg = read_configuration_file(&args.config, &topo)?;
    let mut out = String::new();
    let _ = write!(out, "{:<22}", "predicate");
    for u in topo.nodes() {
        let _ = write!(out, " {u:>5}");
    }
    let _ = writeln!(out);
    for which in PredicateName::GUARD {
        if which == PredicateName::Connection {
            continue;
        }
        let _ = write!(out, "{:<22}", format!("{which:?}"));
        for u in topo.nodes() {
            let v = predicates::eval_guard_predicate(&cfg, &topo, u, which, None)
                .expect("guard predicate");
            let _ = write!(out, " {:>5}", if v { "T" } else { "." });
        }
        let _ = writeln!(out);
    }
    for which in PredicateName::ANALYSIS {
        let _ = write!(out, "{:<22}", format!("{which:?}"));
        for u in topo.nodes() {
            let v = predicates::eval_analysis_predicate(&cfg, &topo, u, which)
                .expect("analysis predicate");
            let _ = write!(out, " {:>5}", if v { "T" } else { "." });
        }
        let _ = writeln!(out);
    }
    let _ = write!(out, "{:<22}", "Connection(u, v)");
    for u in topo.nodes() {
        let targets = crate::rules::connection_targets(&cfg, &topo, u);
        let cell = if targets.is_empty() {
            ".".to_string()
        } else {
            targets
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join("/")
        };
        let _ = write!(out, " {cell:>5}");
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<22}", "Child");
    for u in topo.nodes() {
        let children = predicates::child_set(&topo, &cfg, u);
        let cell = if children.is_empty() {
            ".".to_string()
        } else {
            children
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join("/")
        };
        let _ = write!(out, " {cell:>5}");
    }
    let _ = writeln!(out);
    print!("{out}");
    Ok(0)
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Check(args) => cmd_check(args),
        Command::Pack(args) => cmd_pack(args),
        Command::Predicates(args) => cmd_predicates(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_selectors_parse_and_generate() {
        for (sel, n, d) in [
            ("path:4", 4usize, 3usize),
            ("cycle:5", 5, 2),
            ("star:4", 4, 2),
            ("grid:2x3", 6, 3),
            ("complete:4", 4, 1),
        ] {
            let kind: TopologyKind = sel.parse().unwrap();
            let topo = generate_topology(&kind, 0).unwrap();
            assert_eq!(topo.node_count(), n, "{sel}");
            assert_eq!(topo.diameter(), d, "{sel}");
        }
        assert!("path".parse::<TopologyKind>().is_err());
        assert!("random:5,1.5".parse::<TopologyKind>().is_err());
    }

    #[test]
    fn random_connected_generation_is_seeded_and_connected() {
        let kind = TopologyKind::RandomConnected(12, 0.2);
        let a = generate_topology(&kind, 7).unwrap();
        let b = generate_topology(&kind, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn topology_and_configuration_files_round_trip() {
        let topo = generate_topology(&TopologyKind::Path(3), 0).unwrap();
        let text = write_topology_json(&topo);
        let back = parse_topology_json(&text).unwrap();
        assert_eq!(topo, back);

        let cfg = model::random_configuration(&topo, 5);
        let text = write_configuration_json(&cfg, &topo);
        let back = parse_configuration_json(&text, &topo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn configuration_parse_rejects_bad_input() {
        let topo = generate_topology(&TopologyKind::Path(2), 0).unwrap();
        assert!(parse_configuration_json("{", &topo).is_err());
        assert!(parse_configuration_json("{}", &topo).is_err());
        // Root with a parent pointer fails validation.
        let bad = r#"{
            "0": {"P": 1, "TS": null, "C": 0, "S": "Working", "ph": "a"},
            "1": {"P": null, "TS": null, "C": 0, "S": "Idle", "ph": "a"}
        }"#;
        assert!(parse_configuration_json(bad, &topo).is_err());
    }

    #[test]
    fn stop_and_daemon_selectors_parse() {
        assert_eq!(
            parse_stop("Al").unwrap(),
            StopCondition::Attractor(AttractorTarget::Al)
        );
        assert_eq!(parse_stop("rounds:7").unwrap(), StopCondition::Rounds(7));
        assert_eq!(
            parse_stop("constructions:2").unwrap(),
            StopCondition::Constructions(2)
        );
        assert!(parse_stop("A9").is_err());
        let no_file = |_: &Path| -> Result<Vec<Vec<NodeId>>, CliError> { Ok(vec![]) };
        assert_eq!(
            parse_daemon("sync", &no_file).unwrap(),
            DaemonPolicy::Synchronous
        );
        assert!(matches!(
            parse_daemon("dist-random:0.25", &no_file).unwrap(),
            DaemonPolicy::DistributedRandom { .. }
        ));
        assert!(parse_daemon("dist-random:0", &no_file).is_err());
        assert!(parse_daemon("bogus", &no_file).is_err());
    }
}
