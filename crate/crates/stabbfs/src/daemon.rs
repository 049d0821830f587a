//! Scheduling policies, the execution driver, and round accounting.
//!
//! A round is the minimal execution prefix in which every process enabled
//! at the prefix start either executes a rule or is neutralized (observed
//! disabled in some configuration reached within the prefix).

use crate::analysis::{self, AttractorTarget};
use crate::model::{Configuration, ModelError, NodeId, Topology};
use crate::rules::{
    self, enabled_guards, step_with_rules, GuardMode, Rule, RuleError, RuleName,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

/// Who moves each step. Every policy returns a nonempty subset of the
/// enabled set; the unfair daemon imposes nothing more.
#[derive(Clone, Debug, PartialEq)]
pub enum DaemonPolicy {
    /// Exactly the enabled set.
    Synchronous,
    /// One enabled process, uniformly at random.
    CentralRandom,
    /// The enabled process with the smallest identifier.
    CentralMinId,
    /// Each enabled process independently with probability `p`, redrawn
    /// while empty.
    DistributedRandom { p: f64 },
    /// One process in cyclic identifier order.
    RoundRobin,
    /// Scripted activation sets, intersected with the enabled set; an empty
    /// intersection falls back to the smallest enabled identifier.
    AdversaryScript { script: Vec<Vec<NodeId>> },
    /// FIFO queue discipline: the longest-waiting enabled process moves.
    /// Guarantees every continuously-enabled process is eventually selected.
    WeaklyFairQueue,
}

impl DaemonPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            DaemonPolicy::Synchronous => "sync",
            DaemonPolicy::CentralRandom => "central-random",
            DaemonPolicy::CentralMinId => "central-min",
            DaemonPolicy::DistributedRandom { .. } => "dist-random",
            DaemonPolicy::RoundRobin => "round-robin",
            DaemonPolicy::AdversaryScript { .. } => "adversary",
            DaemonPolicy::WeaklyFairQueue => "weakly-fair",
        }
    }
}

/// Mutable scheduler state: policy plus RNG, cursor, queue, script index.
pub struct Daemon {
    policy: DaemonPolicy,
    rng: ChaCha8Rng,
    rr_cursor: usize,
    queue: VecDeque<NodeId>,
    script_index: usize,
}

impl Daemon {
    pub fn new(policy: DaemonPolicy, seed: u64, node_count: usize) -> Self {
        Daemon {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rr_cursor: 0,
            queue: (0..node_count).collect(),
            script_index: 0,
        }
    }

    /// Selects the activation set for this step. `enabled` must be nonempty
    /// and sorted ascending; the result is a nonempty sorted subset.
    pub fn select(&mut self, enabled: &[NodeId]) -> Vec<NodeId> {
        assert!(!enabled.is_empty(), "select on an empty enabled set");
        match &self.policy {
            DaemonPolicy::Synchronous => enabled.to_vec(),
            DaemonPolicy::CentralRandom => {
                vec![enabled[self.rng.gen_range(0..enabled.len())]]
            }
            DaemonPolicy::CentralMinId => vec![enabled[0]],
            DaemonPolicy::DistributedRandom { p } => {
                let p = *p;
                loop {
                    let picked: Vec<NodeId> = enabled
                        .iter()
                        .copied()
                        .filter(|_| self.rng.gen_bool(p))
                        .collect();
                    if !picked.is_empty() {
                        return picked;
                    }
                }
            }
            DaemonPolicy::RoundRobin => {
                let n = self.queue.len().max(1);
                for offset in 0..n {
                    let candidate = (self.rr_cursor + offset) % n;
                    if enabled.binary_search(&candidate).is_ok() {
                        self.rr_cursor = (candidate + 1) % n;
                        return vec![candidate];
                    }
                }
                vec![enabled[0]]
            }
            DaemonPolicy::AdversaryScript { script } => {
                let picked = if script.is_empty() {
                    Vec::new()
                } else {
                    let line = &script[self.script_index % script.len()];
                    self.script_index += 1;
                    let mut out: Vec<NodeId> = line
                        .iter()
                        .copied()
                        .filter(|u| enabled.binary_search(u).is_ok())
                        .collect();
                    out.sort_unstable();
                    out.dedup();
                    out
                };
                if picked.is_empty() {
                    vec![enabled[0]]
                } else {
                    picked
                }
            }
            DaemonPolicy::WeaklyFairQueue => {
                let pos = self
                    .queue
                    .iter()
                    .position(|u| enabled.binary_search(u).is_ok())
                    .expect("some enabled process is queued");
                let u = self.queue.remove(pos).unwrap();
                self.queue.push_back(u);
                vec![u]
            }
        }
    }
}

/// R3 target choice when several neighbors satisfy Connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TargetSelection {
    /// Smallest node identifier; keeps traces reproducible.
    #[default]
    MinId,
    /// Seeded-random choice for adversarial exploration.
    Random,
}

/// When to halt. Attractor membership is evaluated after every step, so it
/// can be attained mid-round; `Constructions(k)` counts root R1 executions
/// fired from configurations already inside the legitimate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopCondition {
    Attractor(AttractorTarget),
    Rounds(u64),
    Constructions(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// The stop condition was met.
    TargetReached,
    /// The step budget ran out first.
    StepLimit,
    /// A configuration with no enabled process was reached. The rule system
    /// is designed to make this impossible; seeing it is a finding.
    FixpointImpossible,
}

#[derive(Clone, Copy, Debug)]
pub struct ExecOptions {
    pub max_steps: u64,
    pub guard_mode: GuardMode,
    pub target_selection: TargetSelection,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            max_steps: 10_000_000,
            guard_mode: GuardMode::Strict,
            target_selection: TargetSelection::MinId,
        }
    }
}

#[derive(Debug, Error)]
pub enum DaemonError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// A recorded execution: the initial configuration, per-step activations,
/// per-configuration enabled masks, and the derived round boundaries.
///
/// Intermediate configurations are reconstructed on demand by replay, so a
/// long trace stays cheap to hold.
#[derive(Clone, Debug)]
pub struct Trace {
    pub initial: Configuration,
    activations: Vec<Vec<(NodeId, Rule)>>,
    enabled_masks: Vec<u128>,
    /// 1-based indices of the steps that close each round.
    pub round_boundaries: Vec<usize>,
    pub stop_reason: StopReason,
    final_config: Configuration,
}

impl Trace {
    pub fn step_count(&self) -> usize {
        self.activations.len()
    }

    /// Activation of step `i` (1-based).
    pub fn activation(&self, i: usize) -> &[(NodeId, Rule)] {
        &self.activations[i - 1]
    }

    pub fn activations(&self) -> &[Vec<(NodeId, Rule)>] {
        &self.activations
    }

    /// Enabled-process mask of configuration `i` (0 = initial, `i` = after
    /// step `i`).
    pub fn enabled_mask(&self, i: usize) -> u128 {
        self.enabled_masks[i]
    }

    pub fn final_config(&self) -> &Configuration {
        &self.final_config
    }

    /// Number of completed rounds.
    pub fn rounds_total(&self) -> usize {
        self.round_boundaries.len()
    }

    /// Ceiling round index of configuration `i`: the number of rounds
    /// completed at or before step `i`, plus one if `i` sits mid-round.
    pub fn round_index_of_config(&self, i: usize) -> u64 {
        if i == 0 {
            return 0;
        }
        let complete = self.round_boundaries.partition_point(|&b| b < i) as u64;
        complete + 1
    }

    /// Streams (step index, before, activation, after) over the whole
    /// trace, reconstructing configurations in place.
    pub fn replay<F: FnMut(usize, &Configuration, &[(NodeId, Rule)], &Configuration)>(
        &self,
        mut visit: F,
    ) {
        let mut before = self.initial.clone();
        for (ix, act) in self.activations.iter().enumerate() {
            let mut after = before.clone();
            for (u, rule) in act {
                *after.state_mut(*u) = rules::apply_rule_unchecked(&before, *u, rule);
            }
            visit(ix + 1, &before, act, &after);
            before = after;
        }
    }

    /// All configurations c_0..c_m; convenient for tests on short traces.
    pub fn configurations(&self) -> Vec<Configuration> {
        let mut out = vec![self.initial.clone()];
        self.replay(|_, _, _, after| out.push(after.clone()));
        out
    }

    /// Per-step activation masks, 1-based alongside `enabled_mask`.
    pub fn activation_mask(&self, i: usize) -> u128 {
        self.activations[i - 1]
            .iter()
            .fold(0u128, |m, (u, _)| m | (1u128 << u))
    }

    /// Step indices closing the first `max_rounds` rounds of the suffix
    /// execution that starts at configuration `anchor`.
    pub fn suffix_round_boundaries(&self, anchor: usize, max_rounds: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut outstanding = self.enabled_masks[anchor];
        for j in anchor + 1..=self.step_count() {
            outstanding &= !self.activation_mask(j);
            outstanding &= self.enabled_masks[j];
            if outstanding == 0 {
                out.push(j);
                if out.len() == max_rounds {
                    break;
                }
                outstanding = self.enabled_masks[j];
            }
        }
        out
    }
}

fn enabled_set(
    cfg: &Configuration,
    topo: &Topology,
    mode: GuardMode,
) -> Result<Vec<NodeId>, RuleError> {
    let mut out = Vec::new();
    for u in topo.nodes() {
        let guards = enabled_guards(cfg, topo, u);
        if guards.len() > 1 && mode == GuardMode::Strict {
            return Err(RuleError::GuardExclusivity {
                node: u,
                rules: guards.iter().map(|g| g.name).collect(),
            });
        }
        if !guards.is_empty() {
            out.push(u);
        }
    }
    Ok(out)
}

fn mask_of(nodes: &[NodeId]) -> u128 {
    nodes.iter().fold(0u128, |m, &u| m | (1u128 << u))
}

/// Runs the algorithm from `initial` under `policy` until the stop
/// condition, the step budget, or an (impossible) fixpoint.
pub fn execute(
    topo: &Topology,
    initial: &Configuration,
    policy: &DaemonPolicy,
    seed: u64,
    stop: &StopCondition,
    opts: &ExecOptions,
) -> Result<Trace, DaemonError> {
    initial.validate(topo)?;
    let mut daemon = Daemon::new(policy.clone(), seed, topo.node_count());
    let mut current = initial.clone();
    let mut activations: Vec<Vec<(NodeId, Rule)>> = Vec::new();
    let mut round_boundaries: Vec<usize> = Vec::new();
    let mut enabled_masks: Vec<u128> = Vec::new();

    let mut al_reached = analysis::in_attractor(&current, topo, AttractorTarget::Al);
    let mut constructions: u32 = 0;
    let mut target_met = match stop {
        StopCondition::Attractor(t) => {
            if *t == AttractorTarget::Al {
                al_reached
            } else {
                analysis::in_attractor(&current, topo, *t)
            }
        }
        StopCondition::Rounds(n) => *n == 0,
        StopCondition::Constructions(k) => *k == 0,
    };

    let enabled = enabled_set(&current, topo, opts.guard_mode)?;
    enabled_masks.push(mask_of(&enabled));
    let mut outstanding = mask_of(&enabled);

    let stop_reason = loop {
        if target_met {
            break StopReason::TargetReached;
        }
        if activations.len() as u64 >= opts.max_steps {
            break StopReason::StepLimit;
        }
        let enabled = enabled_set(&current, topo, opts.guard_mode)?;
        if enabled.is_empty() {
            break StopReason::FixpointImpossible;
        }
        let selected = daemon.select(&enabled);
        let mut chosen: Vec<(NodeId, Rule)> = Vec::with_capacity(selected.len());
        for &u in &selected {
            let mut rule = rules::enabled_rule(&current, topo, u, opts.guard_mode)?
                .ok_or(RuleError::NoEnabledRule(u))?;
            if rule.name == RuleName::R3 && opts.target_selection == TargetSelection::Random {
                let targets = rules::connection_targets(&current, topo, u);
                rule = Rule::connect(targets[daemon.rng.gen_range(0..targets.len())]);
            }
            chosen.push((u, rule));
        }
        let record = step_with_rules(&current, topo, &chosen)?;
        current = record.after;
        activations.push(chosen.clone());
        let step_index = activations.len();

        let now_enabled = enabled_set(&current, topo, opts.guard_mode)?;
        let enabled_mask = mask_of(&now_enabled);
        enabled_masks.push(enabled_mask);
        outstanding &= !mask_of(&selected);
        outstanding &= enabled_mask;
        if outstanding == 0 {
            round_boundaries.push(step_index);
            outstanding = enabled_mask;
        }

        // Al is closed, so the flag only ever flips false -> true; an R1
        // counts as a construction when Al already held before the step.
        let al_before = al_reached;
        if !al_reached {
            al_reached = analysis::in_attractor(&current, topo, AttractorTarget::Al);
        }
        match stop {
            StopCondition::Attractor(t) => {
                target_met = if *t == AttractorTarget::Al {
                    al_reached
                } else {
                    analysis::in_attractor(&current, topo, *t)
                };
            }
            StopCondition::Rounds(n) => {
                target_met = round_boundaries.len() as u64 >= *n;
            }
            StopCondition::Constructions(k) => {
                if al_before && chosen.iter().any(|(_, r)| r.name == RuleName::R1) {
                    constructions += 1;
                }
                target_met = constructions >= *k;
            }
        }
    };

    Ok(Trace {
        initial: initial.clone(),
        activations,
        enabled_masks,
        round_boundaries,
        stop_reason,
        final_config: current,
    })
}

/// Recomputes round boundaries from the raw step sequence, independent of
/// the accounting done during execution.
pub fn round_boundaries(trace: &Trace, topo: &Topology) -> Vec<usize> {
    let mut boundaries = Vec::new();
    let initial_enabled =
        enabled_set(&trace.initial, topo, GuardMode::Permissive).expect("enabled set");
    let mut outstanding = mask_of(&initial_enabled);
    trace.replay(|ix, _before, activated, after| {
        let after_enabled =
            mask_of(&enabled_set(after, topo, GuardMode::Permissive).expect("enabled set"));
        outstanding &= !activated.iter().fold(0u128, |m, (u, _)| m | (1u128 << u));
        outstanding &= after_enabled;
        if outstanding == 0 {
            boundaries.push(ix);
            outstanding = after_enabled;
        }
    });
    boundaries
}

/// One structured text record per step: step index, activations, and the
/// (ceiling) round index the step belongs to.
pub fn write_trace_jsonl<W: std::io::Write>(
    trace: &Trace,
    mut out: W,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct ActivationRecord {
        node: NodeId,
        rule: RuleName,
        #[serde(skip_serializing_if = "Option::is_none")]
        target: Option<NodeId>,
    }
    #[derive(Serialize)]
    struct StepRecordLine {
        step: usize,
        activated: Vec<ActivationRecord>,
        round: u64,
    }
    for i in 1..=trace.step_count() {
        let line = StepRecordLine {
            step: i,
            activated: trace
                .activation(i)
                .iter()
                .map(|(node, rule)| ActivationRecord {
                    node: *node,
                    rule: rule.name,
                    target: rule.connection_target,
                })
                .collect(),
            round: trace.round_index_of_config(i),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses an adversary script: a JSON array of activation sets.
pub fn parse_adversary_script(text: &str) -> Result<Vec<Vec<NodeId>>, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_topology, Color, Phase, ProcessState, Status};

    fn p2() -> Topology {
        build_topology(&[(0, 1)], 0).unwrap()
    }

    fn p2_start() -> Configuration {
        Configuration::new(vec![
            ProcessState::new(None, None, Color::C0, Status::Working, Phase::A),
            ProcessState::new(None, None, Color::C0, Status::Idle, Phase::A),
        ])
    }

    #[test]
    fn select_policies_basics() {
        let mut sync = Daemon::new(DaemonPolicy::Synchronous, 0, 3);
        assert_eq!(sync.select(&[0, 2]), vec![0, 2]);
        let mut central = Daemon::new(DaemonPolicy::CentralMinId, 0, 3);
        assert_eq!(central.select(&[1, 2]), vec![1]);
        let mut a = Daemon::new(DaemonPolicy::DistributedRandom { p: 0.5 }, 9, 3);
        let mut b = Daemon::new(DaemonPolicy::DistributedRandom { p: 0.5 }, 9, 3);
        for _ in 0..50 {
            let ea = a.select(&[0, 1, 2]);
            assert_eq!(ea, b.select(&[0, 1, 2]));
            assert!(!ea.is_empty());
        }
    }

    #[test]
    fn weakly_fair_queue_serves_a_continuously_enabled_process() {
        let mut d = Daemon::new(DaemonPolicy::WeaklyFairQueue, 0, 4);
        let enabled = [0, 1, 2, 3];
        let mut seen = std::collections::HashSet::new();
        for _ in 0..4 {
            seen.extend(d.select(&enabled));
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn adversary_script_intersects_and_falls_back() {
        let mut d = Daemon::new(
            DaemonPolicy::AdversaryScript {
                script: vec![vec![2, 3], vec![9]],
            },
            0,
            4,
        );
        assert_eq!(d.select(&[1, 2]), vec![2]);
        // Second line misses the enabled set entirely.
        assert_eq!(d.select(&[1, 2]), vec![1]);
    }

    /// The canonical two-node construction: R1, R3, R2, R5, R7, R1, with
    /// five rounds between the two R1 executions.
    #[test]
    fn p2_synchronous_construction_sequence() {
        let t = p2();
        let trace = execute(
            &t,
            &p2_start(),
            &DaemonPolicy::Synchronous,
            0,
            &StopCondition::Rounds(6),
            &ExecOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
        let seq: Vec<(NodeId, RuleName)> = trace
            .activations()
            .iter()
            .flat_map(|a| a.iter().map(|(u, r)| (*u, r.name)))
            .collect();
        assert_eq!(
            seq,
            vec![
                (0, RuleName::R1),
                (1, RuleName::R3),
                (0, RuleName::R2),
                (1, RuleName::R5),
                (1, RuleName::R7),
                (0, RuleName::R1),
            ]
        );
        // Synchronous daemon: every step closes a round.
        assert_eq!(trace.round_boundaries, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(round_boundaries(&trace, &t), trace.round_boundaries);
    }

    #[test]
    fn zero_round_budget_yields_empty_trace() {
        let t = p2();
        let trace = execute(
            &t,
            &p2_start(),
            &DaemonPolicy::Synchronous,
            0,
            &StopCondition::Rounds(0),
            &ExecOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.step_count(), 0);
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
    }

    #[test]
    fn attractor_stop_halts_mid_round_budget() {
        let t = p2();
        let trace = execute(
            &t,
            &p2_start(),
            &DaemonPolicy::CentralMinId,
            3,
            &StopCondition::Attractor(AttractorTarget::A1),
            &ExecOptions::default(),
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
        assert!(trace.round_index_of_config(trace.step_count()) <= 1);
    }

    #[test]
    fn step_limit_is_reported_not_thrown() {
        let t = p2();
        let trace = execute(
            &t,
            &p2_start(),
            &DaemonPolicy::Synchronous,
            0,
            &StopCondition::Rounds(1_000),
            &ExecOptions {
                max_steps: 3,
                ..ExecOptions::default()
            },
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::StepLimit);
        assert_eq!(trace.step_count(), 3);
    }

    #[test]
    fn round_recomputation_is_idempotent_across_policies() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        for (i, policy) in [
            DaemonPolicy::Synchronous,
            DaemonPolicy::CentralRandom,
            DaemonPolicy::RoundRobin,
            DaemonPolicy::WeaklyFairQueue,
            DaemonPolicy::DistributedRandom { p: 0.6 },
        ]
        .into_iter()
        .enumerate()
        {
            let initial = crate::model::random_configuration(&t, 100 + i as u64);
            let trace = execute(
                &t,
                &initial,
                &policy,
                42,
                &StopCondition::Rounds(20),
                &ExecOptions::default(),
            )
            .unwrap();
            assert_eq!(
                round_boundaries(&trace, &t),
                trace.round_boundaries,
                "policy {policy:?}"
            );
        }
    }
}
