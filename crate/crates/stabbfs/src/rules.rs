//! Guard evaluation and action application for the recovery rules RC1-RC6
//! and the tree-construction rules R1-R7, plus computation-step semantics
//! (composite atomicity: every guard in a step reads the pre-step
//! configuration, all writes land simultaneously).

use crate::model::{Configuration, NodeId, ProcessState, Status, Topology};
use crate::predicates as pred;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleName {
    RC1,
    RC2,
    RC3,
    RC4,
    RC5,
    RC6,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl RuleName {
    pub fn is_root_rule(self) -> bool {
        matches!(
            self,
            RuleName::RC1 | RuleName::RC2 | RuleName::RC3 | RuleName::R1 | RuleName::R2
        )
    }

    pub fn is_recovery(self) -> bool {
        matches!(
            self,
            RuleName::RC1
                | RuleName::RC2
                | RuleName::RC3
                | RuleName::RC4
                | RuleName::RC5
                | RuleName::RC6
        )
    }
}

impl std::fmt::Display for RuleName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// An enabled rule instance; `connection_target` is present exactly for R3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub name: RuleName,
    pub connection_target: Option<NodeId>,
}

impl Rule {
    pub fn plain(name: RuleName) -> Self {
        Rule {
            name,
            connection_target: None,
        }
    }

    pub fn connect(target: NodeId) -> Self {
        Rule {
            name: RuleName::R3,
            connection_target: Some(target),
        }
    }
}

/// How simultaneous guard satisfaction is handled. The rule system is
/// designed so at most one guard holds per process; strict mode turns any
/// counterexample into an error instead of resolving it silently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GuardMode {
    #[default]
    Strict,
    /// Falls back to the fixed priority RC4, RC5, RC3, RC1, RC2, RC6,
    /// R1..R7.
    Permissive,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("guard exclusivity violated at node {node}: {rules:?} all enabled")]
    GuardExclusivity { node: NodeId, rules: Vec<RuleName> },
    #[error("rule {rule} is not enabled at node {node}")]
    NotEnabled { node: NodeId, rule: RuleName },
    #[error("node {0} has no enabled rule")]
    NoEnabledRule(NodeId),
    #[error("empty activation set")]
    EmptyActivation,
    #[error("R3 requires a connection target")]
    MissingConnectionTarget,
}

/// Every rule whose guard holds at `u`, in the documented priority order.
/// R3 carries the smallest eligible connection target.
pub fn enabled_guards(cfg: &Configuration, topo: &Topology, u: NodeId) -> Vec<Rule> {
    let mut out = Vec::new();
    let su = cfg.state(u);
    let no_strong_e_neighbor = topo
        .neighbors(u)
        .iter()
        .all(|&v| cfg.state(v).status != Status::StrongE);
    if u == topo.root() {
        let conflict = pred::conflict(topo, cfg, u);
        let power_faulty = pred::power_faulty(topo, cfg, u);
        let ok = !pred::strong_conflict(topo, cfg, u) && !conflict && !power_faulty;
        if !conflict && power_faulty && pred::quiet_subtree(topo, cfg, u) {
            out.push(Rule::plain(RuleName::RC1));
        }
        if pred::detached(topo, cfg, u) && pred::strong_e_ready(topo, cfg, u) {
            out.push(Rule::plain(RuleName::RC2));
        }
        if conflict {
            out.push(Rule::plain(RuleName::RC3));
        }
        if ok && pred::end_last_phase(topo, cfg, u) && no_strong_e_neighbor {
            out.push(Rule::plain(RuleName::R1));
        }
        if ok && pred::end_intermediate_phase(topo, cfg, u) {
            out.push(Rule::plain(RuleName::R2));
        }
    } else {
        let strong_conflict = pred::strong_conflict(topo, cfg, u);
        if strong_conflict {
            out.push(Rule::plain(RuleName::RC4));
        }
        let recovery_reason = pred::conflict(topo, cfg, u)
            || pred::faulty(topo, cfg, u)
            || pred::power_faulty(topo, cfg, u)
            || pred::illegal_live_root(topo, cfg, u)
            || pred::illegal_child(topo, cfg, u);
        if !strong_conflict && recovery_reason {
            out.push(Rule::plain(RuleName::RC5));
        }
        if pred::detached(topo, cfg, u)
            && pred::isolated(topo, cfg, u)
            && topo.neighbors(u).iter().all(|&v| {
                cfg.state(v).color == su.color || cfg.state(v).status != Status::Power
            })
        {
            out.push(Rule::plain(RuleName::RC6));
        }
        let ok = pred::ok(topo, cfg, u);
        if ok {
            if let Some(&target) = connection_targets(cfg, topo, u).first() {
                out.push(Rule::connect(target));
            }
            let new_phase = pred::new_phase(topo, cfg, u);
            let childless = !pred::has_child(topo, cfg, u);
            if new_phase && !childless {
                out.push(Rule::plain(RuleName::R4));
            }
            if new_phase && childless && no_strong_e_neighbor {
                out.push(Rule::plain(RuleName::R5));
            }
            if pred::end_intermediate_phase(topo, cfg, u) {
                out.push(Rule::plain(RuleName::R6));
            }
            if su.parent.is_some() && pred::end_last_phase(topo, cfg, u) {
                out.push(Rule::plain(RuleName::R7));
            }
        }
    }
    out
}

/// Neighbors that satisfy Connection(u, ·), ascending.
pub fn connection_targets(cfg: &Configuration, topo: &Topology, u: NodeId) -> Vec<NodeId> {
    if !pred::detached(topo, cfg, u)
        || !(pred::isolated(topo, cfg, u) || cfg.state(u).status == Status::Idle)
    {
        return Vec::new();
    }
    topo.neighbors(u)
        .iter()
        .copied()
        .filter(|&v| {
            cfg.state(v).color != cfg.state(u).color && cfg.state(v).status == Status::Power
        })
        .collect()
}

/// The unique enabled rule at `u`, or none.
///
/// Guard exclusivity is a checked design claim: when several guards hold,
/// strict mode raises the diagnostic while permissive mode applies the
/// fixed priority.
pub fn enabled_rule(
    cfg: &Configuration,
    topo: &Topology,
    u: NodeId,
    mode: GuardMode,
) -> Result<Option<Rule>, RuleError> {
    let guards = enabled_guards(cfg, topo, u);
    match guards.len() {
        0 => Ok(None),
        1 => Ok(Some(guards[0])),
        _ => match mode {
            GuardMode::Strict => Err(RuleError::GuardExclusivity {
                node: u,
                rules: guards.iter().map(|g| g.name).collect(),
            }),
            GuardMode::Permissive => Ok(Some(guards[0])),
        },
    }
}

/// New local state of `u` after executing `rule`; only `u`'s own variables
/// change. Fails when the rule is not enabled in `cfg`.
pub fn apply_rule(
    cfg: &Configuration,
    topo: &Topology,
    u: NodeId,
    rule: &Rule,
) -> Result<ProcessState, RuleError> {
    if !rule_is_enabled(cfg, topo, u, rule) {
        return Err(RuleError::NotEnabled {
            node: u,
            rule: rule.name,
        });
    }
    Ok(apply_rule_unchecked(cfg, u, rule))
}

/// Action table without the guard check; used by the checker's mutation
/// tests and by `step` after validation.
pub fn apply_rule_unchecked(cfg: &Configuration, u: NodeId, rule: &Rule) -> ProcessState {
    let mut st = *cfg.state(u);
    match rule.name {
        RuleName::RC1 | RuleName::RC2 => st.status = Status::Working,
        RuleName::RC3 => st.status = Status::StrongE,
        RuleName::RC4 => {
            st.status = Status::StrongE;
            st.parent = None;
        }
        RuleName::RC5 => {
            st.status = Status::WeakE;
            st.parent = None;
        }
        RuleName::RC6 => st.status = Status::Idle,
        RuleName::R1 => {
            st.color = st.color.flip();
            st.status = Status::Power;
        }
        RuleName::R2 => {
            st.phase = st.phase.flip();
            st.status = Status::Working;
        }
        RuleName::R3 => {
            let v = rule.connection_target.expect("R3 carries a target");
            st.color = cfg.state(v).color;
            st.phase = cfg.state(v).phase;
            st.status = Status::Idle;
            st.parent = Some(v);
            st.tree_parent = Some(v);
        }
        RuleName::R4 => {
            let p = st.parent.expect("R4 requires a parent");
            st.phase = cfg.state(p).phase;
            st.status = Status::Working;
        }
        RuleName::R5 => {
            let p = st.parent.expect("R5 requires a parent");
            st.phase = cfg.state(p).phase;
            st.status = Status::Power;
        }
        RuleName::R6 => st.status = Status::Idle,
        RuleName::R7 => {
            st.status = Status::Idle;
            st.parent = None;
        }
    }
    st
}

fn rule_is_enabled(cfg: &Configuration, topo: &Topology, u: NodeId, rule: &Rule) -> bool {
    let guards = enabled_guards(cfg, topo, u);
    match rule.name {
        RuleName::R3 => {
            // Any neighbor satisfying Connection is a legal target, not
            // only the default smallest one.
            rule.connection_target.is_some_and(|t| {
                guards.iter().any(|g| g.name == RuleName::R3)
                    && connection_targets(cfg, topo, u).contains(&t)
            })
        }
        name => guards.iter().any(|g| g.name == name),
    }
}

/// One computation step: the chosen processes execute their enabled rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub activated: Vec<(NodeId, Rule)>,
    pub before: Configuration,
    pub after: Configuration,
}

/// Executes a step by activating `nodes`, each with its unique enabled rule
/// (strict guard handling unless `mode` says otherwise).
pub fn step(
    cfg: &Configuration,
    topo: &Topology,
    nodes: &[NodeId],
    mode: GuardMode,
) -> Result<StepRecord, RuleError> {
    let mut chosen = Vec::with_capacity(nodes.len());
    for &u in nodes {
        let rule = enabled_rule(cfg, topo, u, mode)?.ok_or(RuleError::NoEnabledRule(u))?;
        chosen.push((u, rule));
    }
    step_with_rules(cfg, topo, &chosen)
}

/// Executes a step with explicitly chosen rules (e.g. a non-default R3
/// target). All guards are validated against the pre-step configuration.
pub fn step_with_rules(
    cfg: &Configuration,
    topo: &Topology,
    chosen: &[(NodeId, Rule)],
) -> Result<StepRecord, RuleError> {
    if chosen.is_empty() {
        return Err(RuleError::EmptyActivation);
    }
    for (u, rule) in chosen {
        if rule.name == RuleName::R3 && rule.connection_target.is_none() {
            return Err(RuleError::MissingConnectionTarget);
        }
        if !rule_is_enabled(cfg, topo, *u, rule) {
            return Err(RuleError::NotEnabled {
                node: *u,
                rule: rule.name,
            });
        }
    }
    let mut after = cfg.clone();
    for (u, rule) in chosen {
        *after.state_mut(*u) = apply_rule_unchecked(cfg, *u, rule);
    }
    Ok(StepRecord {
        activated: chosen.to_vec(),
        before: cfg.clone(),
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_topology, Color, Phase, ProcessState};

    fn p2() -> Topology {
        build_topology(&[(0, 1)], 0).unwrap()
    }

    fn st(
        parent: Option<NodeId>,
        tree_parent: Option<NodeId>,
        color: Color,
        status: Status,
        phase: Phase,
    ) -> ProcessState {
        ProcessState::new(parent, tree_parent, color, status, phase)
    }

    /// Construction hand-off on the two-node path: the root starts a tree,
    /// then the other node connects.
    #[test]
    fn enabled_rules_on_p2_construction_start() {
        let t = p2();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C0, Status::Working, Phase::A),
            st(None, None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(
            enabled_rule(&cfg, &t, 0, GuardMode::Strict).unwrap(),
            Some(Rule::plain(RuleName::R1))
        );
        assert_eq!(enabled_rule(&cfg, &t, 1, GuardMode::Strict).unwrap(), None);

        let after_r1 = step(&cfg, &t, &[0], GuardMode::Strict).unwrap().after;
        assert_eq!(after_r1.state(0).color, Color::C1);
        assert_eq!(after_r1.state(0).status, Status::Power);
        assert_eq!(
            enabled_rule(&after_r1, &t, 1, GuardMode::Strict).unwrap(),
            Some(Rule::connect(0))
        );
        assert_eq!(enabled_rule(&after_r1, &t, 0, GuardMode::Strict).unwrap(), None);
    }

    /// A parent cycle leaves only the root enabled; the cycle is broken
    /// later by the Power conflict the construction produces.
    #[test]
    fn two_cycle_keeps_liveness_through_the_root() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C0, Status::Working, Phase::A),
            st(Some(2), None, Color::C0, Status::Idle, Phase::A),
            st(Some(1), None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(
            enabled_rule(&cfg, &t, 0, GuardMode::Strict).unwrap(),
            Some(Rule::plain(RuleName::R1))
        );
        assert_eq!(enabled_rule(&cfg, &t, 1, GuardMode::Strict).unwrap(), None);
        assert_eq!(enabled_rule(&cfg, &t, 2, GuardMode::Strict).unwrap(), None);
    }

    #[test]
    fn r3_transcribes_the_target_state() {
        let t = p2();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C1, Status::Power, Phase::A),
            st(None, None, Color::C0, Status::Idle, Phase::A),
        ]);
        let new = apply_rule(&cfg, &t, 1, &Rule::connect(0)).unwrap();
        assert_eq!(
            new,
            st(Some(0), Some(0), Color::C1, Status::Idle, Phase::A)
        );
    }

    #[test]
    fn r2_toggles_phase_and_r7_keeps_tree_parent() {
        let t = p2();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C1, Status::Power, Phase::A),
            st(Some(0), Some(0), Color::C1, Status::Idle, Phase::A),
        ]);
        // Root: EndFirstPhase with a child -> R2.
        let r2 = apply_rule(&cfg, &t, 0, &Rule::plain(RuleName::R2)).unwrap();
        assert_eq!(r2.phase, Phase::B);
        assert_eq!(r2.status, Status::Working);

        // Drive node 1 to EndLastPhase: Power with all neighbors colored alike.
        let cfg2 = Configuration::new(vec![
            st(None, None, Color::C1, Status::Working, Phase::B),
            st(Some(0), Some(0), Color::C1, Status::Power, Phase::B),
        ]);
        let r7 = apply_rule(&cfg2, &t, 1, &Rule::plain(RuleName::R7)).unwrap();
        assert_eq!(r7.parent, None);
        assert_eq!(r7.tree_parent, Some(0));
        assert_eq!(r7.status, Status::Idle);
    }

    #[test]
    fn apply_rejects_disabled_rules() {
        let t = p2();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C0, Status::Working, Phase::A),
            st(None, None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(
            apply_rule(&cfg, &t, 1, &Rule::plain(RuleName::R7)),
            Err(RuleError::NotEnabled {
                node: 1,
                rule: RuleName::R7
            })
        );
    }

    #[test]
    fn step_requires_nonempty_enabled_activation() {
        let t = p2();
        let cfg = Configuration::new(vec![
            st(None, None, Color::C0, Status::Working, Phase::A),
            st(None, None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(
            step(&cfg, &t, &[], GuardMode::Strict),
            Err(RuleError::EmptyActivation)
        );
        assert_eq!(
            step(&cfg, &t, &[1], GuardMode::Strict),
            Err(RuleError::NoEnabledRule(1))
        );
        let rec = step(&cfg, &t, &[0], GuardMode::Strict).unwrap();
        assert_eq!(rec.before.state(1), rec.after.state(1));
        assert_ne!(rec.before.state(0), rec.after.state(0));
    }

    /// Simultaneous activation equals applying each guard against the
    /// shared pre-step configuration, over every P2 configuration with two
    /// or more enabled processes.
    #[test]
    fn simultaneous_writes_match_two_pass_reference_on_p2() {
        let t = p2();
        let mut multi = 0u32;
        for cfg in crate::model::enumerate_configurations(&t, 1 << 20).unwrap() {
            let enabled: Vec<NodeId> = t
                .nodes()
                .filter(|&u| {
                    enabled_rule(&cfg, &t, u, GuardMode::Strict)
                        .unwrap()
                        .is_some()
                })
                .collect();
            if enabled.len() < 2 {
                continue;
            }
            multi += 1;
            let joint = step(&cfg, &t, &enabled, GuardMode::Strict).unwrap().after;
            let mut reference = cfg.clone();
            for &u in &enabled {
                let rule = enabled_rule(&cfg, &t, u, GuardMode::Strict)
                    .unwrap()
                    .unwrap();
                *reference.state_mut(u) = apply_rule(&cfg, &t, u, &rule).unwrap();
            }
            assert_eq!(joint, reference);
        }
        assert!(multi > 0, "no P2 configuration had two enabled processes");
    }

    /// Ok(u) disables every recovery rule that dismantles state, across the
    /// whole P2 space; liveness and exclusivity hold as well.
    #[test]
    fn p2_exhaustive_guard_properties() {
        let t = p2();
        for cfg in crate::model::enumerate_configurations(&t, 1 << 20).unwrap() {
            let mut any_enabled = false;
            for u in t.nodes() {
                let guards = enabled_guards(&cfg, &t, u);
                assert!(
                    guards.len() <= 1,
                    "two guards enabled at {u}: {guards:?} in {cfg:?}"
                );
                any_enabled |= !guards.is_empty();
                if crate::predicates::ok(&t, &cfg, u) {
                    for g in &guards {
                        assert!(
                            !matches!(
                                g.name,
                                RuleName::RC1 | RuleName::RC3 | RuleName::RC4 | RuleName::RC5
                            ),
                            "Ok({u}) but {:?} enabled",
                            g.name
                        );
                    }
                }
            }
            assert!(any_enabled, "no process enabled in {cfg:?}");
        }
    }
}
