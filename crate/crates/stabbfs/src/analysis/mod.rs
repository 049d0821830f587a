//! Attractor classification, legitimacy checks, phase-stage labelling, and
//! per-process move-language verification.
//!
//! The attractor hierarchy is nested: A1 (no Faulty, no live illegal root)
//! ⊇ A2 (no unSafe) ⊇ A3 (influential implies in the legal tree) ⊇ A4 (no
//! StrongE). On top of A4 sit the per-level families A5(l) and A4(k,l) that
//! track how far the color/correctness frontier has advanced, and the
//! legitimate set Al = A5(D+1) ∪ ⋃ₖ A4(k, D+1) ∪ A4(D+2, D+1).

mod closure;
mod bounds;

pub use bounds::{
    analyze_trace, bound_report, potential_check, recovery_check, stage_span_check,
    step_lemma_check, BoundReport, ConfigClass, ConstructionStats, PhaseStageSpans,
    PotentialViolation, RecoveryViolation, RootGapReport, RoundsTo, StageViolation,
    StepLemmaViolation, TraceAnalysis,
};
pub use closure::{
    closure_check, closure_check_with_apply, model_check_basics, ApplyFn, BasicsReport,
    CheckMode, ClosureViolation, StepProperty,
};

use crate::daemon::Trace;
use crate::model::{Configuration, NodeId, Status, Topology};
use crate::predicates::Facts;
use crate::rules::RuleName;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AttractorTarget {
    A1,
    A2,
    A3,
    A4,
    Al,
}

pub(crate) fn a1_holds(facts: &Facts) -> bool {
    facts
        .faulty
        .iter()
        .zip(&facts.illegal_live_root)
        .all(|(&f, &ilr)| !f && !ilr)
}

pub(crate) fn a2_holds(facts: &Facts) -> bool {
    a1_holds(facts) && facts.un_safe.iter().all(|&x| !x)
}

pub(crate) fn a3_holds(facts: &Facts) -> bool {
    a2_holds(facts)
        && facts
            .influential
            .iter()
            .zip(&facts.in_legal_tree)
            .all(|(&inf, &ilt)| !inf || ilt)
}

pub(crate) fn a4_holds(facts: &Facts) -> bool {
    a3_holds(facts) && facts.statuses.iter().all(|&s| s != Status::StrongE)
}

/// A5(l) within A4: every process at distance ≤ l carries the root color
/// and every process at distance ≤ l−1 is correct.
pub(crate) fn a5_level_holds(facts: &Facts, topo: &Topology, l: usize) -> bool {
    topo.nodes().all(|u| {
        let d = topo.dist(u);
        (d > l || facts.colors[u] == facts.root_color) && (d >= l || facts.correct[u])
    })
}

/// A4(k,l) within A4, for 1 ≤ k ≤ l: the k-th phase of a construction
/// whose correctness frontier is l.
pub(crate) fn a4kl_holds(
    facts: &Facts,
    cfg: &Configuration,
    topo: &Topology,
    k: usize,
    l: usize,
) -> bool {
    topo.nodes().all(|u| {
        let d = topo.dist(u);
        if d < l && !facts.correct[u] {
            return false;
        }
        if d + 1 <= k && facts.colors[u] != facts.root_color {
            return false;
        }
        if k < d && d <= l && facts.colors[u] == facts.root_color {
            return false;
        }
        if d + 1 == k {
            let all_root_colored = topo
                .neighbors(u)
                .iter()
                .all(|&v| facts.colors[v] == facts.root_color);
            let frontier = facts.influential[u]
                && (facts.child_count[u] == 0 || cfg.state(u).status == Status::Power);
            if !(all_root_colored || frontier) {
                return false;
            }
        }
        if d == k {
            let joined_clean = facts.in_legal_tree[u]
                && !facts.influential[u]
                && cfg.state(u).status == Status::Idle
                && facts.child_count[u] == 0
                && facts.correct[u];
            if facts.colors[u] == facts.root_color && !joined_clean {
                return false;
            }
        }
        if k <= d
            && !matches!(
                cfg.state(u).status,
                Status::Idle | Status::Working | Status::WeakE
            )
        {
            return false;
        }
        true
    })
}

/// A4(l+1,l) within A4: the trailing phases of a construction, where the
/// whole radius-l ball is correct and root-colored.
pub(crate) fn a4_last_holds(
    facts: &Facts,
    cfg: &Configuration,
    topo: &Topology,
    l: usize,
) -> bool {
    topo.nodes().all(|u| {
        let d = topo.dist(u);
        if d <= l && !(facts.correct[u] && facts.colors[u] == facts.root_color) {
            return false;
        }
        if d == l
            && topo
                .neighbors(u)
                .iter()
                .any(|&v| facts.colors[v] != facts.root_color)
        {
            let frontier = facts.influential[u]
                && (facts.child_count[u] == 0 || cfg.state(u).status == Status::Power);
            if !frontier {
                return false;
            }
        }
        true
    })
}

pub(crate) fn al_holds(facts: &Facts, cfg: &Configuration, topo: &Topology) -> bool {
    let d = topo.diameter();
    if a5_level_holds(facts, topo, d + 1) || a4_last_holds(facts, cfg, topo, d + 1) {
        return true;
    }
    (1..=d + 1).any(|k| a4kl_holds(facts, cfg, topo, k, d + 1))
}

/// Membership in one attractor, recomputing the per-node facts.
pub fn in_attractor(cfg: &Configuration, topo: &Topology, target: AttractorTarget) -> bool {
    let facts = Facts::compute(topo, cfg);
    match target {
        AttractorTarget::A1 => a1_holds(&facts),
        AttractorTarget::A2 => a2_holds(&facts),
        AttractorTarget::A3 => a3_holds(&facts),
        AttractorTarget::A4 => a4_holds(&facts),
        AttractorTarget::Al => a4_holds(&facts) && al_holds(&facts, cfg, topo),
    }
}

/// Full per-configuration attractor membership report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttractorReport {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    /// Levels l ∈ [0, D+1] with A5(l) membership.
    pub a5_levels: Vec<usize>,
    /// Pairs (k, l) with 1 ≤ k ≤ l+1 ≤ D+2; k = l+1 names the trailing
    /// family A4(l+1, l).
    pub a4kl_members: Vec<(usize, usize)>,
    pub al: bool,
    pub legitimate_bfs: bool,
}

pub fn attractor_report(cfg: &Configuration, topo: &Topology) -> AttractorReport {
    let facts = Facts::compute(topo, cfg);
    let a1 = a1_holds(&facts);
    let a2 = a2_holds(&facts);
    let a3 = a3_holds(&facts);
    let a4 = a4_holds(&facts);
    let d = topo.diameter();
    let mut a5_levels = Vec::new();
    let mut a4kl_members = Vec::new();
    if a4 {
        for l in 0..=d + 1 {
            if a5_level_holds(&facts, topo, l) {
                a5_levels.push(l);
            }
        }
        for l in 1..=d + 1 {
            for k in 1..=l {
                if a4kl_holds(&facts, cfg, topo, k, l) {
                    a4kl_members.push((k, l));
                }
            }
        }
        for l in 0..=d + 1 {
            if a4_last_holds(&facts, cfg, topo, l) {
                a4kl_members.push((l + 1, l));
            }
        }
    }
    let al = a4 && al_holds(&facts, cfg, topo);
    AttractorReport {
        a1,
        a2,
        a3,
        a4,
        a5_levels,
        a4kl_members,
        al,
        legitimate_bfs: bfs_tree_check(cfg, topo).pass,
    }
}

/// BFS legitimacy of the stored tree: every non-root must hold a tree
/// parent exactly one hop closer to the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BfsTreeCheck {
    pub pass: bool,
    pub violations: Vec<NodeId>,
}

pub fn bfs_tree_check(cfg: &Configuration, topo: &Topology) -> BfsTreeCheck {
    let mut violations = Vec::new();
    for u in topo.nodes() {
        if u == topo.root() {
            continue;
        }
        let ok = match cfg.state(u).tree_parent {
            Some(ts) => topo.dist(ts) + 1 == topo.dist(u),
            None => false,
        };
        if !ok {
            violations.push(u);
        }
    }
    BfsTreeCheck {
        pass: violations.is_empty(),
        violations,
    }
}

/// Phase stages within A4. Forwarding: some influential process lacks
/// Power; expansion: influential processes exist, all Power; backwarding:
/// none left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    Forwarding,
    Expansion,
    Backwarding,
    NotInPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StageLabel {
    pub stage: Stage,
    /// Maximal height of a Working process in the legal tree, 0 if none.
    pub working_height: usize,
}

pub fn stage_label(cfg: &Configuration, topo: &Topology) -> StageLabel {
    let facts = Facts::compute(topo, cfg);
    stage_label_from_facts(&facts, cfg, topo)
}

pub(crate) fn stage_label_from_facts(
    facts: &Facts,
    cfg: &Configuration,
    topo: &Topology,
) -> StageLabel {
    let working_height = working_height(facts, cfg, topo);
    if !a4_holds(facts) {
        return StageLabel {
            stage: Stage::NotInPhase,
            working_height,
        };
    }
    let mut any = false;
    let mut all_power = true;
    for u in topo.nodes() {
        if facts.influential[u] {
            any = true;
            if cfg.state(u).status != Status::Power {
                all_power = false;
            }
        }
    }
    let stage = if !any {
        Stage::Backwarding
    } else if all_power {
        Stage::Expansion
    } else {
        Stage::Forwarding
    };
    StageLabel {
        stage,
        working_height,
    }
}

fn working_height(facts: &Facts, cfg: &Configuration, topo: &Topology) -> usize {
    fn height(
        u: NodeId,
        topo: &Topology,
        cfg: &Configuration,
        facts: &Facts,
        memo: &mut [Option<usize>],
    ) -> usize {
        if let Some(h) = memo[u] {
            return h;
        }
        let h = topo
            .neighbors(u)
            .iter()
            .filter(|&&v| cfg.state(v).parent == Some(u) && facts.in_legal_tree[v])
            .map(|&v| 1 + height(v, topo, cfg, facts, memo))
            .max()
            .unwrap_or(0);
        memo[u] = Some(h);
        h
    }
    let mut memo = vec![None; topo.node_count()];
    topo.nodes()
        .filter(|&u| facts.in_legal_tree[u] && cfg.state(u).status == Status::Working)
        .map(|u| height(u, topo, cfg, facts, &mut memo))
        .max()
        .unwrap_or(0)
}

/// Verdict of the per-process move-language check.
///
/// Root moves must stay inside {R1, R2}; since a suffix may start anywhere
/// in the pattern (R1 R2*)*, any order of those two is acceptable. Non-root
/// moves must stay inside {R3, R4, R5, R6, R7} with the cycle successor
/// relation R3→R5→{R6,R7}, R6→R4, R4→{R6,R7}, R7→R3; the first observed
/// move is unconstrained and the tail may be incomplete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoveVerdict {
    pub node: NodeId,
    pub accepted: bool,
    /// First offending (step index, rule) when rejected.
    pub first_offense: Option<(usize, RuleName)>,
}

pub fn move_language_check(trace: &Trace, topo: &Topology, from_step: usize) -> Vec<MoveVerdict> {
    let root = topo.root();
    let mut verdicts: Vec<MoveVerdict> = topo
        .nodes()
        .map(|node| MoveVerdict {
            node,
            accepted: true,
            first_offense: None,
        })
        .collect();
    let mut last: Vec<Option<RuleName>> = vec![None; topo.node_count()];
    for i in from_step.max(1)..=trace.step_count() {
        for (u, rule) in trace.activation(i) {
            let v = &mut verdicts[*u];
            if !v.accepted {
                continue;
            }
            let ok = if *u == root {
                matches!(rule.name, RuleName::R1 | RuleName::R2)
            } else {
                let in_alphabet = matches!(
                    rule.name,
                    RuleName::R3 | RuleName::R4 | RuleName::R5 | RuleName::R6 | RuleName::R7
                );
                let follows = match last[*u] {
                    None => true,
                    Some(prev) => match prev {
                        RuleName::R3 => rule.name == RuleName::R5,
                        RuleName::R5 | RuleName::R4 => {
                            matches!(rule.name, RuleName::R6 | RuleName::R7)
                        }
                        RuleName::R6 => rule.name == RuleName::R4,
                        RuleName::R7 => rule.name == RuleName::R3,
                        _ => false,
                    },
                };
                in_alphabet && follows
            };
            if ok {
                last[*u] = Some(rule.name);
            } else {
                v.accepted = false;
                v.first_offense = Some((i, rule.name));
            }
        }
    }
    verdicts
}
