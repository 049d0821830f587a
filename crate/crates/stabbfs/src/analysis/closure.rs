//! Step-level closure checking and the exhaustive basics checker
//! (liveness, guard exclusivity).
//!
//! Closure properties are universally quantified over configurations and
//! nonempty activation subsets of the enabled set; the checker enumerates
//! or samples both and returns every counterexample it finds. The apply
//! function is injectable so a deliberately corrupted rule table can verify
//! that the checker actually detects violations.

use crate::model::{
    enumerate_configurations, random_configuration_with, Configuration, ModelError, NodeId,
    ProcessState, Status, Topology,
};
use crate::predicates::{strong_conflict, strong_conflict_single_witness, Facts, PotentialCounter};
use crate::rules::{apply_rule_unchecked, enabled_guards, Rule, RuleName};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::a4_holds;

/// Step-level properties: each is an implication from the pre-step
/// configuration (and the activation) to the post-step configuration.
///
/// The unSafe closure and the becoming-influential color property are
/// anchored at A1: phase toggles next to an off-color Faulty child make a
/// PowerParent chain influential without the root color, so the
/// unrestricted variants have counterexamples from arbitrary
/// configurations. Those variants are kept, outside [`StepProperty::ALL`],
/// so the counterexamples stay reproducible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepProperty {
    /// A process that is not Faulty stays not Faulty.
    NotFaultyClosed,
    /// A process that executed a rule is never Faulty afterwards.
    MoverNotFaultyAfter,
    /// A process that is not a live illegal root stays that way.
    NotIllegalLiveRootClosed,
    /// Within A1, a process that is not unSafe stays not unSafe.
    NotUnsafeClosedInA1,
    /// The unrestricted unSafe closure; falsifiable, kept for auditing.
    NotUnsafeClosedUnrestricted,
    /// Within A4, steps without R1 never shrink the root-color count.
    RColorMonotoneInA4,
    /// Within A4, a process that is not unRegular stays not unRegular.
    NotUnRegularClosedInA4,
    /// Within A4, ¬unRegular ∧ (inLegalTree ∨ Idle) is closed.
    LegalOrIdleClosedInA4,
    /// A non-root that moves and is influential afterwards executed R5.
    InfluentialMoveIsR5,
    /// Within A1, a process that becomes influential carries the root
    /// color.
    BecomingInfluentialRootColorInA1,
    /// The unrestricted variant; falsifiable, kept for auditing.
    BecomingInfluentialRootColorUnrestricted,
}

impl StepProperty {
    pub const ALL: [StepProperty; 9] = [
        StepProperty::NotFaultyClosed,
        StepProperty::MoverNotFaultyAfter,
        StepProperty::NotIllegalLiveRootClosed,
        StepProperty::NotUnsafeClosedInA1,
        StepProperty::RColorMonotoneInA4,
        StepProperty::NotUnRegularClosedInA4,
        StepProperty::LegalOrIdleClosedInA4,
        StepProperty::InfluentialMoveIsR5,
        StepProperty::BecomingInfluentialRootColorInA1,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            StepProperty::NotFaultyClosed => "not-faulty-closed",
            StepProperty::MoverNotFaultyAfter => "mover-not-faulty-after",
            StepProperty::NotIllegalLiveRootClosed => "not-illegal-live-root-closed",
            StepProperty::NotUnsafeClosedInA1 => "not-unsafe-closed-in-a1",
            StepProperty::NotUnsafeClosedUnrestricted => "not-unsafe-closed-unrestricted",
            StepProperty::RColorMonotoneInA4 => "r-color-monotone-in-a4",
            StepProperty::NotUnRegularClosedInA4 => "not-unregular-closed-in-a4",
            StepProperty::LegalOrIdleClosedInA4 => "legal-or-idle-closed-in-a4",
            StepProperty::InfluentialMoveIsR5 => "influential-move-is-r5",
            StepProperty::BecomingInfluentialRootColorInA1 => {
                "becoming-influential-root-color-in-a1"
            }
            StepProperty::BecomingInfluentialRootColorUnrestricted => {
                "becoming-influential-root-color-unrestricted"
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// Every configuration and every nonempty activation subset.
    Exhaustive { cap: u128 },
    /// Random configurations with one random nonempty activation each.
    Randomized { trials: u64, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct ClosureViolation {
    pub config: Configuration,
    pub activation: Vec<(NodeId, Rule)>,
    /// Offending process, when the property is per-process.
    pub node: Option<NodeId>,
}

/// Replacement action table, matching `rules::apply_rule_unchecked`.
pub type ApplyFn<'a> = &'a dyn Fn(&Configuration, NodeId, &Rule) -> ProcessState;

pub fn closure_check(
    topo: &Topology,
    property: StepProperty,
    mode: CheckMode,
) -> Result<Vec<ClosureViolation>, ModelError> {
    closure_check_with_apply(topo, property, mode, &apply_rule_unchecked)
}

pub fn closure_check_with_apply(
    topo: &Topology,
    property: StepProperty,
    mode: CheckMode,
    apply: ApplyFn<'_>,
) -> Result<Vec<ClosureViolation>, ModelError> {
    let mut violations = Vec::new();
    match mode {
        CheckMode::Exhaustive { cap } => {
            for cfg in enumerate_configurations(topo, cap)? {
                let enabled = enabled_nodes(&cfg, topo);
                if enabled.is_empty() {
                    continue;
                }
                let before = Facts::compute(topo, &cfg);
                for subset_bits in 1u32..(1u32 << enabled.len()) {
                    let activation: Vec<(NodeId, Rule)> = enabled
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| subset_bits >> i & 1 == 1)
                        .map(|(_, &(u, rule))| (u, rule))
                        .collect();
                    check_step(
                        topo, &cfg, &before, &activation, property, apply, &mut violations,
                    );
                }
            }
        }
        CheckMode::Randomized { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let cfg = random_configuration_with(topo, &mut rng);
                let enabled = enabled_nodes(&cfg, topo);
                if enabled.is_empty() {
                    continue;
                }
                let before = Facts::compute(topo, &cfg);
                let activation = loop {
                    let picked: Vec<(NodeId, Rule)> = enabled
                        .iter()
                        .copied()
                        .filter(|_| rng.gen_bool(0.5))
                        .collect();
                    if !picked.is_empty() {
                        break picked;
                    }
                };
                check_step(
                    topo, &cfg, &before, &activation, property, apply, &mut violations,
                );
            }
        }
    }
    Ok(violations)
}

fn enabled_nodes(cfg: &Configuration, topo: &Topology) -> Vec<(NodeId, Rule)> {
    topo.nodes()
        .filter_map(|u| enabled_guards(cfg, topo, u).first().copied().map(|r| (u, r)))
        .collect()
}

fn check_step(
    topo: &Topology,
    cfg: &Configuration,
    before: &Facts,
    activation: &[(NodeId, Rule)],
    property: StepProperty,
    apply: ApplyFn<'_>,
    violations: &mut Vec<ClosureViolation>,
) {
    let mut after_cfg = cfg.clone();
    for (u, rule) in activation {
        *after_cfg.state_mut(*u) = apply(cfg, *u, rule);
    }
    let after = Facts::compute(topo, &after_cfg);
    let n = topo.node_count();
    let root = topo.root();
    let offend = |node: Option<NodeId>, violations: &mut Vec<ClosureViolation>| {
        violations.push(ClosureViolation {
            config: cfg.clone(),
            activation: activation.to_vec(),
            node,
        });
    };
    match property {
        StepProperty::NotFaultyClosed => {
            for u in 0..n {
                if !before.faulty[u] && after.faulty[u] {
                    offend(Some(u), violations);
                }
            }
        }
        StepProperty::MoverNotFaultyAfter => {
            for (u, _) in activation {
                if after.faulty[*u] {
                    offend(Some(*u), violations);
                }
            }
        }
        StepProperty::NotIllegalLiveRootClosed => {
            for u in 0..n {
                if !before.illegal_live_root[u] && after.illegal_live_root[u] {
                    offend(Some(u), violations);
                }
            }
        }
        StepProperty::NotUnsafeClosedInA1 => {
            if super::a1_holds(before) {
                for u in 0..n {
                    if !before.un_safe[u] && after.un_safe[u] {
                        offend(Some(u), violations);
                    }
                }
            }
        }
        StepProperty::NotUnsafeClosedUnrestricted => {
            for u in 0..n {
                if !before.un_safe[u] && after.un_safe[u] {
                    offend(Some(u), violations);
                }
            }
        }
        StepProperty::RColorMonotoneInA4 => {
            let has_r1 = activation.iter().any(|(_, r)| r.name == RuleName::R1);
            if a4_holds(before) && !has_r1 {
                let before_count = before.count(PotentialCounter::RColorCount);
                let after_count = after.count(PotentialCounter::RColorCount);
                if after_count < before_count {
                    offend(None, violations);
                }
            }
        }
        StepProperty::NotUnRegularClosedInA4 => {
            if a4_holds(before) {
                for u in 0..n {
                    if !before.un_regular[u] && after.un_regular[u] {
                        offend(Some(u), violations);
                    }
                }
            }
        }
        StepProperty::LegalOrIdleClosedInA4 => {
            if a4_holds(before) {
                for u in 0..n {
                    let pre = !before.un_regular[u]
                        && (before.in_legal_tree[u] || before.statuses[u] == Status::Idle);
                    let post = !after.un_regular[u]
                        && (after.in_legal_tree[u] || after.statuses[u] == Status::Idle);
                    if pre && !post {
                        offend(Some(u), violations);
                    }
                }
            }
        }
        StepProperty::InfluentialMoveIsR5 => {
            for (u, rule) in activation {
                if *u != root && after.influential[*u] && rule.name != RuleName::R5 {
                    offend(Some(*u), violations);
                }
            }
        }
        StepProperty::BecomingInfluentialRootColorInA1 => {
            if super::a1_holds(before) {
                for u in 0..n {
                    if !before.influential[u]
                        && after.influential[u]
                        && after.colors[u] != after.root_color
                    {
                        offend(Some(u), violations);
                    }
                }
            }
        }
        StepProperty::BecomingInfluentialRootColorUnrestricted => {
            for u in 0..n {
                if !before.influential[u]
                    && after.influential[u]
                    && after.colors[u] != after.root_color
                {
                    offend(Some(u), violations);
                }
            }
        }
    }
}

/// Exhaustive liveness and guard-exclusivity report, plus the count of
/// configurations where the two strong-conflict readings disagree on some
/// process (kept auditable on purpose).
#[derive(Clone, Debug)]
pub struct BasicsReport {
    pub configurations: u128,
    pub liveness_violations: Vec<Configuration>,
    pub exclusivity_violations: Vec<(Configuration, NodeId, Vec<RuleName>)>,
    pub strong_conflict_divergences: u64,
}

pub fn model_check_basics(topo: &Topology, cap: u128) -> Result<BasicsReport, ModelError> {
    let mut report = BasicsReport {
        configurations: 0,
        liveness_violations: Vec::new(),
        exclusivity_violations: Vec::new(),
        strong_conflict_divergences: 0,
    };
    for cfg in enumerate_configurations(topo, cap)? {
        report.configurations += 1;
        let mut any_enabled = false;
        let mut diverged = false;
        for u in topo.nodes() {
            let guards = enabled_guards(&cfg, topo, u);
            if guards.len() > 1 {
                report.exclusivity_violations.push((
                    cfg.clone(),
                    u,
                    guards.iter().map(|g| g.name).collect(),
                ));
            }
            any_enabled |= !guards.is_empty();
            if strong_conflict(topo, &cfg, u) != strong_conflict_single_witness(topo, &cfg, u) {
                diverged = true;
            }
        }
        if diverged {
            report.strong_conflict_divergences += 1;
        }
        if !any_enabled {
            report.liveness_violations.push(cfg);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_topology;

    #[test]
    fn p2_closures_hold_exhaustively() {
        let t = build_topology(&[(0, 1)], 0).unwrap();
        for property in StepProperty::ALL {
            let violations =
                closure_check(&t, property, CheckMode::Exhaustive { cap: 1 << 20 }).unwrap();
            assert!(
                violations.is_empty(),
                "{}: {} violations, first {:?}",
                property.label(),
                violations.len(),
                violations.first()
            );
        }
    }

    /// The unrestricted unSafe closure has a concrete counterexample: a
    /// root with a wrong-colored (hence Faulty) Idle child toggles its
    /// phase with R2, the child becomes an off-color PowerParent, and the
    /// root is suddenly unSafe. The A1-anchored variant rejects the
    /// configuration instead.
    #[test]
    fn unrestricted_unsafe_closure_has_the_known_counterexample() {
        use crate::model::{Color, Phase, ProcessState, Status};
        let t = build_topology(&[(0, 1)], 0).unwrap();
        let violations = closure_check(
            &t,
            StepProperty::NotUnsafeClosedUnrestricted,
            CheckMode::Exhaustive { cap: 1 << 20 },
        )
        .unwrap();
        assert!(!violations.is_empty());
        let pinned = Configuration::new(vec![
            ProcessState::new(None, None, Color::C0, Status::Working, Phase::A),
            ProcessState::new(Some(0), None, Color::C1, Status::Idle, Phase::A),
        ]);
        assert!(
            violations.iter().any(|v| v.config == pinned),
            "the hand-derived counterexample is among the findings"
        );
        assert!(!crate::analysis::in_attractor(
            &pinned,
            &t,
            crate::analysis::AttractorTarget::A1
        ));
        // Same root cause breaks the unrestricted becoming-influential
        // color property.
        let color_violations = closure_check(
            &t,
            StepProperty::BecomingInfluentialRootColorUnrestricted,
            CheckMode::Exhaustive { cap: 1 << 20 },
        )
        .unwrap();
        assert!(!color_violations.is_empty());
    }

    #[test]
    fn corrupted_rc5_is_caught_by_the_checker() {
        // Mutation: RC5 keeps the parent pointer. Faulty processes then stay
        // Faulty after moving, which MoverNotFaultyAfter must detect.
        let t = build_topology(&[(0, 1)], 0).unwrap();
        let corrupted = |cfg: &Configuration, u: NodeId, rule: &Rule| -> ProcessState {
            let mut st = apply_rule_unchecked(cfg, u, rule);
            if rule.name == RuleName::RC5 {
                st.parent = cfg.state(u).parent;
            }
            st
        };
        let violations = closure_check_with_apply(
            &t,
            StepProperty::MoverNotFaultyAfter,
            CheckMode::Exhaustive { cap: 1 << 20 },
            &corrupted,
        )
        .unwrap();
        assert!(!violations.is_empty(), "mutation escaped the checker");
    }

    #[test]
    fn randomized_mode_is_deterministic() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let a = closure_check(
            &t,
            StepProperty::NotFaultyClosed,
            CheckMode::Randomized {
                trials: 500,
                seed: 11,
            },
        )
        .unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn basics_on_p2() {
        let t = build_topology(&[(0, 1)], 0).unwrap();
        let report = model_check_basics(&t, 1 << 20).unwrap();
        assert_eq!(report.configurations, 960);
        assert!(report.liveness_violations.is_empty());
        assert!(report.exclusivity_violations.is_empty());
        // The single-witness reading genuinely differs somewhere.
        assert!(report.strong_conflict_divergences > 0);
    }
}
