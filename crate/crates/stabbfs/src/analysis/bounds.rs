//! Trace-level measurement: rounds to each attractor, root-action gaps,
//! per-construction statistics, erroneous-status recovery windows,
//! potential-function windows, phase stages, and the per-phase step lemmas
//! of the legitimate regime.
//!
//! Properties of the form "within k rounds of configuration c" are
//! measured against the rounds of the suffix execution that starts at c,
//! not against the global round grid, matching the way the bounds are
//! quantified.

use super::{
    a1_holds, a2_holds, a3_holds, a4_holds, a4_last_holds, a4kl_holds, a5_level_holds, al_holds,
    bfs_tree_check, stage_label_from_facts, Stage,
};
use crate::daemon::Trace;
use crate::model::{NodeId, Status, Topology};
use crate::predicates::{Facts, PotentialCounter};
use crate::rules::RuleName;
use serde::Serialize;

/// Deepest nested attractor a configuration belongs to, plus membership in
/// the legitimate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigClass {
    /// 0 = outside A1, 1..=4 = inside A1..A4.
    pub level: u8,
    pub al: bool,
}

#[derive(Clone, Debug)]
struct ConfigSummary {
    class: ConfigClass,
    stage: Stage,
    /// EndIntermediatePhase(r) or EndLastPhase(r).
    root_phase_end: bool,
    statuses: Vec<Status>,
    val_pic: u32,
    val_pir: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoundsTo {
    pub a1: Option<u64>,
    pub a2: Option<u64>,
    pub a3: Option<u64>,
    pub a4: Option<u64>,
    pub al: Option<u64>,
}

/// One construction: the window between two consecutive root R1 executions
/// fired from inside the legitimate set.
#[derive(Clone, Debug, Serialize)]
pub struct ConstructionStats {
    pub open_step: usize,
    pub close_step: usize,
    /// Rounds of the suffix anchored right after the opening R1, up to and
    /// including the closing R1.
    pub rounds: u64,
    /// Moves per process over steps [open_step, close_step).
    pub moves_per_process: Vec<u32>,
    pub max_moves: u32,
    /// BFS legitimacy of the configuration the closing R1 fired from.
    pub bfs_ok_at_close: bool,
}

/// Root activity inside A4: ceiling-round gaps between consecutive root
/// actions, plus the complete actionless rounds trailing the last one.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RootGapReport {
    pub realized: Vec<u64>,
    pub trailing_rounds: u64,
}

impl RootGapReport {
    pub fn max_realized(&self) -> Option<u64> {
        self.realized.iter().copied().max()
    }
}

/// Per-phase stage spans in ceiling rounds, each anchored at its own start.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseStageSpans {
    pub anchor_config: usize,
    pub end_step: Option<usize>,
    pub forwarding_rounds: u64,
    pub expansion_rounds: u64,
    pub backwarding_rounds: u64,
}

#[derive(Clone, Debug)]
pub struct TraceAnalysis {
    pub rounds_to: RoundsTo,
    pub a1_entry: Option<usize>,
    pub a4_entry: Option<usize>,
    pub al_entry: Option<usize>,
    /// (step, BFS check of the pre-step configuration) for every R1 fired
    /// from inside Al.
    pub r1_after_al: Vec<(usize, bool)>,
    /// Steps at which the root executed any rule.
    pub root_action_steps: Vec<usize>,
    /// Steps at which R1 was executed, inside Al or not.
    pub r1_steps: Vec<usize>,
    pub constructions: Vec<ConstructionStats>,
    pub root_gaps: RootGapReport,
    summaries: Vec<ConfigSummary>,
}

fn summarize(facts: &Facts, cfg: &crate::model::Configuration, topo: &Topology) -> ConfigSummary {
    let level = if !a1_holds(facts) {
        0
    } else if !a2_holds(facts) {
        1
    } else if !a3_holds(facts) {
        2
    } else if !a4_holds(facts) {
        3
    } else {
        4
    };
    let al = level == 4 && al_holds(facts, cfg, topo);
    let stage = stage_label_from_facts(facts, cfg, topo).stage;
    let root = topo.root();
    let root_phase_end = crate::predicates::end_intermediate_phase(topo, cfg, root)
        || crate::predicates::end_last_phase(topo, cfg, root);
    ConfigSummary {
        class: ConfigClass { level, al },
        stage,
        root_phase_end,
        statuses: facts.statuses.clone(),
        val_pic: (facts.count(PotentialCounter::Pic)
            + facts.count(PotentialCounter::PicPowerParent)) as u32,
        val_pir: (facts.count(PotentialCounter::Pir)
            + facts.count(PotentialCounter::PirPowerParent)) as u32,
    }
}

/// Ceiling round index of step `target` in the suffix execution anchored at
/// configuration `anchor`; 0 when `target <= anchor`.
fn ceil_rounds(trace: &Trace, anchor: usize, target: usize) -> u64 {
    if target <= anchor {
        return 0;
    }
    let mut outstanding = trace.enabled_mask(anchor);
    let mut rounds = 0u64;
    for j in anchor + 1..target {
        outstanding &= !trace.activation_mask(j);
        outstanding &= trace.enabled_mask(j);
        if outstanding == 0 {
            rounds += 1;
            outstanding = trace.enabled_mask(j);
        }
    }
    rounds + 1
}

/// Complete rounds of the suffix anchored at `anchor`, up to the trace end.
fn complete_suffix_rounds(trace: &Trace, anchor: usize) -> u64 {
    let mut outstanding = trace.enabled_mask(anchor);
    let mut rounds = 0u64;
    for j in anchor + 1..=trace.step_count() {
        outstanding &= !trace.activation_mask(j);
        outstanding &= trace.enabled_mask(j);
        if outstanding == 0 {
            rounds += 1;
            outstanding = trace.enabled_mask(j);
        }
    }
    rounds
}

pub fn analyze_trace(trace: &Trace, topo: &Topology) -> TraceAnalysis {
    let n = topo.node_count();
    let root = topo.root();
    let mut summaries: Vec<ConfigSummary> = Vec::with_capacity(trace.step_count() + 1);
    {
        let facts = Facts::compute(topo, &trace.initial);
        summaries.push(summarize(&facts, &trace.initial, topo));
    }
    let mut r1_after_al: Vec<(usize, bool)> = Vec::new();
    let mut root_action_steps: Vec<usize> = Vec::new();
    let mut r1_steps: Vec<usize> = Vec::new();
    trace.replay(|ix, before, activated, after| {
        let facts = Facts::compute(topo, after);
        summaries.push(summarize(&facts, after, topo));
        let root_acted = activated.iter().any(|(u, _)| *u == root);
        if root_acted {
            root_action_steps.push(ix);
        }
        if activated
            .iter()
            .any(|(u, r)| *u == root && r.name == RuleName::R1)
        {
            r1_steps.push(ix);
            if summaries[ix - 1].class.al {
                r1_after_al.push((ix, bfs_tree_check(before, topo).pass));
            }
        }
    });

    let entry = |pred: &dyn Fn(&ConfigSummary) -> bool| -> Option<usize> {
        summaries.iter().position(|s| pred(s))
    };
    let a1_entry = entry(&|s| s.class.level >= 1);
    let a2_entry = entry(&|s| s.class.level >= 2);
    let a3_entry = entry(&|s| s.class.level >= 3);
    let a4_entry = entry(&|s| s.class.level >= 4);
    let al_entry = entry(&|s| s.class.al);
    let to_rounds = |e: Option<usize>| e.map(|i| trace.round_index_of_config(i));
    let rounds_to = RoundsTo {
        a1: to_rounds(a1_entry),
        a2: to_rounds(a2_entry),
        a3: to_rounds(a3_entry),
        a4: to_rounds(a4_entry),
        al: to_rounds(al_entry),
    };

    let mut constructions = Vec::new();
    for pair in r1_after_al.windows(2) {
        let (open, _) = pair[0];
        let (close, bfs_ok) = pair[1];
        let mut moves = vec![0u32; n];
        for step in open..close {
            for (u, _) in trace.activation(step) {
                moves[*u] += 1;
            }
        }
        constructions.push(ConstructionStats {
            open_step: open,
            close_step: close,
            rounds: ceil_rounds(trace, open, close),
            max_moves: moves.iter().copied().max().unwrap_or(0),
            moves_per_process: moves,
            bfs_ok_at_close: bfs_ok,
        });
    }

    let mut root_gaps = RootGapReport::default();
    if let Some(a4_start) = a4_entry {
        let mut anchor = a4_start;
        for &t in root_action_steps.iter().filter(|&&t| t > a4_start) {
            root_gaps.realized.push(ceil_rounds(trace, anchor, t));
            anchor = t;
        }
        root_gaps.trailing_rounds = complete_suffix_rounds(trace, anchor);
    }

    TraceAnalysis {
        rounds_to,
        a1_entry,
        a4_entry,
        al_entry,
        r1_after_al,
        root_action_steps,
        r1_steps,
        constructions,
        root_gaps,
        summaries,
    }
}

impl TraceAnalysis {
    pub fn class_of_config(&self, i: usize) -> ConfigClass {
        self.summaries[i].class
    }

    pub fn stage_of_config(&self, i: usize) -> Stage {
        self.summaries[i].stage
    }
}

/// Violation of one of the erroneous-status recovery windows.
#[derive(Clone, Debug, Serialize)]
pub struct RecoveryViolation {
    pub node: NodeId,
    pub status: Status,
    pub anchor_config: usize,
    pub deadline_step: usize,
    pub kind: &'static str,
}

/// Checks the recovery windows on one trace, anchored inside A1 (the
/// windows below are stated from A1; the pre-A1 prefix is at most one
/// round):
///
/// * StrongE ends within 2 rounds; a non-root leaves to Idle or WeakE, the
///   root to Working.
/// * WeakE ends within 2 rounds, to Idle or StrongE.
/// * Power ends within 4 rounds unless the process executed R1.
pub fn recovery_check(
    trace: &Trace,
    topo: &Topology,
    analysis: &TraceAnalysis,
) -> Vec<RecoveryViolation> {
    let mut violations = Vec::new();
    let Some(a1_entry) = analysis.a1_entry else {
        return violations;
    };
    let m = trace.step_count();
    let root = topo.root();
    for u in topo.nodes() {
        // R1 executions split the root's Power runs: the window restarts.
        let r1_splits: Vec<usize> = if u == root {
            analysis.r1_steps.clone()
        } else {
            Vec::new()
        };
        let mut i = 0usize;
        while i <= m {
            let status = analysis.summaries[i].statuses[u];
            if !matches!(status, Status::StrongE | Status::WeakE | Status::Power) {
                i += 1;
                continue;
            }
            let start = i;
            let mut end = m + 1;
            for j in start + 1..=m {
                if analysis.summaries[j].statuses[u] != status {
                    end = j;
                    break;
                }
            }
            let segment_starts: Vec<usize> = if status == Status::Power {
                let mut anchors = vec![start];
                anchors.extend(
                    r1_splits
                        .iter()
                        .copied()
                        .filter(|&t| t > start && t < end.min(m + 1)),
                );
                anchors
            } else {
                vec![start]
            };
            for (seg_ix, &seg_start) in segment_starts.iter().enumerate() {
                let seg_end = segment_starts
                    .get(seg_ix + 1)
                    .copied()
                    .unwrap_or(end.min(m + 1));
                let anchor = seg_start.max(a1_entry);
                if seg_end <= anchor {
                    continue;
                }
                let window = match status {
                    Status::Power => 4,
                    _ => 2,
                };
                let boundaries = trace.suffix_round_boundaries(anchor, window);
                if boundaries.len() < window {
                    continue; // trace ended before the deadline
                }
                let deadline = boundaries[window - 1];
                if seg_end > deadline {
                    violations.push(RecoveryViolation {
                        node: u,
                        status,
                        anchor_config: anchor,
                        deadline_step: deadline,
                        kind: "window-exceeded",
                    });
                }
            }
            // Successor-status checks at the interval end.
            if end <= m {
                let successor = analysis.summaries[end].statuses[u];
                let ok = match status {
                    Status::StrongE => {
                        if u == root {
                            successor == Status::Working
                        } else {
                            matches!(successor, Status::Idle | Status::WeakE)
                        }
                    }
                    Status::WeakE => matches!(successor, Status::Idle | Status::StrongE),
                    _ => true,
                };
                if !ok && end > a1_entry {
                    violations.push(RecoveryViolation {
                        node: u,
                        status,
                        anchor_config: start.max(a1_entry),
                        deadline_step: end,
                        kind: "bad-successor-status",
                    });
                }
            }
            i = end.max(i + 1);
        }
    }
    violations
}

/// Violation of the 4-round potential-decrease windows.
#[derive(Clone, Debug, Serialize)]
pub struct PotentialViolation {
    pub kind: &'static str,
    pub anchor_config: usize,
    pub window_end_step: usize,
    pub before: u32,
    pub after: u32,
}

/// Over every qualifying 4-round window (anchored at the attractor entry
/// and at every global round boundary, with no R1 inside the window),
/// #PIC + #PIC_PowerParent strictly decreases while positive from A1, and
/// #PIR + #PIR_PowerParent from A2.
pub fn potential_check(
    trace: &Trace,
    topo: &Topology,
    analysis: &TraceAnalysis,
) -> Vec<PotentialViolation> {
    let _ = topo;
    let mut violations = Vec::new();
    let Some(a1_entry) = analysis.a1_entry else {
        return violations;
    };
    let mut anchors: Vec<usize> = vec![a1_entry];
    anchors.extend(
        trace
            .round_boundaries
            .iter()
            .copied()
            .filter(|&b| b >= a1_entry),
    );
    for &anchor in &anchors {
        let boundaries = trace.suffix_round_boundaries(anchor, 4);
        if boundaries.len() < 4 {
            continue;
        }
        let end = boundaries[3];
        let r1_inside = analysis
            .r1_steps
            .iter()
            .any(|&t| t > anchor && t <= end);
        if r1_inside {
            continue;
        }
        let before = &analysis.summaries[anchor];
        let after = &analysis.summaries[end];
        if before.class.level >= 1 && before.val_pic > 0 && after.val_pic >= before.val_pic {
            violations.push(PotentialViolation {
                kind: "pic",
                anchor_config: anchor,
                window_end_step: end,
                before: before.val_pic,
                after: after.val_pic,
            });
        }
        if before.class.level >= 2 && before.val_pir > 0 && after.val_pir >= before.val_pir {
            violations.push(PotentialViolation {
                kind: "pir",
                anchor_config: anchor,
                window_end_step: end,
                before: before.val_pir,
                after: after.val_pir,
            });
        }
    }
    violations
}

#[derive(Clone, Debug, Serialize)]
pub struct StageViolation {
    pub config: usize,
    pub kind: &'static str,
}

/// Within the A4 suffix, phases (segments between root actions) must run
/// forwarding -> expansion -> backwarding monotonically, forwarding ends
/// within n-1 rounds, expansion within 4, and after n-1 rounds of
/// backwarding the root observes the end of the phase.
pub fn stage_span_check(
    trace: &Trace,
    topo: &Topology,
    analysis: &TraceAnalysis,
) -> Vec<StageViolation> {
    let mut violations = Vec::new();
    let Some(a4_entry) = analysis.a4_entry else {
        return violations;
    };
    let n = topo.node_count();
    let m = trace.step_count();
    let mut segment_starts = vec![a4_entry];
    segment_starts.extend(
        analysis
            .root_action_steps
            .iter()
            .copied()
            .filter(|&t| t > a4_entry),
    );
    for (ix, &a) in segment_starts.iter().enumerate() {
        let seg_end = segment_starts.get(ix + 1).copied().unwrap_or(m + 1);
        let last = seg_end.saturating_sub(1).min(m);
        let rank = |s: Stage| match s {
            Stage::Forwarding => 0,
            Stage::Expansion => 1,
            Stage::Backwarding => 2,
            Stage::NotInPhase => 3,
        };
        let mut prev = rank(analysis.summaries[a].stage);
        if prev == 3 {
            violations.push(StageViolation {
                config: a,
                kind: "left-a4",
            });
            continue;
        }
        for i in a + 1..=last {
            let cur = rank(analysis.summaries[i].stage);
            if cur == 3 {
                violations.push(StageViolation {
                    config: i,
                    kind: "left-a4",
                });
                break;
            }
            if cur < prev {
                violations.push(StageViolation {
                    config: i,
                    kind: "stage-regressed",
                });
                break;
            }
            prev = cur;
        }
        // Forwarding deadline: n-1 rounds from the segment start.
        if analysis.summaries[a].stage == Stage::Forwarding && n >= 2 {
            let bounds = trace.suffix_round_boundaries(a, n - 1);
            if bounds.len() == n - 1 {
                let deadline = bounds[n - 2];
                if deadline < seg_end && analysis.summaries[deadline].stage == Stage::Forwarding {
                    violations.push(StageViolation {
                        config: deadline,
                        kind: "forwarding-over-budget",
                    });
                }
            }
        }
        // Expansion deadline: 4 rounds from its own start.
        if let Some(e_start) = (a..=last).find(|&i| analysis.summaries[i].stage == Stage::Expansion)
        {
            let bounds = trace.suffix_round_boundaries(e_start, 4);
            if bounds.len() == 4 {
                let deadline = bounds[3];
                if deadline < seg_end && analysis.summaries[deadline].stage == Stage::Expansion {
                    violations.push(StageViolation {
                        config: deadline,
                        kind: "expansion-over-budget",
                    });
                }
            }
        }
        // Backwarding: after n-1 rounds the root sees the phase end.
        if let Some(b_start) =
            (a..=last).find(|&i| analysis.summaries[i].stage == Stage::Backwarding)
        {
            if n >= 2 {
                let bounds = trace.suffix_round_boundaries(b_start, n - 1);
                if bounds.len() == n - 1 {
                    let deadline = bounds[n - 2];
                    if deadline < seg_end && !analysis.summaries[deadline].root_phase_end {
                        violations.push(StageViolation {
                            config: deadline,
                            kind: "backwarding-over-budget",
                        });
                    }
                }
            }
        }
    }
    violations
}

/// Per-phase stage spans for reporting.
pub fn phase_stage_spans(trace: &Trace, analysis: &TraceAnalysis) -> Vec<PhaseStageSpans> {
    let mut spans = Vec::new();
    let Some(a4_entry) = analysis.a4_entry else {
        return spans;
    };
    let m = trace.step_count();
    let mut segment_starts = vec![a4_entry];
    segment_starts.extend(
        analysis
            .root_action_steps
            .iter()
            .copied()
            .filter(|&t| t > a4_entry),
    );
    for (ix, &a) in segment_starts.iter().enumerate() {
        let seg_end = segment_starts.get(ix + 1).copied();
        let last = seg_end.map(|e| e - 1).unwrap_or(m).min(m);
        let t_e = (a..=last)
            .find(|&i| analysis.summaries[i].stage != Stage::Forwarding)
            .unwrap_or(last + 1);
        let t_b = (t_e.min(last + 1)..=last)
            .find(|&i| analysis.summaries[i].stage == Stage::Backwarding)
            .unwrap_or(last + 1);
        let span_end = seg_end.unwrap_or(m);
        spans.push(PhaseStageSpans {
            anchor_config: a,
            end_step: seg_end,
            forwarding_rounds: ceil_rounds(trace, a, t_e.min(span_end)),
            expansion_rounds: if t_e > last {
                0
            } else {
                ceil_rounds(trace, t_e, t_b.min(span_end))
            },
            backwarding_rounds: if t_b > last {
                0
            } else {
                ceil_rounds(trace, t_b, span_end)
            },
        });
    }
    spans
}

/// Violation of one of the per-step lemmas of the legitimate regime.
#[derive(Clone, Debug, Serialize)]
pub struct StepLemmaViolation {
    pub step: usize,
    pub k: usize,
    pub l: usize,
    pub kind: &'static str,
}

/// Checks, on every observed step, the frame lemmas of the A4(k,l)
/// families: stability without a root move, the root move from A4(k,l)
/// being R2 into A4(k+1,l), the R1 precondition A5(l+1), and closure of
/// the legitimate set. Quadratic in the diameter; intended for desk-scale
/// graphs.
pub fn step_lemma_check(trace: &Trace, topo: &Topology) -> Vec<StepLemmaViolation> {
    let mut violations = Vec::new();
    let d = topo.diameter();
    let root = topo.root();
    trace.replay(|ix, before, activated, after| {
        let bf = Facts::compute(topo, before);
        if !a4_holds(&bf) {
            return;
        }
        let af = Facts::compute(topo, after);
        let root_rule = activated
            .iter()
            .find(|(u, _)| *u == root)
            .map(|(_, r)| r.name);
        for l in 1..=d + 1 {
            for k in 1..=l {
                if !a4kl_holds(&bf, before, topo, k, l) {
                    continue;
                }
                match root_rule {
                    None => {
                        if !(a4_holds(&af) && a4kl_holds(&af, after, topo, k, l)) {
                            violations.push(StepLemmaViolation {
                                step: ix,
                                k,
                                l,
                                kind: "a4kl-not-stable-without-root-move",
                            });
                        }
                    }
                    Some(rule) => {
                        if k < l {
                            let landed = a4_holds(&af) && a4kl_holds(&af, after, topo, k + 1, l);
                            if rule != RuleName::R2 || !landed {
                                violations.push(StepLemmaViolation {
                                    step: ix,
                                    k,
                                    l,
                                    kind: "root-move-from-a4kl",
                                });
                            }
                        } else if l <= d {
                            let landed = a4_holds(&af) && a4_last_holds(&af, after, topo, l);
                            if rule != RuleName::R2 || !landed {
                                violations.push(StepLemmaViolation {
                                    step: ix,
                                    k,
                                    l,
                                    kind: "root-move-from-a4ll",
                                });
                            }
                        }
                    }
                }
            }
        }
        for l in 0..=d + 1 {
            if !a4_last_holds(&bf, before, topo, l) {
                continue;
            }
            match root_rule {
                Some(RuleName::R1) => {
                    let level = (l + 1).min(d + 1);
                    if !a5_level_holds(&bf, topo, level) {
                        violations.push(StepLemmaViolation {
                            step: ix,
                            k: l + 1,
                            l,
                            kind: "r1-not-from-a5",
                        });
                    }
                }
                Some(_) | None => {
                    if !(a4_holds(&af) && a4_last_holds(&af, after, topo, l)) {
                        violations.push(StepLemmaViolation {
                            step: ix,
                            k: l + 1,
                            l,
                            kind: "a4-last-not-stable",
                        });
                    }
                }
            }
        }
        // Closure of the legitimate set itself.
        if al_holds(&bf, before, topo) && !(a4_holds(&af) && al_holds(&af, after, topo)) {
            violations.push(StepLemmaViolation {
                step: ix,
                k: 0,
                l: 0,
                kind: "al-not-closed",
            });
        }
    });
    violations
}

/// The rounds-to-attractor table and per-construction statistics of a
/// trace.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub rounds_to: RoundsTo,
    pub max_root_gap_rounds: Option<u64>,
    pub trailing_root_gap_rounds: u64,
    pub constructions: Vec<ConstructionStats>,
    pub stage_spans: Vec<PhaseStageSpans>,
}

pub fn bound_report(trace: &Trace, topo: &Topology) -> BoundReport {
    let analysis = analyze_trace(trace, topo);
    BoundReport {
        rounds_to: analysis.rounds_to,
        max_root_gap_rounds: analysis.root_gaps.max_realized(),
        trailing_root_gap_rounds: analysis.root_gaps.trailing_rounds,
        stage_spans: phase_stage_spans(trace, &analysis),
        constructions: analysis.constructions,
    }
}
