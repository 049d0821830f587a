//! Pure predicate evaluators over a (topology, configuration, process)
//! triple: the single source of truth consumed by rule guards, attractor
//! classification, and the model checker.
//!
//! Readings that the source formulas leave ambiguous are fixed here once:
//!
//! * `strong_conflict` demands two *distinct* Power witnesses in the closed
//!   neighborhood whose colors differ from *each other*; the single-witness
//!   variant is kept as [`strong_conflict_single_witness`] so the checker
//!   can report how often the readings diverge.
//! * `correct` orients the tree-parent test as dist(TS.u) < dist(u), i.e.
//!   the parent is strictly closer to the root.
//! * `in_legal_tree` and `power_parent` are least fixed points: parent
//!   chains that never reach the root (cycles included) evaluate to false.

use crate::model::{Color, Configuration, NodeId, Status, Topology};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredicateError {
    #[error("{0:?} is not a guard predicate")]
    NotAGuardPredicate(PredicateName),
    #[error("{0:?} is not an analysis predicate")]
    NotAnAnalysisPredicate(PredicateName),
    #[error("Connection requires a candidate-parent argument")]
    MissingTarget,
    #[error("{0:?} does not take a candidate-parent argument")]
    UnexpectedTarget(PredicateName),
}

/// Every named predicate. `Connection` additionally takes a candidate
/// parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredicateName {
    Child,
    StrongConflict,
    Conflict,
    Detached,
    StrongEReady,
    PowerFaulty,
    Faulty,
    IllegalRoot,
    IllegalLiveRoot,
    IllegalChild,
    Isolated,
    Ok,
    QuietSubTree,
    EndFirstPhase,
    EndPhase,
    EndLastPhase,
    EndIntermediatePhase,
    Connection,
    NewPhase,
    InLegalTree,
    UnRegular,
    InsideLegalTree,
    UnSafe,
    PowerParent,
    Influential,
    Pic,
    Pir,
    PicPowerParent,
    PirPowerParent,
    Correct,
}

impl PredicateName {
    pub const GUARD: [PredicateName; 18] = [
        PredicateName::StrongConflict,
        PredicateName::Conflict,
        PredicateName::Detached,
        PredicateName::StrongEReady,
        PredicateName::PowerFaulty,
        PredicateName::Faulty,
        PredicateName::IllegalRoot,
        PredicateName::IllegalLiveRoot,
        PredicateName::IllegalChild,
        PredicateName::Isolated,
        PredicateName::Ok,
        PredicateName::QuietSubTree,
        PredicateName::EndFirstPhase,
        PredicateName::EndPhase,
        PredicateName::EndLastPhase,
        PredicateName::EndIntermediatePhase,
        PredicateName::Connection,
        PredicateName::NewPhase,
    ];

    pub const ANALYSIS: [PredicateName; 11] = [
        PredicateName::InLegalTree,
        PredicateName::UnRegular,
        PredicateName::InsideLegalTree,
        PredicateName::UnSafe,
        PredicateName::PowerParent,
        PredicateName::Influential,
        PredicateName::Pic,
        PredicateName::Pir,
        PredicateName::PicPowerParent,
        PredicateName::PirPowerParent,
        PredicateName::Correct,
    ];
}

/// Child set of `u`: neighbors whose P pointer names `u`.
pub fn child_set(topo: &Topology, cfg: &Configuration, u: NodeId) -> Vec<NodeId> {
    topo.neighbors(u)
        .iter()
        .copied()
        .filter(|&v| cfg.state(v).parent == Some(u))
        .collect()
}

pub fn has_child(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    topo.neighbors(u)
        .iter()
        .any(|&v| cfg.state(v).parent == Some(u))
}

/// Two distinct closed neighbors hold Power with differing colors, and `u`
/// itself is not StrongE.
pub fn strong_conflict(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    if cfg.state(u).status == Status::StrongE {
        return false;
    }
    let mut seen: Option<Color> = None;
    for v in closed_neighborhood(topo, u) {
        if cfg.state(v).status == Status::Power {
            match seen {
                None => seen = Some(cfg.state(v).color),
                Some(c) if c != cfg.state(v).color => return true,
                Some(_) => {}
            }
        }
    }
    false
}

/// The weaker single-witness reading (one Power closed neighbor colored
/// unlike `u`); retained only so [`crate::analysis::model_check_basics`]
/// can count how often the two readings disagree.
pub fn strong_conflict_single_witness(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status != Status::StrongE
        && closed_neighborhood(topo, u).any(|v| {
            cfg.state(v).status == Status::Power && cfg.state(v).color != cfg.state(u).color
        })
}

fn closed_neighborhood<'t>(
    topo: &'t Topology,
    u: NodeId,
) -> impl Iterator<Item = NodeId> + 't {
    topo.neighbors(u).iter().copied().chain(std::iter::once(u))
}

pub fn conflict(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    let su = cfg.state(u);
    if u == topo.root() {
        su.status != Status::StrongE
            && topo.neighbors(u).iter().any(|&v| {
                cfg.state(v).status == Status::Power
                    && (cfg.state(v).color != su.color || !has_child(topo, cfg, u))
            })
    } else {
        su.parent.is_some()
            && topo.neighbors(u).iter().any(|&v| {
                cfg.state(v).status == Status::Power && cfg.state(v).color != su.color
            })
    }
}

/// No child, no parent (or `u` is the root), and not Power, so `u` cannot
/// gain a child.
pub fn detached(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    !has_child(topo, cfg, u)
        && (cfg.state(u).parent.is_none() || u == topo.root())
        && cfg.state(u).status != Status::Power
}

pub fn strong_e_ready(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status == Status::StrongE
        && topo
            .neighbors(u)
            .iter()
            .all(|&v| cfg.state(v).status != Status::Power)
}

pub fn power_faulty(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status == Status::Power
        && topo
            .neighbors(u)
            .iter()
            .any(|&v| cfg.state(v).status == Status::StrongE)
}

/// `u`'s state disagrees with its non-Erroneous parent: wrong color, wrong
/// status, or wrong phase. The childless requirement under a Power parent
/// reads the child test as emptiness of the child set.
pub fn faulty(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    if u == topo.root() {
        return false;
    }
    let su = cfg.state(u);
    let Some(p) = su.parent else {
        return false;
    };
    let sp = cfg.state(p);
    if sp.status.is_erroneous() {
        return false;
    }
    su.status.is_erroneous()
        || su.color != sp.color
        || (sp.status != Status::Working && su.status != Status::Idle)
        || (sp.status == su.status && su.phase != sp.phase)
        || (su.status == Status::Power && su.phase != sp.phase)
        || (sp.status == Status::Power && (has_child(topo, cfg, u) || su.phase != sp.phase))
}

pub fn illegal_root(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    u != topo.root() && cfg.state(u).parent.is_none() && !detached(topo, cfg, u)
}

pub fn illegal_live_root(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    illegal_root(topo, cfg, u) && !cfg.state(u).status.is_erroneous()
}

pub fn illegal_child(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    if u == topo.root() {
        return false;
    }
    match cfg.state(u).parent {
        Some(p) => cfg.state(p).status.is_erroneous(),
        None => false,
    }
}

pub fn isolated(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    matches!(cfg.state(u).status, Status::WeakE | Status::Working)
        || strong_e_ready(topo, cfg, u)
}

/// None of the recovery conditions holds at `u`.
pub fn ok(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    !strong_conflict(topo, cfg, u)
        && !conflict(topo, cfg, u)
        && !power_faulty(topo, cfg, u)
        && !faulty(topo, cfg, u)
        && !illegal_root(topo, cfg, u)
        && !illegal_child(topo, cfg, u)
}

/// All children of `u` are Idle with `u`'s phase value.
pub fn quiet_subtree(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    topo.neighbors(u)
        .iter()
        .filter(|&&v| cfg.state(v).parent == Some(u))
        .all(|&v| cfg.state(v).status == Status::Idle && cfg.state(v).phase == cfg.state(u).phase)
}

pub fn end_first_phase(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status == Status::Power
        && quiet_subtree(topo, cfg, u)
        && topo
            .neighbors(u)
            .iter()
            .all(|&v| cfg.state(v).color == cfg.state(u).color)
}

pub fn end_phase(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status == Status::Working && quiet_subtree(topo, cfg, u)
}

pub fn end_last_phase(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    !has_child(topo, cfg, u)
        && (end_first_phase(topo, cfg, u) || end_phase(topo, cfg, u))
}

pub fn end_intermediate_phase(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    has_child(topo, cfg, u) && (end_first_phase(topo, cfg, u) || end_phase(topo, cfg, u))
}

/// `u` may adopt `v` as parent: `u` is detached and Idle (or may become
/// Idle), `v` is a Power neighbor with the other color.
pub fn connection(topo: &Topology, cfg: &Configuration, u: NodeId, v: NodeId) -> bool {
    detached(topo, cfg, u)
        && (isolated(topo, cfg, u) || cfg.state(u).status == Status::Idle)
        && topo.port_of(u, v).is_some()
        && cfg.state(v).color != cfg.state(u).color
        && cfg.state(v).status == Status::Power
}

pub fn new_phase(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    let su = cfg.state(u);
    match su.parent {
        Some(p) => {
            quiet_subtree(topo, cfg, u)
                && su.status == Status::Idle
                && su.phase != cfg.state(p).phase
        }
        None => false,
    }
}

/// `u` sits on a non-Faulty branch rooted at `r` (with `S.r` not StrongE).
/// Least fixed point: chains that never reach the root yield false.
pub fn in_legal_tree(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    let root = topo.root();
    let mut visited = vec![false; topo.node_count()];
    let mut cur = u;
    loop {
        if cur == root {
            return cfg.state(root).status != Status::StrongE;
        }
        if visited[cur] || faulty(topo, cfg, cur) {
            return false;
        }
        visited[cur] = true;
        match cfg.state(cur).parent {
            Some(p) => cur = p,
            None => return false,
        }
    }
}

/// `u` has a descendant chain that can produce a Power status in the
/// current phase. Least fixed point over the two defining clauses.
pub fn power_parent(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    let mut visited = vec![false; topo.node_count()];
    let mut cur = u;
    loop {
        let sc = cfg.state(cur);
        if sc.status != Status::Idle {
            return false;
        }
        let Some(p) = sc.parent else {
            return false;
        };
        let sp = cfg.state(p);
        if sp.status == Status::Working && sc.phase != sp.phase {
            return true;
        }
        if sc.phase != sp.phase {
            return false;
        }
        if visited[cur] {
            return false;
        }
        visited[cur] = true;
        cur = p;
    }
}

pub fn influential(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    cfg.state(u).status == Status::Power || power_parent(topo, cfg, u)
}

pub fn un_regular(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    !detached(topo, cfg, u) && !in_legal_tree(topo, cfg, u)
}

pub fn inside_legal_tree(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    in_legal_tree(topo, cfg, u)
        && cfg.state(u).status != Status::Power
        && has_child(topo, cfg, u)
}

pub fn un_safe(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    inside_legal_tree(topo, cfg, u)
        && topo.neighbors(u).iter().any(|&v| {
            cfg.state(v).color != cfg.state(u).color && influential(topo, cfg, v)
        })
}

/// `u` is clean for the legitimate regime: not unRegular, in the legal tree
/// or Idle, and (unless it is the root) its tree parent is strictly closer
/// to the root.
pub fn correct(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    let clean = !un_regular(topo, cfg, u)
        && (in_legal_tree(topo, cfg, u) || cfg.state(u).status == Status::Idle);
    if !clean {
        return false;
    }
    if u == topo.root() {
        return true;
    }
    match cfg.state(u).tree_parent {
        Some(ts) => topo.dist(ts) < topo.dist(u),
        None => false,
    }
}

pub fn pic(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    influential(topo, cfg, u) && cfg.state(u).color != cfg.state(topo.root()).color
}

pub fn pir(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    influential(topo, cfg, u) && un_regular(topo, cfg, u)
}

pub fn pic_power_parent(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    pic(topo, cfg, u) && power_parent(topo, cfg, u)
}

pub fn pir_power_parent(topo: &Topology, cfg: &Configuration, u: NodeId) -> bool {
    pir(topo, cfg, u) && power_parent(topo, cfg, u)
}

/// Dispatch for the guard-level predicates. `v` must be supplied exactly
/// when `which` is `Connection`.
pub fn eval_guard_predicate(
    cfg: &Configuration,
    topo: &Topology,
    u: NodeId,
    which: PredicateName,
    v: Option<NodeId>,
) -> Result<bool, PredicateError> {
    use PredicateName::*;
    if which == Connection {
        let v = v.ok_or(PredicateError::MissingTarget)?;
        return Result::Ok(connection(topo, cfg, u, v));
    }
    if v.is_some() {
        return Err(PredicateError::UnexpectedTarget(which));
    }
    let value = match which {
        StrongConflict => strong_conflict(topo, cfg, u),
        Conflict => conflict(topo, cfg, u),
        Detached => detached(topo, cfg, u),
        StrongEReady => strong_e_ready(topo, cfg, u),
        PowerFaulty => power_faulty(topo, cfg, u),
        Faulty => faulty(topo, cfg, u),
        IllegalRoot => illegal_root(topo, cfg, u),
        IllegalLiveRoot => illegal_live_root(topo, cfg, u),
        IllegalChild => illegal_child(topo, cfg, u),
        Isolated => isolated(topo, cfg, u),
        Ok => ok(topo, cfg, u),
        QuietSubTree => quiet_subtree(topo, cfg, u),
        EndFirstPhase => end_first_phase(topo, cfg, u),
        EndPhase => end_phase(topo, cfg, u),
        EndLastPhase => end_last_phase(topo, cfg, u),
        EndIntermediatePhase => end_intermediate_phase(topo, cfg, u),
        _ => return Err(PredicateError::NotAGuardPredicate(which)),
    };
    Result::Ok(value)
}

/// Dispatch for the analysis-level predicates.
pub fn eval_analysis_predicate(
    cfg: &Configuration,
    topo: &Topology,
    u: NodeId,
    which: PredicateName,
) -> Result<bool, PredicateError> {
    use PredicateName::*;
    let value = match which {
        InLegalTree => in_legal_tree(topo, cfg, u),
        UnRegular => un_regular(topo, cfg, u),
        InsideLegalTree => inside_legal_tree(topo, cfg, u),
        UnSafe => un_safe(topo, cfg, u),
        PowerParent => power_parent(topo, cfg, u),
        Influential => influential(topo, cfg, u),
        Pic => pic(topo, cfg, u),
        Pir => pir(topo, cfg, u),
        PicPowerParent => pic_power_parent(topo, cfg, u),
        PirPowerParent => pir_power_parent(topo, cfg, u),
        Correct => correct(topo, cfg, u),
        _ => return Err(PredicateError::NotAnAnalysisPredicate(which)),
    };
    Result::Ok(value)
}

/// Potential counters over the whole configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialCounter {
    Pic,
    Pir,
    PicPowerParent,
    PirPowerParent,
    RColorCount,
}

pub fn count_potential(
    cfg: &Configuration,
    topo: &Topology,
    which: PotentialCounter,
) -> usize {
    let facts = Facts::compute(topo, cfg);
    facts.count(which)
}

/// Batch per-node predicate evaluation, shared by the attractor and closure
/// machinery so each configuration is scanned once.
#[derive(Clone, Debug)]
pub struct Facts {
    pub child_count: Vec<u32>,
    pub faulty: Vec<bool>,
    pub illegal_live_root: Vec<bool>,
    pub detached: Vec<bool>,
    pub in_legal_tree: Vec<bool>,
    pub power_parent: Vec<bool>,
    pub influential: Vec<bool>,
    pub un_regular: Vec<bool>,
    pub inside_legal_tree: Vec<bool>,
    pub un_safe: Vec<bool>,
    pub correct: Vec<bool>,
    pub colors: Vec<Color>,
    pub statuses: Vec<Status>,
    pub root_color: Color,
}

impl Facts {
    pub fn compute(topo: &Topology, cfg: &Configuration) -> Facts {
        let n = topo.node_count();
        let root = topo.root();
        let mut child_count = vec![0u32; n];
        for u in topo.nodes() {
            if let Some(p) = cfg.state(u).parent {
                child_count[p] += 1;
            }
        }
        let faulty: Vec<bool> = topo.nodes().map(|u| faulty(topo, cfg, u)).collect();
        let detached: Vec<bool> = topo
            .nodes()
            .map(|u| {
                child_count[u] == 0
                    && (cfg.state(u).parent.is_none() || u == root)
                    && cfg.state(u).status != Status::Power
            })
            .collect();
        let illegal_live_root: Vec<bool> = topo
            .nodes()
            .map(|u| {
                u != root
                    && cfg.state(u).parent.is_none()
                    && !detached[u]
                    && !cfg.state(u).status.is_erroneous()
            })
            .collect();

        // Least fixed point for the legal-tree membership.
        let mut in_legal_tree = vec![false; n];
        in_legal_tree[root] = cfg.state(root).status != Status::StrongE;
        loop {
            let mut changed = false;
            for u in topo.nodes() {
                if in_legal_tree[u] || u == root {
                    continue;
                }
                if let Some(p) = cfg.state(u).parent {
                    if in_legal_tree[p] && !faulty[u] {
                        in_legal_tree[u] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Least fixed point for PowerParent.
        let mut power_parent = vec![false; n];
        for u in topo.nodes() {
            let su = cfg.state(u);
            if let Some(p) = su.parent {
                if su.status == Status::Idle
                    && cfg.state(p).status == Status::Working
                    && su.phase != cfg.state(p).phase
                {
                    power_parent[u] = true;
                }
            }
        }
        loop {
            let mut changed = false;
            for u in topo.nodes() {
                if power_parent[u] {
                    continue;
                }
                let su = cfg.state(u);
                if let Some(p) = su.parent {
                    if power_parent[p]
                        && su.status == Status::Idle
                        && su.phase == cfg.state(p).phase
                    {
                        power_parent[u] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let influential: Vec<bool> = topo
            .nodes()
            .map(|u| cfg.state(u).status == Status::Power || power_parent[u])
            .collect();
        let un_regular: Vec<bool> = topo
            .nodes()
            .map(|u| !detached[u] && !in_legal_tree[u])
            .collect();
        let inside_legal_tree: Vec<bool> = topo
            .nodes()
            .map(|u| {
                in_legal_tree[u] && cfg.state(u).status != Status::Power && child_count[u] > 0
            })
            .collect();
        let un_safe: Vec<bool> = topo
            .nodes()
            .map(|u| {
                inside_legal_tree[u]
                    && topo
                        .neighbors(u)
                        .iter()
                        .any(|&v| cfg.state(v).color != cfg.state(u).color && influential[v])
            })
            .collect();
        let correct: Vec<bool> = topo
            .nodes()
            .map(|u| {
                let clean = !un_regular[u]
                    && (in_legal_tree[u] || cfg.state(u).status == Status::Idle);
                if !clean {
                    return false;
                }
                if u == root {
                    return true;
                }
                match cfg.state(u).tree_parent {
                    Some(ts) => topo.dist(ts) < topo.dist(u),
                    None => false,
                }
            })
            .collect();
        Facts {
            child_count,
            faulty,
            illegal_live_root,
            detached,
            in_legal_tree,
            power_parent,
            influential,
            un_regular,
            inside_legal_tree,
            un_safe,
            correct,
            colors: topo.nodes().map(|u| cfg.state(u).color).collect(),
            statuses: topo.nodes().map(|u| cfg.state(u).status).collect(),
            root_color: cfg.state(root).color,
        }
    }

    pub fn pic(&self, u: NodeId) -> bool {
        self.influential[u] && self.colors[u] != self.root_color
    }

    pub fn pir(&self, u: NodeId) -> bool {
        self.influential[u] && self.un_regular[u]
    }

    pub fn count(&self, which: PotentialCounter) -> usize {
        let n = self.colors.len();
        match which {
            PotentialCounter::Pic => (0..n).filter(|&u| self.pic(u)).count(),
            PotentialCounter::Pir => (0..n).filter(|&u| self.pir(u)).count(),
            PotentialCounter::PicPowerParent => {
                (0..n).filter(|&u| self.pic(u) && self.power_parent[u]).count()
            }
            PotentialCounter::PirPowerParent => {
                (0..n).filter(|&u| self.pir(u) && self.power_parent[u]).count()
            }
            PotentialCounter::RColorCount => {
                (0..n).filter(|&u| self.colors[u] == self.root_color).count()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_topology, Phase, ProcessState};

    fn idle(color: Color) -> ProcessState {
        ProcessState::new(None, None, color, Status::Idle, Phase::A)
    }

    fn root_state(color: Color, status: Status) -> ProcessState {
        ProcessState::new(None, None, color, status, Phase::A)
    }

    fn path3() -> Topology {
        build_topology(&[(0, 1), (1, 2)], 0).unwrap()
    }

    fn triangle() -> Topology {
        build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap()
    }

    #[test]
    fn child_sets_follow_parent_pointers() {
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(Some(0), Some(0), Color::C0, Status::Idle, Phase::A),
            ProcessState::new(Some(1), Some(1), Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(child_set(&t, &cfg, 0), vec![1]);
        assert_eq!(child_set(&t, &cfg, 1), vec![2]);
        assert_eq!(child_set(&t, &cfg, 2), Vec::<NodeId>::new());

        let empty = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            idle(Color::C0),
            idle(Color::C0),
        ]);
        for u in t.nodes() {
            assert!(child_set(&t, &empty, u).is_empty());
        }
    }

    #[test]
    fn child_sets_in_a_two_cycle() {
        let t = triangle();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(Some(2), None, Color::C0, Status::Idle, Phase::A),
            ProcessState::new(Some(1), None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert_eq!(child_set(&t, &cfg, 1), vec![2]);
        assert_eq!(child_set(&t, &cfg, 2), vec![1]);
        assert!(child_set(&t, &cfg, 0).is_empty());
    }

    #[test]
    fn conflict_root_branch_fires_on_childless_root() {
        // Power neighbor with a different color and a childless root.
        let t = build_topology(&[(0, 1)], 0).unwrap();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(None, None, Color::C1, Status::Power, Phase::A),
        ]);
        assert!(conflict(&t, &cfg, 0));
        // Same-colored Power neighbor still conflicts while the root is childless.
        let cfg2 = Configuration::new(vec![
            root_state(Color::C1, Status::Working),
            ProcessState::new(None, None, Color::C1, Status::Power, Phase::A),
        ]);
        assert!(conflict(&t, &cfg2, 0));
    }

    #[test]
    fn faulty_under_power_parent_with_phase_lag() {
        // a holds Power in phase A; b hangs off a with phase B.
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(Some(0), Some(0), Color::C0, Status::Power, Phase::A),
            ProcessState::new(Some(1), Some(1), Color::C0, Status::Idle, Phase::B),
        ]);
        assert!(faulty(&t, &cfg, 2));
        assert!(!faulty(&t, &cfg, 0));
    }

    #[test]
    fn strong_conflict_requires_two_distinct_witnesses() {
        let t = triangle();
        // Node 0 sees two Power neighbors with differing colors.
        let two = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(None, None, Color::C1, Status::Power, Phase::A),
            ProcessState::new(None, None, Color::C0, Status::Power, Phase::A),
        ]);
        assert!(strong_conflict(&t, &two, 0));
        // Only one Power witness: the implemented reading is false, the
        // single-witness reading is true.
        let one = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(None, None, Color::C1, Status::Power, Phase::A),
            idle(Color::C0),
        ]);
        assert!(!strong_conflict(&t, &one, 0));
        assert!(strong_conflict_single_witness(&t, &one, 0));
    }

    #[test]
    fn in_legal_tree_base_cases() {
        let t = path3();
        let mut cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            idle(Color::C0),
            idle(Color::C0),
        ]);
        assert!(in_legal_tree(&t, &cfg, 0));
        cfg.state_mut(0).status = Status::StrongE;
        assert!(!in_legal_tree(&t, &cfg, 0));
    }

    #[test]
    fn parent_cycles_never_reach_the_root() {
        let t = triangle();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(Some(2), None, Color::C0, Status::Idle, Phase::A),
            ProcessState::new(Some(1), None, Color::C0, Status::Idle, Phase::A),
        ]);
        assert!(!in_legal_tree(&t, &cfg, 1));
        assert!(!in_legal_tree(&t, &cfg, 2));
        assert!(un_regular(&t, &cfg, 1));
    }

    #[test]
    fn power_parent_walks_the_phase_matched_chain() {
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working), // ph A
            ProcessState::new(Some(0), Some(0), Color::C0, Status::Idle, Phase::B),
            ProcessState::new(Some(1), Some(1), Color::C0, Status::Idle, Phase::B),
        ]);
        assert!(power_parent(&t, &cfg, 1)); // first clause
        assert!(power_parent(&t, &cfg, 2)); // second clause
        assert!(influential(&t, &cfg, 2));
        assert!(!power_parent(&t, &cfg, 0));
    }

    #[test]
    fn potentials_on_a_power_chain() {
        // a holds Power with the anti-root color while unRegular.
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            ProcessState::new(Some(2), None, Color::C1, Status::Power, Phase::A),
            ProcessState::new(None, None, Color::C1, Status::Idle, Phase::A),
        ]);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::Pic), 1);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::Pir), 1);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::PicPowerParent), 0);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::RColorCount), 1);
    }

    #[test]
    fn no_influential_means_zero_potentials() {
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            idle(Color::C1),
            idle(Color::C1),
        ]);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::Pic), 0);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::Pir), 0);
    }

    #[test]
    fn all_root_colored_counts_n() {
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C1, Status::Working),
            idle(Color::C1),
            idle(Color::C1),
        ]);
        assert_eq!(count_potential(&cfg, &t, PotentialCounter::RColorCount), 3);
    }

    #[test]
    fn dispatch_validates_target_argument() {
        let t = path3();
        let cfg = Configuration::new(vec![
            root_state(Color::C0, Status::Working),
            idle(Color::C1),
            idle(Color::C1),
        ]);
        assert_eq!(
            eval_guard_predicate(&cfg, &t, 1, PredicateName::Connection, None),
            Err(PredicateError::MissingTarget)
        );
        assert_eq!(
            eval_guard_predicate(&cfg, &t, 1, PredicateName::Faulty, Some(0)),
            Err(PredicateError::UnexpectedTarget(PredicateName::Faulty))
        );
        assert_eq!(
            eval_guard_predicate(&cfg, &t, 1, PredicateName::InLegalTree, None),
            Err(PredicateError::NotAGuardPredicate(PredicateName::InLegalTree))
        );
        assert_eq!(
            eval_analysis_predicate(&cfg, &t, 1, PredicateName::Conflict),
            Err(PredicateError::NotAnAnalysisPredicate(PredicateName::Conflict))
        );
    }

    /// The batch evaluator, the iterative walkers, and a naive bounded
    /// recursion must agree everywhere on a full enumeration.
    #[test]
    fn walkers_agree_with_naive_recursion_and_batch() {
        fn naive_ilt(t: &Topology, c: &Configuration, u: NodeId, depth: usize) -> bool {
            if depth > t.node_count() {
                return false;
            }
            if u == t.root() {
                return c.state(u).status != Status::StrongE;
            }
            match c.state(u).parent {
                Some(p) => naive_ilt(t, c, p, depth + 1) && !faulty(t, c, u),
                None => false,
            }
        }
        fn naive_pp(t: &Topology, c: &Configuration, u: NodeId, depth: usize) -> bool {
            if depth > t.node_count() {
                return false;
            }
            let su = c.state(u);
            let Some(p) = su.parent else { return false };
            let sp = c.state(p);
            (su.status == Status::Idle && sp.status == Status::Working && su.phase != sp.phase)
                || (su.status == Status::Idle
                    && su.phase == sp.phase
                    && naive_pp(t, c, p, depth + 1))
        }
        let t = crate::model::build_topology(&[(0, 1)], 0).unwrap();
        for cfg in crate::model::enumerate_configurations(&t, 1 << 20).unwrap() {
            let facts = Facts::compute(&t, &cfg);
            for u in t.nodes() {
                assert_eq!(in_legal_tree(&t, &cfg, u), naive_ilt(&t, &cfg, u, 0));
                assert_eq!(power_parent(&t, &cfg, u), naive_pp(&t, &cfg, u, 0));
                assert_eq!(facts.in_legal_tree[u], in_legal_tree(&t, &cfg, u));
                assert_eq!(facts.power_parent[u], power_parent(&t, &cfg, u));
                assert_eq!(facts.un_safe[u], un_safe(&t, &cfg, u));
                assert_eq!(facts.correct[u], correct(&t, &cfg, u));
                assert_eq!(
                    influential(&t, &cfg, u),
                    cfg.state(u).status == Status::Power || power_parent(&t, &cfg, u)
                );
            }
        }
    }

    /// Root-only predicates stay false for the root, and the implication
    /// StrongConflict(r) => Conflict(r) holds, over the whole P2 space.
    #[test]
    fn root_predicate_invariants_exhaustive_p2() {
        let t = crate::model::build_topology(&[(0, 1)], 0).unwrap();
        for cfg in crate::model::enumerate_configurations(&t, 1 << 20).unwrap() {
            let r = t.root();
            assert!(!faulty(&t, &cfg, r));
            assert!(!illegal_root(&t, &cfg, r));
            assert!(!illegal_child(&t, &cfg, r));
            if strong_conflict(&t, &cfg, r) {
                assert!(conflict(&t, &cfg, r));
            }
            for u in t.nodes() {
                assert_eq!(
                    un_regular(&t, &cfg, u),
                    !detached(&t, &cfg, u) && !in_legal_tree(&t, &cfg, u)
                );
                assert!(
                    in_legal_tree(&t, &cfg, u)
                        || detached(&t, &cfg, u)
                        || un_regular(&t, &cfg, u)
                );
            }
        }
    }
}
