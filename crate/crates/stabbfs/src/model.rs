//! Rooted-network topology, per-process state, configurations, state-space
//! enumeration, and the bit-packed encoding of the shared variables.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

/// Hard cap on network size; daemon and analysis bookkeeping use 128-bit
/// activation masks.
pub const MAX_NODES: usize = 128;

/// Default cap on exhaustive state-space enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("root {0} is not a node of the graph")]
    RootNotANode(NodeId),
    #[error("node identifiers are not contiguous: {missing} is absent but {max} is present")]
    NonContiguousNodes { missing: NodeId, max: NodeId },
    #[error("graph is disconnected: node {0} is unreachable from the root")]
    Disconnected(NodeId),
    #[error("graph has {0} nodes, more than the supported maximum {MAX_NODES}")]
    TooManyNodes(usize),
    #[error("state space has {size} configurations, above the cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error("node {node}: {pointer} pointer {value} is not a neighbor")]
    NotANeighbor {
        node: NodeId,
        pointer: &'static str,
        value: NodeId,
    },
    #[error("{pointer} pointer {value} is absent from the neighbor list")]
    PointerNotInNeighborList { pointer: &'static str, value: NodeId },
    #[error("root carries a {0} pointer")]
    RootWithParent(&'static str),
    #[error("root status {0:?} is outside {{Power, Working, StrongE}}")]
    BadRootStatus(Status),
    #[error("packed value {value:#x} does not fit in {width} bits")]
    PackedOverflow { value: u64, width: u8 },
    #[error("port {port} out of range for degree {degree}")]
    PortOutOfRange { port: u64, degree: usize },
    #[error("invalid status code {0} in packed state")]
    BadStatusBits(u64),
    #[error("packed width {got} does not match expected {expected} for degree {degree}")]
    WidthMismatch { got: u8, expected: u8, degree: usize },
}

/// Two-valued tree color; the tree under construction carries the root color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    C0,
    C1,
}

impl Color {
    pub fn flip(self) -> Self {
        match self {
            Color::C0 => Color::C1,
            Color::C1 => Color::C0,
        }
    }

    pub fn as_bit(self) -> u8 {
        match self {
            Color::C0 => 0,
            Color::C1 => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Color::C0),
            1 => Some(Color::C1),
            _ => None,
        }
    }
}

/// Process status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Idle,
    Working,
    Power,
    WeakE,
    StrongE,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Idle,
        Status::Working,
        Status::Power,
        Status::WeakE,
        Status::StrongE,
    ];

    /// Root status domain: the root never holds Idle or WeakE.
    pub const ROOT: [Status; 3] = [Status::Working, Status::Power, Status::StrongE];

    /// WeakE and StrongE form the Erroneous set.
    pub fn is_erroneous(self) -> bool {
        matches!(self, Status::WeakE | Status::StrongE)
    }

    pub fn code(self) -> u64 {
        match self {
            Status::Idle => 0,
            Status::Working => 1,
            Status::Power => 2,
            Status::WeakE => 3,
            Status::StrongE => 4,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Status::Idle),
            1 => Some(Status::Working),
            2 => Some(Status::Power),
            3 => Some(Status::WeakE),
            4 => Some(Status::StrongE),
            _ => None,
        }
    }
}

/// Two-valued phase variable used to synchronize construction waves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
}

impl Phase {
    pub fn flip(self) -> Self {
        match self {
            Phase::A => Phase::B,
            Phase::B => Phase::A,
        }
    }

    pub fn as_bit(self) -> u8 {
        match self {
            Phase::A => 0,
            Phase::B => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Phase::A),
            1 => Some(Phase::B),
            _ => None,
        }
    }
}

/// One process's five shared variables (P, TS, C, S, ph).
///
/// Parent pointers hold neighbor identifiers; the packed encoding converts
/// them to port indices. The root keeps `parent` and `tree_parent` at `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProcessState {
    pub parent: Option<NodeId>,
    pub tree_parent: Option<NodeId>,
    pub color: Color,
    pub status: Status,
    pub phase: Phase,
}

impl ProcessState {
    pub fn new(
        parent: Option<NodeId>,
        tree_parent: Option<NodeId>,
        color: Color,
        status: Status,
        phase: Phase,
    ) -> Self {
        Self {
            parent,
            tree_parent,
            color,
            status,
            phase,
        }
    }
}

/// Rooted connected undirected graph with precomputed hop distances.
///
/// `diameter` stores the graph diameter D used by every bound in the round
/// analysis; `root_eccentricity` (max hop distance from the root) is kept
/// alongside because the two differ on graphs like stars rooted at the
/// center.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    root: NodeId,
    adjacency: Vec<Vec<NodeId>>,
    distances: Vec<usize>,
    diameter: usize,
    root_eccentricity: usize,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Neighbors of `u`, sorted ascending.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u].len()
    }

    /// Hop distance of `u` to the root.
    pub fn dist(&self, u: NodeId) -> usize {
        self.distances[u]
    }

    /// Graph diameter D.
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// Maximum hop distance from the root; equals the diameter on paths
    /// rooted at an endpoint but not in general.
    pub fn root_eccentricity(&self) -> usize {
        self.root_eccentricity
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for u in self.nodes() {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Port index of neighbor `v` in `u`'s sorted adjacency list.
    pub fn port_of(&self, u: NodeId, v: NodeId) -> Option<usize> {
        self.adjacency[u].binary_search(&v).ok()
    }
}

fn bfs_distances(adjacency: &[Vec<NodeId>], from: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    let mut queue = std::collections::VecDeque::new();
    dist[from] = Some(0);
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Builds a validated topology from an undirected edge list.
///
/// Rejects self-loops, duplicate edges, non-contiguous node identifiers,
/// a root outside the node set, and disconnected graphs, each with its own
/// diagnostic. Distances come from a breadth-first traversal from the root
/// and the diameter from an all-pairs sweep.
pub fn build_topology(edges: &[(NodeId, NodeId)], root: NodeId) -> Result<Topology, ModelError> {
    if edges.is_empty() {
        return Err(ModelError::EmptyEdgeList);
    }
    let max_node = edges.iter().map(|&(a, b)| a.max(b)).max().unwrap();
    let node_count = max_node + 1;
    if node_count > MAX_NODES {
        return Err(ModelError::TooManyNodes(node_count));
    }
    if root >= node_count {
        return Err(ModelError::RootNotANode(root));
    }
    let mut adjacency = vec![Vec::new(); node_count];
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in edges {
        if a == b {
            return Err(ModelError::SelfLoop(a));
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(ModelError::DuplicateEdge(key.0, key.1));
        }
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for (u, nbrs) in adjacency.iter_mut().enumerate() {
        if nbrs.is_empty() {
            return Err(ModelError::NonContiguousNodes {
                missing: u,
                max: max_node,
            });
        }
        nbrs.sort_unstable();
    }
    let from_root = bfs_distances(&adjacency, root);
    if let Some(unreached) = from_root.iter().position(|d| d.is_none()) {
        return Err(ModelError::Disconnected(unreached));
    }
    let distances: Vec<usize> = from_root.into_iter().map(|d| d.unwrap()).collect();
    let root_eccentricity = distances.iter().copied().max().unwrap_or(0);
    let mut diameter = 0;
    for u in 0..node_count {
        let d = bfs_distances(&adjacency, u);
        let ecc = d.into_iter().map(|x| x.unwrap()).max().unwrap_or(0);
        diameter = diameter.max(ecc);
    }
    Ok(Topology {
        node_count,
        root,
        adjacency,
        distances,
        diameter,
        root_eccentricity,
    })
}

/// Global configuration: one state per node, indexed by node identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    states: Vec<ProcessState>,
}

impl Configuration {
    pub fn new(states: Vec<ProcessState>) -> Self {
        Self { states }
    }

    pub fn state(&self, u: NodeId) -> &ProcessState {
        &self.states[u]
    }

    pub fn state_mut(&mut self, u: NodeId) -> &mut ProcessState {
        &mut self.states[u]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ProcessState] {
        &self.states
    }

    /// Checks per-node invariants against the topology: pointer targets are
    /// neighbors, the root carries no pointers and a root-legal status.
    pub fn validate(&self, topo: &Topology) -> Result<(), ModelError> {
        assert_eq!(self.states.len(), topo.node_count());
        for u in topo.nodes() {
            let st = self.state(u);
            if u == topo.root() {
                if st.parent.is_some() {
                    return Err(ModelError::RootWithParent("P"));
                }
                if st.tree_parent.is_some() {
                    return Err(ModelError::RootWithParent("TS"));
                }
                if !Status::ROOT.contains(&st.status) {
                    return Err(ModelError::BadRootStatus(st.status));
                }
            } else {
                for (name, ptr) in [("P", st.parent), ("TS", st.tree_parent)] {
                    if let Some(v) = ptr {
                        if topo.port_of(u, v).is_none() {
                            return Err(ModelError::NotANeighbor {
                                node: u,
                                pointer: name,
                                value: v,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Number of local states of node `u`: (δ+1)² · 2 · 5 · 2 for a non-root,
/// 2 · 3 · 2 for the root.
pub fn local_state_count(topo: &Topology, u: NodeId) -> u128 {
    if u == topo.root() {
        2 * 3 * 2
    } else {
        let d = topo.degree(u) as u128 + 1;
        d * d * 2 * 5 * 2
    }
}

/// Closed-form size of the full state space A0.
pub fn state_space_size(topo: &Topology) -> u128 {
    topo.nodes().map(|u| local_state_count(topo, u)).product()
}

/// Deterministic exhaustive enumeration of every configuration.
///
/// Works as a mixed-radix odometer over per-node local states, last node
/// fastest. Refuses up front when the closed-form size exceeds `cap`.
pub struct ConfigurationEnumerator<'t> {
    topo: &'t Topology,
    counters: Vec<u128>,
    radices: Vec<u128>,
    done: bool,
}

pub fn enumerate_configurations(
    topo: &Topology,
    cap: u128,
) -> Result<ConfigurationEnumerator<'_>, ModelError> {
    let size = state_space_size(topo);
    if size > cap {
        return Err(ModelError::StateSpaceTooLarge { size, cap });
    }
    let radices: Vec<u128> = topo.nodes().map(|u| local_state_count(topo, u)).collect();
    Ok(ConfigurationEnumerator {
        topo,
        counters: vec![0; radices.len()],
        radices,
        done: false,
    })
}

fn decode_local_state(topo: &Topology, u: NodeId, index: u128) -> ProcessState {
    let mut ix = index;
    if u == topo.root() {
        // Root odometer digits: ph fastest, then status, then color.
        let ph = Phase::from_bit((ix % 2) as u8).unwrap();
        ix /= 2;
        let status = Status::ROOT[(ix % 3) as usize];
        ix /= 3;
        let color = Color::from_bit((ix % 2) as u8).unwrap();
        ProcessState::new(None, None, color, status, ph)
    } else {
        let d = topo.degree(u) as u128 + 1;
        let ph = Phase::from_bit((ix % 2) as u8).unwrap();
        ix /= 2;
        let status = Status::ALL[(ix % 5) as usize];
        ix /= 5;
        let color = Color::from_bit((ix % 2) as u8).unwrap();
        ix /= 2;
        let ts = (ix % d) as usize;
        ix /= d;
        let p = (ix % d) as usize;
        let decode_ptr = |slot: usize| {
            if slot == 0 {
                None
            } else {
                Some(topo.neighbors(u)[slot - 1])
            }
        };
        ProcessState::new(decode_ptr(p), decode_ptr(ts), color, status, ph)
    }
}

impl Iterator for ConfigurationEnumerator<'_> {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        if self.done {
            return None;
        }
        let states = self
            .topo
            .nodes()
            .map(|u| decode_local_state(self.topo, u, self.counters[u]))
            .collect();
        // Advance the odometer, last node fastest.
        let mut i = self.counters.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.counters[i] += 1;
            if self.counters[i] < self.radices[i] {
                break;
            }
            self.counters[i] = 0;
        }
        Some(Configuration::new(states))
    }
}

/// Uniform random configuration; every variable is drawn independently from
/// its domain, the root status from {Power, Working, StrongE}. Identical
/// seeds yield identical configurations.
pub fn random_configuration(topo: &Topology, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_configuration_with(topo, &mut rng)
}

pub fn random_configuration_with<R: Rng>(topo: &Topology, rng: &mut R) -> Configuration {
    let states = topo
        .nodes()
        .map(|u| {
            if u == topo.root() {
                ProcessState::new(
                    None,
                    None,
                    Color::from_bit(rng.gen_range(0..2)).unwrap(),
                    Status::ROOT[rng.gen_range(0..3)],
                    Phase::from_bit(rng.gen_range(0..2)).unwrap(),
                )
            } else {
                let d = topo.degree(u);
                let mut ptr = || {
                    let slot = rng.gen_range(0..=d);
                    if slot == 0 {
                        None
                    } else {
                        Some(topo.neighbors(u)[slot - 1])
                    }
                };
                let parent = ptr();
                let tree_parent = ptr();
                ProcessState::new(
                    parent,
                    tree_parent,
                    Color::from_bit(rng.gen_range(0..2)).unwrap(),
                    Status::ALL[rng.gen_range(0..5)],
                    Phase::from_bit(rng.gen_range(0..2)).unwrap(),
                )
            }
        })
        .collect();
    Configuration::new(states)
}

/// Fixed-width bit image of one process state.
///
/// Layout, most significant first: P port, TS port (⌈log2(δ+1)⌉ bits each,
/// ⊥ encoded as port = δ), color (1 bit), status (3 bits), phase (1 bit).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PackedState {
    pub bits: u64,
    pub width: u8,
}

/// Bits needed for one parent pointer of a degree-δ node: ⌈log2(δ+1)⌉.
pub fn pointer_bits(degree: usize) -> u8 {
    debug_assert!(degree >= 1);
    (usize::BITS - degree.leading_zeros()) as u8
}

/// Total packed width 2·⌈log2(δ+1)⌉ + 5 of a degree-δ node.
pub fn packed_width(degree: usize) -> u8 {
    2 * pointer_bits(degree) + 5
}

/// Packs a process state against its sorted neighbor list.
pub fn pack(state: &ProcessState, neighbors: &[NodeId]) -> Result<PackedState, ModelError> {
    let degree = neighbors.len();
    let pbits = pointer_bits(degree);
    let port = |ptr: Option<NodeId>, name: &'static str| -> Result<u64, ModelError> {
        match ptr {
            None => Ok(degree as u64),
            Some(v) => neighbors
                .binary_search(&v)
                .map(|ix| ix as u64)
                .map_err(|_| ModelError::PointerNotInNeighborList {
                    pointer: name,
                    value: v,
                }),
        }
    };
    let p = port(state.parent, "P")?;
    let ts = port(state.tree_parent, "TS")?;
    let mut bits = p;
    bits = (bits << pbits) | ts;
    bits = (bits << 1) | u64::from(state.color.as_bit());
    bits = (bits << 3) | state.status.code();
    bits = (bits << 1) | u64::from(state.phase.as_bit());
    Ok(PackedState {
        bits,
        width: packed_width(degree),
    })
}

/// Decodes a packed state against its sorted neighbor list.
///
/// Rejects widths that disagree with the degree, stray high bits, port
/// values above δ, and status codes outside the five-value domain, so it is
/// safe on untrusted input.
pub fn unpack(packed: &PackedState, neighbors: &[NodeId]) -> Result<ProcessState, ModelError> {
    let degree = neighbors.len();
    let expected = packed_width(degree);
    if packed.width != expected {
        return Err(ModelError::WidthMismatch {
            got: packed.width,
            expected,
            degree,
        });
    }
    if expected < 64 && packed.bits >> expected != 0 {
        return Err(ModelError::PackedOverflow {
            value: packed.bits,
            width: expected,
        });
    }
    let pbits = pointer_bits(degree);
    let mut bits = packed.bits;
    let ph = Phase::from_bit((bits & 1) as u8).unwrap();
    bits >>= 1;
    let status = Status::from_code(bits & 0b111).ok_or(ModelError::BadStatusBits(bits & 0b111))?;
    bits >>= 3;
    let color = Color::from_bit((bits & 1) as u8).unwrap();
    bits >>= 1;
    let mask = (1u64 << pbits) - 1;
    let ts = bits & mask;
    bits >>= pbits;
    let p = bits & mask;
    let decode_port = |port: u64| -> Result<Option<NodeId>, ModelError> {
        if port == degree as u64 {
            Ok(None)
        } else if port < degree as u64 {
            Ok(Some(neighbors[port as usize]))
        } else {
            Err(ModelError::PortOutOfRange { port, degree })
        }
    };
    Ok(ProcessState::new(
        decode_port(p)?,
        decode_port(ts)?,
        color,
        status,
        ph,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Topology {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        build_topology(&edges, 0).unwrap()
    }

    #[test]
    fn path_distances() {
        // r–a–b rooted at r.
        let t = path(3);
        assert_eq!(t.dist(0), 0);
        assert_eq!(t.dist(1), 1);
        assert_eq!(t.dist(2), 2);
        assert_eq!(t.diameter(), 2);
    }

    #[test]
    fn triangle_distances() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        assert_eq!(t.dist(1), 1);
        assert_eq!(t.dist(2), 1);
        assert_eq!(t.diameter(), 1);
    }

    #[test]
    fn star_diameter_exceeds_root_eccentricity() {
        let t = build_topology(&[(0, 1), (0, 2), (0, 3)], 0).unwrap();
        assert_eq!(t.root_eccentricity(), 1);
        assert_eq!(t.diameter(), 2);
        for u in t.nodes().skip(1) {
            assert_eq!(t.dist(u), 1);
        }
    }

    #[test]
    fn build_rejections_are_distinct() {
        assert_eq!(build_topology(&[], 0), Err(ModelError::EmptyEdgeList));
        assert_eq!(
            build_topology(&[(0, 0)], 0),
            Err(ModelError::SelfLoop(0))
        );
        assert_eq!(
            build_topology(&[(0, 1), (1, 0)], 0),
            Err(ModelError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            build_topology(&[(0, 1)], 5),
            Err(ModelError::RootNotANode(5))
        );
        assert_eq!(
            build_topology(&[(0, 1), (3, 4)], 0),
            Err(ModelError::NonContiguousNodes { missing: 2, max: 4 })
        );
        // 0-1 and 2-3 are separate components once 2 gets an edge.
        let err = build_topology(&[(0, 1), (2, 3), (2, 3)], 0).unwrap_err();
        assert_eq!(err, ModelError::DuplicateEdge(2, 3));
        assert_eq!(
            build_topology(&[(0, 1), (2, 3)], 0),
            Err(ModelError::Disconnected(2))
        );
    }

    #[test]
    fn edge_distance_bound_holds_on_generated_graphs() {
        for edges in [
            vec![(0usize, 1usize), (1, 2)],
            vec![(0, 1), (1, 2), (2, 0)],
            vec![(0, 1), (0, 2), (0, 3)],
            vec![(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)],
        ] {
            let t = build_topology(&edges, 0).unwrap();
            for (u, v) in t.edges() {
                let du = t.dist(u) as isize;
                let dv = t.dist(v) as isize;
                assert!((du - dv).abs() <= 1, "edge ({u},{v}) violates distance bound");
            }
        }
    }

    #[test]
    fn state_space_counts() {
        assert_eq!(state_space_size(&path(2)), 12 * 80);
        assert_eq!(state_space_size(&path(3)), 12 * 180 * 80);
        let tri = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        assert_eq!(state_space_size(&tri), 12 * 180 * 180);
    }

    #[test]
    fn enumeration_count_matches_closed_form_and_has_no_duplicates() {
        let t = path(2);
        let configs: Vec<_> = enumerate_configurations(&t, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .collect();
        assert_eq!(configs.len(), 960);
        let set: std::collections::HashSet<_> = configs.iter().cloned().collect();
        assert_eq!(set.len(), 960);
        for c in &configs {
            c.validate(&t).unwrap();
        }
    }

    #[test]
    fn enumeration_respects_cap() {
        let t = path(3);
        match enumerate_configurations(&t, 1000) {
            Err(ModelError::StateSpaceTooLarge { size, cap }) => {
                assert_eq!(size, 172_800);
                assert_eq!(cap, 1000);
            }
            Err(other) => panic!("expected cap refusal, got {other:?}"),
            Ok(_) => panic!("expected cap refusal, got an enumerator"),
        }
    }

    #[test]
    fn random_configuration_is_deterministic_and_valid() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let a = random_configuration(&t, 7);
        let b = random_configuration(&t, 7);
        assert_eq!(a, b);
        a.validate(&t).unwrap();
        assert!(a.state(0).parent.is_none());
    }

    #[test]
    fn random_configuration_covers_all_statuses() {
        let t = build_topology(&[(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for seed in 0..10_000u64 {
            let c = random_configuration(&t, seed);
            for u in t.nodes().skip(1) {
                seen.insert(c.state(u).status);
            }
        }
        for s in Status::ALL {
            assert!(seen.contains(&s), "status {s:?} never sampled");
        }
    }

    #[test]
    fn packed_widths_match_formula() {
        assert_eq!(packed_width(1), 7);
        assert_eq!(packed_width(2), 9);
        assert_eq!(packed_width(3), 9);
        assert_eq!(packed_width(4), 11);
        assert_eq!(packed_width(8), 13);
    }

    #[test]
    fn pack_unpack_roundtrip_exhaustive_small_degrees() {
        for degree in 1..=8usize {
            let neighbors: Vec<NodeId> = (1..=degree).collect();
            for p_slot in 0..=degree {
                for ts_slot in 0..=degree {
                    for color in [Color::C0, Color::C1] {
                        for status in Status::ALL {
                            for phase in [Phase::A, Phase::B] {
                                let decode = |slot: usize| {
                                    if slot == degree {
                                        None
                                    } else {
                                        Some(neighbors[slot])
                                    }
                                };
                                let st = ProcessState::new(
                                    decode(p_slot),
                                    decode(ts_slot),
                                    color,
                                    status,
                                    phase,
                                );
                                let packed = pack(&st, &neighbors).unwrap();
                                assert_eq!(packed.width, packed_width(degree));
                                let back = unpack(&packed, &neighbors).unwrap();
                                assert_eq!(st, back);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unpack_rejects_bad_input() {
        let neighbors = [1usize, 2, 3];
        // Status code 5 is invalid.
        let bad_status = PackedState {
            bits: 0b0000_0101_0,
            width: 9,
        };
        assert!(matches!(
            unpack(&bad_status, &neighbors),
            Err(ModelError::BadStatusBits(5))
        ));
        let bad_width = PackedState { bits: 0, width: 8 };
        assert!(matches!(
            unpack(&bad_width, &neighbors),
            Err(ModelError::WidthMismatch { .. })
        ));
        let stray = PackedState {
            bits: 1 << 10,
            width: 9,
        };
        assert!(matches!(
            unpack(&stray, &neighbors),
            Err(ModelError::PackedOverflow { .. })
        ));
    }
}
