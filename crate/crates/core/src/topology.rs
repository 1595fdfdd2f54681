//! COIN/MEC network graph, hop distances and the catalog of placement decisions.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

pub const LOWER_COIN_CAPACITY: f64 = 5e8;
pub const UPPER_COIN_CAPACITY: f64 = 1e9;
pub const MEC_CAPACITY: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    LowerCoin,
    UpperCoin,
    Mec,
    AccessPoint,
}

impl NodeKind {
    pub fn is_coin(self) -> bool {
        matches!(self, NodeKind::LowerCoin | NodeKind::UpperCoin)
    }

    /// Nodes that can execute tasks.
    pub fn is_compute(self) -> bool {
        !matches!(self, NodeKind::AccessPoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// CPU cycles per second.
    pub capacity: f64,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("node {0} is unreachable from node {1}")]
    DisconnectedGraph(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid topology: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("topology file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("topology file: {0}")]
    Io(#[from] std::io::Error),
}

/// A broken topology invariant, as reported by [`Topology::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    DuplicateNodeId { id: NodeId },
    InvalidCapacity { id: NodeId, capacity: f64 },
    SelfLoopLink { node: NodeId },
    UnknownLinkEndpoint { link: (NodeId, NodeId) },
    InvalidApAttachment { ap: NodeId, target: NodeId },
    MissingApAttachment { ap: NodeId },
    DisconnectedComputeGraph,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId { id } => write!(f, "duplicate node id {id}"),
            Violation::InvalidCapacity { id, capacity } => {
                write!(f, "node {id} has invalid capacity {capacity}")
            }
            Violation::SelfLoopLink { node } => write!(f, "self-loop link on node {node}"),
            Violation::UnknownLinkEndpoint { link } => {
                write!(f, "link ({}, {}) references an unknown node", link.0, link.1)
            }
            Violation::InvalidApAttachment { ap, target } => {
                write!(f, "access point {ap} attached to {target}, which is not a lower COIN")
            }
            Violation::MissingApAttachment { ap } => {
                write!(f, "access point {ap} is not attached to any lower COIN")
            }
            Violation::DisconnectedComputeGraph => write!(f, "compute nodes are not connected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<ComputeNode>,
    /// Undirected links, stored as given.
    pub links: Vec<(NodeId, NodeId)>,
    /// Access point id -> lower COIN id.
    pub ap_attachment: BTreeMap<NodeId, NodeId>,
}

impl Topology {
    /// 8 lower COINs, 4 fully meshed upper COINs, one MEC linked to every
    /// upper COIN and one access point per lower COIN. Lower COINs are
    /// wired two per upper COIN in id order.
    pub fn build_default() -> Topology {
        Topology::tiered(8, 4, 1)
    }

    /// Two COIN tiers and an edge tier with the default capacities. Lower
    /// COIN `i` hangs off upper COIN `i * n_upper / n_lower`; upper COINs are
    /// fully meshed and each links to every MEC. Ids run lowers, uppers,
    /// MECs, then one access point per lower COIN.
    pub fn tiered(n_lower: u32, n_upper: u32, n_mec: u32) -> Topology {
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        let mut ap_attachment = BTreeMap::new();
        let first_mec = n_lower + n_upper;
        let first_ap = first_mec + n_mec;
        for id in 0..n_lower {
            nodes.push(ComputeNode { id, kind: NodeKind::LowerCoin, capacity: LOWER_COIN_CAPACITY });
        }
        for id in n_lower..first_mec {
            nodes.push(ComputeNode { id, kind: NodeKind::UpperCoin, capacity: UPPER_COIN_CAPACITY });
        }
        for id in first_mec..first_ap {
            nodes.push(ComputeNode { id, kind: NodeKind::Mec, capacity: MEC_CAPACITY });
        }
        if n_upper > 0 {
            for lower in 0..n_lower {
                links.push((lower, n_lower + lower * n_upper / n_lower));
            }
        }
        for a in n_lower..first_mec {
            for b in (a + 1)..first_mec {
                links.push((a, b));
            }
            for e in first_mec..first_ap {
                links.push((a, e));
            }
        }
        for lower in 0..n_lower {
            let ap = first_ap + lower;
            nodes.push(ComputeNode { id: ap, kind: NodeKind::AccessPoint, capacity: 0.0 });
            ap_attachment.insert(ap, lower);
        }
        Topology { nodes, links, ap_attachment }
    }

    pub fn set_capacity(&mut self, id: NodeId, capacity: f64) {
        if let Some(n) = self.nodes.iter_mut().find(|n| n.id == id) {
            n.capacity = capacity;
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&ComputeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn capacity(&self, id: NodeId) -> Option<f64> {
        self.node(id).map(|n| n.capacity)
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.node(id).map(|n| n.kind)
    }

    fn ids_of(&self, kind: NodeKind) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.nodes.iter().filter(|n| n.kind == kind).map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn access_points(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::AccessPoint)
    }

    pub fn lower_coins(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::LowerCoin)
    }

    pub fn upper_coins(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::UpperCoin)
    }

    pub fn mecs(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Mec)
    }

    /// All COINs followed by all MECs, each group sorted by id. This is the
    /// order of the per-node feature slots.
    pub fn executor_nodes(&self) -> Vec<NodeId> {
        let mut coins: Vec<NodeId> =
            self.nodes.iter().filter(|n| n.kind.is_coin()).map(|n| n.id).collect();
        coins.sort_unstable();
        coins.extend(self.mecs());
        coins
    }

    fn neighbours(&self) -> HashMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: HashMap<NodeId, BTreeSet<NodeId>> =
            self.nodes.iter().map(|n| (n.id, BTreeSet::new())).collect();
        let attachments = self.ap_attachment.iter().map(|(&a, &b)| (a, b));
        for (a, b) in self.links.iter().copied().chain(attachments) {
            if a == b || !adj.contains_key(&a) || !adj.contains_key(&b) {
                continue;
            }
            adj.get_mut(&a).unwrap().insert(b);
            adj.get_mut(&b).unwrap().insert(a);
        }
        adj
    }

    /// Upper COIN directly linked to `lower`, lowest id first.
    pub fn parent_upper(&self, lower: NodeId) -> Option<NodeId> {
        let adj = self.neighbours();
        adj.get(&lower)?
            .iter()
            .copied()
            .find(|&n| self.kind(n) == Some(NodeKind::UpperCoin))
    }

    /// Empty iff every topology invariant holds.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                out.push(Violation::DuplicateNodeId { id: n.id });
            }
            let ok = match n.kind {
                NodeKind::AccessPoint => n.capacity == 0.0,
                _ => n.capacity.is_finite() && n.capacity > 0.0,
            };
            if !ok {
                out.push(Violation::InvalidCapacity { id: n.id, capacity: n.capacity });
            }
        }
        for &(a, b) in &self.links {
            if a == b {
                out.push(Violation::SelfLoopLink { node: a });
            } else if !seen.contains(&a) || !seen.contains(&b) {
                out.push(Violation::UnknownLinkEndpoint { link: (a, b) });
            }
        }
        for ap in self.access_points() {
            match self.ap_attachment.get(&ap) {
                None => out.push(Violation::MissingApAttachment { ap }),
                Some(&target) if self.kind(target) != Some(NodeKind::LowerCoin) => {
                    out.push(Violation::InvalidApAttachment { ap, target })
                }
                Some(_) => {}
            }
        }
        for (&ap, &target) in &self.ap_attachment {
            if self.kind(ap) != Some(NodeKind::AccessPoint) {
                out.push(Violation::InvalidApAttachment { ap, target });
            }
        }
        if !self.compute_nodes_connected() {
            out.push(Violation::DisconnectedComputeGraph);
        }
        out
    }

    fn compute_nodes_connected(&self) -> bool {
        let compute: Vec<NodeId> =
            self.nodes.iter().filter(|n| n.kind.is_compute()).map(|n| n.id).collect();
        let Some(&start) = compute.first() else { return true };
        let adj = self.neighbours();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[&u] {
                if self.kind(v).is_some_and(NodeKind::is_compute) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        compute.iter().all(|id| seen.contains(id))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    /// Parses and validates a topology file.
    pub fn from_json(text: &str) -> Result<Topology, TopologyError> {
        let t: Topology = serde_json::from_str(text)?;
        let violations = t.validate();
        if violations.is_empty() {
            Ok(t)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }
}

/// Breadth-first hop counts between every pair of nodes, access points included.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMatrix {
    index: HashMap<NodeId, usize>,
    ids: Vec<NodeId>,
    hops: Vec<Vec<u32>>,
}

impl HopMatrix {
    pub fn new(t: &Topology) -> Result<HopMatrix, TopologyError> {
        let mut ids: Vec<NodeId> = t.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids.dedup();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let adj = t.neighbours();
        let n = ids.len();
        let mut hops = vec![vec![u32::MAX; n]; n];
        for (s, &src) in ids.iter().enumerate() {
            hops[s][s] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                let du = hops[s][index[&u]];
                for v in &adj[&u] {
                    let vi = index[v];
                    if hops[s][vi] == u32::MAX {
                        hops[s][vi] = du + 1;
                        queue.push_back(*v);
                    }
                }
            }
            if let Some(t) = hops[s].iter().position(|&h| h == u32::MAX) {
                return Err(TopologyError::DisconnectedGraph(ids[t], src));
            }
        }
        Ok(HopMatrix { index, ids, hops })
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Result<u32, TopologyError> {
        let ia = *self.index.get(&a).ok_or(TopologyError::UnknownNode(a))?;
        let ib = *self.index.get(&b).ok_or(TopologyError::UnknownNode(b))?;
        Ok(self.hops[ia][ib])
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }
}

/// One placement choice for a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    /// Partial offload split across two COINs.
    Po { c0: NodeId, c1: NodeId },
    /// Full offload to a MEC.
    Fo { e: NodeId },
    /// Whole task on one COIN (no-splitting scenario).
    Single { c: NodeId },
}

impl Decision {
    pub fn nodes(&self) -> Vec<NodeId> {
        match *self {
            Decision::Po { c0, c1 } => vec![c0, c1],
            Decision::Fo { e } => vec![e],
            Decision::Single { c } => vec![c],
        }
    }

    pub fn uses(&self, node: NodeId) -> bool {
        match *self {
            Decision::Po { c0, c1 } => c0 == node || c1 == node,
            Decision::Fo { e } => e == node,
            Decision::Single { c } => c == node,
        }
    }

    pub fn is_fo(&self) -> bool {
        matches!(self, Decision::Fo { .. })
    }

    pub fn is_po(&self) -> bool {
        matches!(self, Decision::Po { .. })
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Po { c0, c1 } => write!(f, "PO({c0},{c1})"),
            Decision::Fo { e } => write!(f, "FO({e})"),
            Decision::Single { c } => write!(f, "SINGLE({c})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Split,
    NoSplit,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "split" => Ok(SplitMode::Split),
            "nosplit" | "no-split" => Ok(SplitMode::NoSplit),
            other => Err(format!("unknown mode {other:?} (expected split|nosplit)")),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Split => "split",
            SplitMode::NoSplit => "nosplit",
        })
    }
}

/// Ordered, duplicate-free list of decisions. A decision's position is its
/// classification label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCatalog {
    pub decisions: Vec<Decision>,
    pub mode: SplitMode,
}

impl DecisionCatalog {
    pub fn build(t: &Topology, mode: SplitMode) -> DecisionCatalog {
        let mut decisions = Vec::new();
        match mode {
            SplitMode::Split => {
                for lower in t.lower_coins() {
                    if let Some(upper) = t.parent_upper(lower) {
                        decisions.push(Decision::Po { c0: lower, c1: upper });
                    }
                }
            }
            SplitMode::NoSplit => {
                let mut coins: Vec<NodeId> =
                    t.nodes.iter().filter(|n| n.kind.is_coin()).map(|n| n.id).collect();
                coins.sort_unstable();
                decisions.extend(coins.into_iter().map(|c| Decision::Single { c }));
            }
        }
        decisions.extend(t.mecs().into_iter().map(|e| Decision::Fo { e }));
        DecisionCatalog { decisions, mode }
    }

    /// Split-mode catalog over an explicit list of COIN pairs.
    pub fn with_pairs(t: &Topology, pairs: &[(NodeId, NodeId)]) -> DecisionCatalog {
        let mut po: Vec<Decision> = pairs.iter().map(|&(c0, c1)| Decision::Po { c0, c1 }).collect();
        po.sort();
        po.dedup();
        po.extend(t.mecs().into_iter().map(|e| Decision::Fo { e }));
        DecisionCatalog { decisions: po, mode: SplitMode::Split }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn index_of(&self, d: &Decision) -> Option<usize> {
        self.decisions.iter().position(|x| x == d)
    }

    pub fn get(&self, label: usize) -> Option<Decision> {
        self.decisions.get(label).copied()
    }
}
