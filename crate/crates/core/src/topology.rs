//! Network graphs, per-node memory allocation and traffic matrices.
//!
//! A [`Topology`] is immutable once built and can be shared read-only between
//! concurrently running trials.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense 0-based node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub lo: NodeId,
    pub hi: NodeId,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Edge { lo: a, hi: b }
        } else {
            Edge { lo: b, hi: a }
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.lo == n || self.hi == n
    }

    /// The endpoint that is not `n`, if `n` is an endpoint.
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.lo == n {
            Some(self.hi)
        } else if self.hi == n {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range for a {n_nodes}-node topology")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("node {node} has {count} memories; at least 1 is required")]
    NoMemory { node: usize, count: usize },
    #[error("expected {expected} per-node memory counts, got {got}")]
    MemoryCountMismatch { expected: usize, got: usize },
    #[error("traffic weight {weight} for ({a},{b}) is outside [0,1]")]
    BadTrafficWeight { a: usize, b: usize, weight: f64 },
    #[error("traffic entry ({0},{0}) lies on the diagonal")]
    DiagonalTraffic(usize),
    #[error("traffic matrix has no positive off-diagonal entry")]
    EmptyTraffic,
    #[error("malformed topology document: {0}")]
    Parse(String),
}

/// Undirected connected graph with a memory count per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<NodeId>>,
    memories: Vec<usize>,
}

impl Topology {
    /// Validates and builds a topology. `memories` must hold one count per node.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        memories: Vec<usize>,
    ) -> Result<Self, TopologyError> {
        if n_nodes < 2 {
            return Err(TopologyError::TooFewNodes { min: 2, got: n_nodes });
        }
        if memories.len() != n_nodes {
            return Err(TopologyError::MemoryCountMismatch {
                expected: n_nodes,
                got: memories.len(),
            });
        }
        if let Some((node, &count)) = memories.iter().enumerate().find(|(_, &m)| m < 1) {
            return Err(TopologyError::NoMemory { node, count });
        }

        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for node in [a, b] {
                if node >= n_nodes {
                    return Err(TopologyError::NodeOutOfRange { node, n_nodes });
                }
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if !set.insert(Edge::new(NodeId(a), NodeId(b))) {
                return Err(TopologyError::DuplicateEdge(a.min(b), a.max(b)));
            }
        }

        let mut adjacency = vec![Vec::new(); n_nodes];
        for e in &set {
            adjacency[e.lo.0].push(e.hi);
            adjacency[e.hi.0].push(e.lo);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let topology = Topology {
            edges: set.into_iter().collect(),
            adjacency,
            memories,
        };
        if !topology.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(topology)
    }

    /// Same graph with every node given `m` memories.
    pub fn with_uniform_memories(&self, m: usize) -> Result<Self, TopologyError> {
        self.with_memories(vec![m; self.n_nodes()])
    }

    pub fn with_memories(&self, memories: Vec<usize>) -> Result<Self, TopologyError> {
        Topology::new(
            self.n_nodes(),
            self.edges.iter().map(|e| (e.lo.0, e.hi.0)),
            memories,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n_nodes()).map(NodeId)
    }

    /// Edges sorted by `(lo, hi)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors in ascending order.
    pub fn neighbors(&self, n: NodeId) -> &[NodeId] {
        &self.adjacency[n.0]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n.0].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn memories(&self, n: NodeId) -> usize {
        self.memories[n.0]
    }

    pub fn memory_counts(&self) -> &[usize] {
        &self.memories
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n.0 < self.n_nodes()
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.adjacency[a.0].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(NodeId(0)).iter().all(Option::is_some)
    }

    /// Unweighted hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_nodes()];
        let mut queue = VecDeque::new();
        dist[src.0] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.0].unwrap_or(0);
            for &v in self.neighbors(u) {
                if dist[v.0].is_none() {
                    dist[v.0] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs hop distances. Valid because the graph is connected.
    pub fn hop_distances(&self) -> Vec<Vec<usize>> {
        self.nodes()
            .map(|s| {
                self.bfs_distances(s)
                    .into_iter()
                    .map(|d| d.unwrap_or(usize::MAX))
                    .collect()
            })
            .collect()
    }

    /// The lexicographically smallest pair `(a, b)`, `a < b`, at maximum hop distance.
    pub fn max_hop_pair(&self) -> (NodeId, NodeId) {
        let dist = self.hop_distances();
        let mut best = (NodeId(0), NodeId(1));
        let mut best_d = 0;
        for a in 0..self.n_nodes() {
            for b in a + 1..self.n_nodes() {
                if dist[a][b] > best_d {
                    best_d = dist[a][b];
                    best = (NodeId(a), NodeId(b));
                }
            }
        }
        best
    }

    pub fn to_document(&self) -> TopologyDocument {
        let first = self.memories[0];
        let memories = if self.memories.iter().all(|&m| m == first) {
            MemorySpec::Uniform(first)
        } else {
            MemorySpec::PerNode(self.memories.clone())
        };
        TopologyDocument {
            n_nodes: self.n_nodes(),
            edges: self.edges.iter().map(|e| [e.lo.0, e.hi.0]).collect(),
            memories,
            traffic: None,
        }
    }
}

/// Memory allocation as written in a topology document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemorySpec {
    Uniform(usize),
    PerNode(Vec<usize>),
}

/// JSON-compatible description of a topology and, optionally, its traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub memories: MemorySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<Vec<(usize, usize, f64)>>,
}

impl TopologyDocument {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology document serializes")
    }

    /// Traffic matrix from the `traffic` field, if present.
    pub fn traffic_matrix(&self) -> Result<Option<TrafficMatrix>, TopologyError> {
        self.traffic
            .as_ref()
            .map(|entries| TrafficMatrix::from_entries(self.n_nodes, entries.iter().copied()))
            .transpose()
    }
}

pub fn load_topology(doc: &TopologyDocument) -> Result<Topology, TopologyError> {
    let memories = match &doc.memories {
        MemorySpec::Uniform(m) => vec![*m; doc.n_nodes],
        MemorySpec::PerNode(v) => v.clone(),
    };
    Topology::new(doc.n_nodes, doc.edges.iter().map(|e| (e[0], e[1])), memories)
}

/// Default memory count per node.
pub const DEFAULT_MEMORIES: usize = 5;

/// Eight nodes, two bottleneck nodes 3 and 4 joined by a single edge, three
/// leaves hanging off each.
pub fn make_bottleneck() -> Topology {
    let edges = [(0, 3), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (4, 7)];
    Topology::new(8, edges, vec![DEFAULT_MEMORIES; 8]).expect("bottleneck topology is valid")
}

/// Nodes on the left and right side of [`make_bottleneck`].
pub const BOTTLENECK_LEFT: [usize; 3] = [0, 1, 2];
pub const BOTTLENECK_RIGHT: [usize; 3] = [5, 6, 7];
pub const BOTTLENECK_CORE: [usize; 2] = [3, 4];

/// Equal weight on every pair that crosses the bottleneck, zero elsewhere.
pub fn make_bottleneck_traffic() -> TrafficMatrix {
    let w = 1.0 / 9.0;
    let entries = BOTTLENECK_LEFT
        .iter()
        .flat_map(|&a| BOTTLENECK_RIGHT.iter().map(move |&b| (a, b, w)));
    TrafficMatrix::from_entries(8, entries).expect("bottleneck traffic is valid")
}

/// Seeded preferential-attachment graph resembling an internet AS map.
///
/// Each new node attaches to one or two distinct existing nodes picked with
/// probability proportional to degree. Extra preferential edges are then added
/// until the average degree reaches 2.
pub fn make_as_like(n: usize, seed: u64) -> Result<Topology, TopologyError> {
    if n < 4 {
        return Err(TopologyError::TooFewNodes { min: 4, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut degree = vec![0usize; n];
    let add = |edges: &mut BTreeSet<Edge>, degree: &mut Vec<usize>, a: usize, b: usize| {
        if edges.insert(Edge::new(NodeId(a), NodeId(b))) {
            degree[a] += 1;
            degree[b] += 1;
        }
    };

    add(&mut edges, &mut degree, 0, 1);
    for new in 2..n {
        let want = if rng.random_bool(0.5) { 2 } else { 1 };
        let mut targets = BTreeSet::new();
        while targets.len() < want.min(new) {
            targets.insert(pick_by_degree(&degree[..new], &targets, &mut rng));
        }
        for t in targets {
            add(&mut edges, &mut degree, new, t);
        }
    }

    while edges.len() < n {
        let a = pick_by_degree(&degree, &BTreeSet::new(), &mut rng);
        let mut exclude: BTreeSet<usize> = edges
            .iter()
            .filter_map(|e| e.other(NodeId(a)))
            .map(NodeId::index)
            .collect();
        exclude.insert(a);
        if exclude.len() == n {
            continue;
        }
        let b = pick_by_degree(&degree, &exclude, &mut rng);
        add(&mut edges, &mut degree, a, b);
    }

    Topology::new(
        n,
        edges.iter().map(|e| (e.lo.0, e.hi.0)),
        vec![DEFAULT_MEMORIES; n],
    )
}

// Degree-proportional choice among `degree.len()` nodes, skipping `exclude`.
// Nodes of degree zero get weight one so isolated candidates stay reachable.
fn pick_by_degree(degree: &[usize], exclude: &BTreeSet<usize>, rng: &mut impl Rng) -> usize {
    let weight = |i: usize| if exclude.contains(&i) { 0 } else { degree[i].max(1) };
    let total: usize = (0..degree.len()).map(weight).sum();
    let mut x = rng.random_range(0..total);
    for i in 0..degree.len() {
        let w = weight(i);
        if x < w {
            return i;
        }
        x -= w;
    }
    unreachable!("weights sum to total")
}

/// Symmetric request weights. Entry `(a, b)` and `(b, a)` describe the same
/// unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    weights: Vec<f64>,
}

impl TrafficMatrix {
    /// Builds a matrix from `(a, b, weight)` entries. Each entry sets both
    /// `T[a][b]` and `T[b][a]`; later entries overwrite earlier ones.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, TopologyError> {
        let mut weights = vec![0.0; n * n];
        for (a, b, w) in entries {
            for node in [a, b] {
                if node >= n {
                    return Err(TopologyError::NodeOutOfRange { node, n_nodes: n });
                }
            }
            if a == b {
                return Err(TopologyError::DiagonalTraffic(a));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(TopologyError::BadTrafficWeight { a, b, weight: w });
            }
            weights[a * n + b] = w;
            weights[b * n + a] = w;
        }
        if weights.iter().all(|&w| w <= 0.0) {
            return Err(TopologyError::EmptyTraffic);
        }
        Ok(TrafficMatrix { n, weights })
    }

    /// Every request is for the same pair.
    pub fn single_pair(n: usize, a: NodeId, b: NodeId) -> Result<Self, TopologyError> {
        Self::from_entries(n, [(a.0, b.0, 1.0)])
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> f64 {
        self.weights[a.0 * self.n + b.0]
    }

    /// Unordered pairs with positive weight, in `(lo, hi)` order.
    pub fn pairs(&self) -> Vec<(Edge, f64)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                let w = self.weights[a * self.n + b];
                if w > 0.0 {
                    out.push((Edge::new(NodeId(a), NodeId(b)), w));
                }
            }
        }
        out
    }

    /// Number of strictly positive entries in full (symmetric) matrix form.
    pub fn nonzero_entries(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.pairs()
            .into_iter()
            .map(|(e, w)| (e.lo.0, e.hi.0, w))
            .collect()
    }
}

/// Reference topology documents shipped with the crate.
pub mod builtin {
    use super::*;

    pub const BOTTLENECK8: &str = include_str!("../data/bottleneck8.json");
    pub const ASNET10: &str = include_str!("../data/asnet10.json");

    pub fn names() -> &'static [&'static str] {
        &["bottleneck8", "asnet10"]
    }

    pub fn document(name: &str) -> Option<TopologyDocument> {
        let text = match name {
            "bottleneck8" => BOTTLENECK8,
            "asnet10" => ASNET10,
            _ => return None,
        };
        Some(TopologyDocument::from_json(text).expect("builtin documents parse"))
    }
}
