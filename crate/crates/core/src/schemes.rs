//! Partner-selection policies for continuous generation.
//!
//! The adaptive scheme keeps one [`NeighborDistribution`] per node. After a
//! request completes, each node on its route reports which route neighbors
//! already shared a link with it (`used`) and which had to be linked on demand
//! (`created`); [`NeighborDistribution::adapt`] then keeps the `used`
//! probabilities, raises the `created` ones in proportion to the mass held by
//! neighbors outside the route, and spreads what is left evenly over those
//! outside neighbors.
//!
//! The two global schemes ignore history and may pick any node as a partner;
//! an attempt with a non-adjacent partner only succeeds if every elementary
//! link along the shortest path succeeds in the same step.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Edge, NodeId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum SchemeError {
    #[error("node {0} has no neighbors")]
    Isolated(NodeId),
    #[error("node {node} is not a neighbor of {owner}")]
    NotNeighbor { owner: NodeId, node: NodeId },
    #[error("node {0} is listed as both used and created")]
    Overlap(NodeId),
    #[error("alpha {0} is outside [0,1]")]
    BadAlpha(f64),
    #[error("power-law exponent {0} must be positive")]
    BadExponent(f64),
    #[error("path is empty or breaks between {0} and {1}")]
    BrokenPath(NodeId, NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Adaptive,
    UniformGlobal,
    PowerLawGlobal,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Adaptive => "adaptive",
            SchemeKind::UniformGlobal => "uniform_global",
            SchemeKind::PowerLawGlobal => "power_law_global",
        }
    }
}

pub const DEFAULT_POWER_LAW_EXPONENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Adaptation rate, only used by the adaptive scheme.
    #[serde(default)]
    pub alpha: f64,
    /// Distance exponent, only used by the power-law scheme.
    #[serde(default = "default_exponent")]
    pub power_law_exponent: f64,
}

fn default_exponent() -> f64 {
    DEFAULT_POWER_LAW_EXPONENT
}

impl SchemeConfig {
    pub fn adaptive(alpha: f64) -> Self {
        SchemeConfig {
            kind: SchemeKind::Adaptive,
            alpha,
            power_law_exponent: DEFAULT_POWER_LAW_EXPONENT,
        }
    }

    pub fn uniform_global() -> Self {
        SchemeConfig {
            kind: SchemeKind::UniformGlobal,
            ..Self::adaptive(0.0)
        }
    }

    pub fn power_law_global(exponent: f64) -> Self {
        SchemeConfig {
            kind: SchemeKind::PowerLawGlobal,
            alpha: 0.0,
            power_law_exponent: exponent,
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SchemeError::BadAlpha(self.alpha));
        }
        if !(self.power_law_exponent > 0.0 && self.power_law_exponent.is_finite()) {
            return Err(SchemeError::BadExponent(self.power_law_exponent));
        }
        Ok(())
    }
}

/// Route neighbors of one node after a request: those whose link was
/// pre-generated and consumed, and those that had to be linked on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageRecord {
    owner: NodeId,
    used: BTreeSet<NodeId>,
    created: BTreeSet<NodeId>,
}

impl UsageRecord {
    pub fn new(
        topology: &Topology,
        owner: NodeId,
        used: impl IntoIterator<Item = NodeId>,
        created: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, SchemeError> {
        let used: BTreeSet<NodeId> = used.into_iter().collect();
        let created: BTreeSet<NodeId> = created.into_iter().collect();
        for &n in used.iter().chain(&created) {
            if !topology.are_adjacent(owner, n) {
                return Err(SchemeError::NotNeighbor { owner, node: n });
            }
        }
        if let Some(&n) = used.intersection(&created).next() {
            return Err(SchemeError::Overlap(n));
        }
        Ok(UsageRecord {
            owner,
            used,
            created,
        })
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn used(&self) -> &BTreeSet<NodeId> {
        &self.used
    }

    pub fn created(&self) -> &BTreeSet<NodeId> {
        &self.created
    }
}

/// Probability of picking each neighbor as a generation partner.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborDistribution {
    owner: NodeId,
    neighbors: Vec<NodeId>,
    probs: Vec<f64>,
}

impl NeighborDistribution {
    pub fn init_uniform(owner: NodeId, topology: &Topology) -> Result<Self, SchemeError> {
        let neighbors = topology.neighbors(owner).to_vec();
        if neighbors.is_empty() {
            return Err(SchemeError::Isolated(owner));
        }
        let p = 1.0 / neighbors.len() as f64;
        Ok(NeighborDistribution {
            owner,
            probs: vec![p; neighbors.len()],
            neighbors,
        })
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, n: NodeId) -> Option<f64> {
        self.neighbors
            .binary_search(&n)
            .ok()
            .map(|i| self.probs[i])
    }

    /// One adaptation round.
    pub fn adapt(&self, usage: &UsageRecord, alpha: f64) -> NeighborDistribution {
        let mut next = self.clone();
        next.adapt_in_place(usage, alpha);
        next
    }

    pub fn adapt_in_place(&mut self, usage: &UsageRecord, alpha: f64) {
        debug_assert_eq!(usage.owner, self.owner);
        let in_route = |n: &NodeId| usage.used.contains(n) || usage.created.contains(n);
        if self.neighbors.iter().all(in_route) {
            // Route covers every neighbor: the route mass is the whole
            // distribution and nothing moves.
            return;
        }

        let route_mass: f64 = self
            .neighbors
            .iter()
            .zip(&self.probs)
            .filter(|(n, _)| in_route(n))
            .map(|(_, p)| p)
            .sum();
        let step = if usage.created.is_empty() {
            0.0
        } else {
            alpha / usage.created.len() as f64 * (1.0 - route_mass)
        };

        let mut route_mass_next = 0.0;
        let mut outside = 0usize;
        for (n, p) in self.neighbors.iter().zip(self.probs.iter_mut()) {
            if usage.created.contains(n) {
                *p += step;
            }
            if in_route(n) {
                route_mass_next += *p;
            } else {
                outside += 1;
            }
        }
        if outside > 0 {
            let share = (1.0 - route_mass_next) / outside as f64;
            for (n, p) in self.neighbors.iter().zip(self.probs.iter_mut()) {
                if !in_route(n) {
                    *p = share;
                }
            }
        }

        // The update is non-negative in exact arithmetic for alpha in [0,1];
        // only rounding can push a value below zero.
        if self.probs.iter().any(|&p| p < 0.0) {
            let renormalize = self.probs.iter().any(|&p| p < -1e-12);
            for p in &mut self.probs {
                *p = p.max(0.0);
            }
            if renormalize {
                let total: f64 = self.probs.iter().sum();
                for p in &mut self.probs {
                    *p /= total;
                }
            }
        }
    }

    pub fn choose_partner(&self, rng: &mut impl Rng) -> NodeId {
        let mut x = rng.random::<f64>();
        for (n, &p) in self.neighbors.iter().zip(&self.probs) {
            if x < p {
                return *n;
            }
            x -= p;
        }
        // Rounding left a sliver past the last bucket.
        let last = self
            .probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.probs.len() - 1);
        self.neighbors[last]
    }
}

/// Partner weights of a global scheme, one sampler per owner, built once per
/// topology.
#[derive(Debug, Clone)]
pub struct GlobalPartnerSampler {
    distances: Vec<Vec<usize>>,
    samplers: Vec<(Vec<NodeId>, WeightedIndex<f64>)>,
}

impl GlobalPartnerSampler {
    pub fn new(topology: &Topology, config: &SchemeConfig) -> Self {
        let distances = topology.hop_distances();
        let samplers = topology
            .nodes()
            .map(|owner| {
                let (candidates, weights) = global_weights(owner, &distances, config);
                let index = WeightedIndex::new(&weights).expect("at least two nodes");
                (candidates, index)
            })
            .collect();
        GlobalPartnerSampler {
            distances,
            samplers,
        }
    }

    pub fn choose(&self, owner: NodeId, rng: &mut impl Rng) -> NodeId {
        let (candidates, index) = &self.samplers[owner.0];
        candidates[index.sample(rng)]
    }

    pub fn hop_distance(&self, a: NodeId, b: NodeId) -> usize {
        self.distances[a.0][b.0]
    }
}

fn global_weights(
    owner: NodeId,
    distances: &[Vec<usize>],
    config: &SchemeConfig,
) -> (Vec<NodeId>, Vec<f64>) {
    (0..distances.len())
        .filter(|&n| n != owner.0)
        .map(|n| {
            let w = match config.kind {
                SchemeKind::PowerLawGlobal => {
                    (distances[owner.0][n] as f64).powf(-config.power_law_exponent)
                }
                _ => 1.0,
            };
            (NodeId(n), w)
        })
        .unzip()
}

/// Picks a partner anywhere in the network. Uniform over all other nodes for
/// `UniformGlobal`; weighted by `hops^-exponent` for `PowerLawGlobal`.
pub fn choose_global_partner(
    owner: NodeId,
    topology: &Topology,
    config: &SchemeConfig,
    rng: &mut impl Rng,
) -> NodeId {
    let distances = topology.hop_distances();
    let (candidates, weights) = global_weights(owner, &distances, config);
    let index = WeightedIndex::new(&weights).expect("at least two nodes");
    candidates[index.sample(rng)]
}

/// Success probability of a single-step end-to-end attempt along `path`:
/// every one of its elementary links must succeed.
pub fn multi_hop_success_probability(
    topology: &Topology,
    path: &[NodeId],
    p_gen: f64,
) -> Result<f64, SchemeError> {
    if path.len() < 2 {
        let n = path.first().copied().unwrap_or(NodeId(0));
        return Err(SchemeError::BrokenPath(n, n));
    }
    for w in path.windows(2) {
        if !topology.are_adjacent(w[0], w[1]) {
            return Err(SchemeError::BrokenPath(w[0], w[1]));
        }
    }
    Ok(p_gen.powi(path.len() as i32 - 1))
}

/// `(used, created)` neighbor sets of `node` for a route whose edges split
/// into `have` and `need`.
pub fn usage_from_route(
    path: &[NodeId],
    have: &BTreeSet<Edge>,
    node: NodeId,
) -> (Vec<NodeId>, Vec<NodeId>) {
    let mut used = Vec::new();
    let mut created = Vec::new();
    for w in path.windows(2) {
        let e = Edge::new(w[0], w[1]);
        if let Some(other) = e.other(node) {
            if have.contains(&e) {
                used.push(other);
            } else {
                created.push(other);
            }
        }
    }
    (used, created)
}
