//! Memory slots and live entanglement links.
//!
//! Every slot holds at most one link and every live link occupies exactly one
//! slot at each of its two endpoints. Links expire `lifetime` steps after
//! creation, freeing both slots.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Edge, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u64);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// One memory slot of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotRef {
    pub node: NodeId,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntanglementLink {
    pub id: LinkId,
    pub endpoints: [SlotRef; 2],
    pub created_at: u64,
}

impl EntanglementLink {
    /// The two entangled nodes.
    pub fn span(&self) -> Edge {
        Edge::new(self.endpoints[0].node, self.endpoints[1].node)
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.endpoints.iter().any(|s| s.node == n)
    }

    /// The far end as seen from `n`.
    pub fn other_end(&self, n: NodeId) -> Option<SlotRef> {
        if self.endpoints[0].node == n {
            Some(self.endpoints[1])
        } else if self.endpoints[1].node == n {
            Some(self.endpoints[0])
        } else {
            None
        }
    }

    fn age_key(&self) -> (u64, LinkId) {
        (self.created_at, self.id)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(NodeId, NodeId),
    #[error("cannot entangle node {0} with itself")]
    SameNode(NodeId),
    #[error("node {0} has no free memory slot")]
    NoFreeSlot(NodeId),
    #[error("link {0} is not live")]
    DeadLink(LinkId),
    #[error("links {left} and {right} do not meet at node {via}")]
    NotMeeting {
        left: LinkId,
        right: LinkId,
        via: NodeId,
    },
}

/// Per-step snapshot for trace output: live link spans and free slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrace {
    pub t: u64,
    pub links: Vec<[usize; 2]>,
    pub free: Vec<usize>,
}

/// Mutable memory and link state of one trial.
#[derive(Debug, Clone)]
pub struct NetworkState<'t> {
    topology: &'t Topology,
    lifetime: Option<u64>,
    slots: Vec<Vec<Option<LinkId>>>,
    free: Vec<usize>,
    links: BTreeMap<LinkId, EntanglementLink>,
    next_id: u64,
    clock: u64,
}

impl<'t> NetworkState<'t> {
    /// Empty memories at time 0. `lifetime` of `None` means links never expire.
    pub fn new(topology: &'t Topology, lifetime: Option<u64>) -> Self {
        let slots = topology
            .memory_counts()
            .iter()
            .map(|&m| vec![None; m])
            .collect();
        NetworkState {
            topology,
            lifetime,
            slots,
            free: topology.memory_counts().to_vec(),
            links: BTreeMap::new(),
            next_id: 0,
            clock: 0,
        }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topology
    }

    pub fn lifetime(&self) -> Option<u64> {
        self.lifetime
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn free_slots(&self, n: NodeId) -> usize {
        self.free[n.0]
    }

    pub fn occupied_slots(&self, n: NodeId) -> usize {
        self.slots[n.0].len() - self.free[n.0]
    }

    pub fn link(&self, id: LinkId) -> Option<&EntanglementLink> {
        self.links.get(&id)
    }

    pub fn links(&self) -> impl Iterator<Item = &EntanglementLink> {
        self.links.values()
    }

    pub fn live_links(&self) -> usize {
        self.links.len()
    }

    /// Live links with an endpoint on `n`, in slot order.
    pub fn links_at(&self, n: NodeId) -> impl Iterator<Item = &EntanglementLink> + '_ {
        self.slots[n.0]
            .iter()
            .flatten()
            .map(move |id| &self.links[id])
    }

    /// Removes every link whose age at `t` has reached the lifetime, frees its
    /// slots and moves the clock to `t`. Returns the number of expired links.
    pub fn expire(&mut self, t: u64) -> usize {
        debug_assert!(t >= self.clock, "clock moved backwards");
        self.clock = t;
        let Some(lifetime) = self.lifetime else {
            return 0;
        };
        let dead: Vec<LinkId> = self
            .links
            .values()
            .filter(|l| t.saturating_sub(l.created_at) >= lifetime)
            .map(|l| l.id)
            .collect();
        for id in &dead {
            self.remove(*id);
        }
        dead.len()
    }

    /// One generation attempt across a physical edge. Succeeds with
    /// probability `p`; on success both endpoints lose their lowest free slot.
    pub fn try_generate(
        &mut self,
        a: NodeId,
        b: NodeId,
        p: f64,
        rng: &mut impl Rng,
    ) -> Result<Option<LinkId>, NetError> {
        if !self.topology.are_adjacent(a, b) {
            return Err(NetError::NotAdjacent(a, b));
        }
        self.try_generate_between(a, b, p, rng)
    }

    /// Like [`try_generate`](Self::try_generate) but for any two distinct
    /// nodes, used by schemes that attempt end-to-end links directly.
    pub fn try_generate_between(
        &mut self,
        a: NodeId,
        b: NodeId,
        p: f64,
        rng: &mut impl Rng,
    ) -> Result<Option<LinkId>, NetError> {
        if a == b {
            return Err(NetError::SameNode(a));
        }
        for n in [a, b] {
            if self.free[n.0] == 0 {
                return Err(NetError::NoFreeSlot(n));
            }
        }
        if rng.random::<f64>() < p {
            Ok(Some(self.insert_link(a, b, self.clock)))
        } else {
            Ok(None)
        }
    }

    /// Entanglement swap at `via`. Both inputs are consumed whatever the
    /// outcome. With probability `p` the outer slots are re-used for a link
    /// spanning the two far ends, dated by the older input; otherwise they are
    /// freed as well.
    pub fn try_swap(
        &mut self,
        left: LinkId,
        right: LinkId,
        via: NodeId,
        p: f64,
        rng: &mut impl Rng,
    ) -> Result<Option<LinkId>, NetError> {
        let l = self.links.get(&left).ok_or(NetError::DeadLink(left))?;
        let r = self.links.get(&right).ok_or(NetError::DeadLink(right))?;
        let not_meeting = NetError::NotMeeting { left, right, via };
        if left == right {
            return Err(not_meeting);
        }
        let (Some(outer_l), Some(outer_r)) = (l.other_end(via), r.other_end(via)) else {
            return Err(not_meeting);
        };
        if outer_l.node == outer_r.node || outer_l.node == via || outer_r.node == via {
            return Err(not_meeting);
        }
        let created_at = l.created_at.min(r.created_at);

        self.remove(left);
        self.remove(right);
        if rng.random::<f64>() < p {
            Ok(Some(self.occupy(outer_l, outer_r, created_at)))
        } else {
            Ok(None)
        }
    }

    /// Oldest live link spanning `{a, b}`.
    pub fn find_link(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        let want = Edge::new(a, b);
        self.links_at(a)
            .filter(|l| l.span() == want)
            .min_by_key(|l| l.age_key())
            .map(|l| l.id)
    }

    /// Oldest live link at `n` that is not in `protected`.
    pub fn oldest_link_at(&self, n: NodeId, protected: &[LinkId]) -> Option<LinkId> {
        self.links_at(n)
            .filter(|l| !protected.contains(&l.id))
            .min_by_key(|l| l.age_key())
            .map(|l| l.id)
    }

    /// Consumes or discards a live link, freeing both slots.
    pub fn release(&mut self, id: LinkId) -> Result<EntanglementLink, NetError> {
        if !self.links.contains_key(&id) {
            return Err(NetError::DeadLink(id));
        }
        Ok(self.remove(id))
    }

    pub(crate) fn insert_link(&mut self, a: NodeId, b: NodeId, created_at: u64) -> LinkId {
        let sa = self.lowest_free(a).expect("caller checked free slot");
        let sb = self.lowest_free(b).expect("caller checked free slot");
        self.occupy(sa, sb, created_at)
    }

    fn lowest_free(&self, n: NodeId) -> Option<SlotRef> {
        self.slots[n.0]
            .iter()
            .position(Option::is_none)
            .map(|slot| SlotRef { node: n, slot })
    }

    fn occupy(&mut self, a: SlotRef, b: SlotRef, created_at: u64) -> LinkId {
        let id = LinkId(self.next_id);
        self.next_id += 1;
        for s in [a, b] {
            debug_assert!(self.slots[s.node.0][s.slot].is_none());
            self.slots[s.node.0][s.slot] = Some(id);
            self.free[s.node.0] -= 1;
        }
        self.links.insert(
            id,
            EntanglementLink {
                id,
                endpoints: [a, b],
                created_at,
            },
        );
        id
    }

    fn remove(&mut self, id: LinkId) -> EntanglementLink {
        let link = self.links.remove(&id).expect("link is live");
        for s in link.endpoints {
            self.slots[s.node.0][s.slot] = None;
            self.free[s.node.0] += 1;
        }
        link
    }

    /// Full consistency audit: slot/link cross references, monogamy, free
    /// counters and expiration completeness.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for (n, slots) in self.slots.iter().enumerate() {
            let occupied = slots.iter().filter(|s| s.is_some()).count();
            if occupied + self.free[n] != self.topology.memories(NodeId(n)) {
                return Err(format!("node {n}: slot census does not add up"));
            }
            for (slot, id) in slots.iter().enumerate() {
                let Some(id) = id else { continue };
                seen += 1;
                let here = SlotRef { node: NodeId(n), slot };
                let Some(link) = self.links.get(id) else {
                    return Err(format!("slot {n}/{slot} points at dead link {id}"));
                };
                if !link.endpoints.contains(&here) {
                    return Err(format!("link {id} does not list slot {n}/{slot}"));
                }
            }
        }
        if seen != 2 * self.links.len() {
            return Err(format!(
                "{} links but {seen} occupied slots",
                self.links.len()
            ));
        }
        for link in self.links.values() {
            if link.endpoints[0].node == link.endpoints[1].node {
                return Err(format!("link {} has both ends on one node", link.id));
            }
            for s in link.endpoints {
                if self.slots[s.node.0][s.slot] != Some(link.id) {
                    return Err(format!("link {} not held by its slot", link.id));
                }
            }
            if let Some(lifetime) = self.lifetime {
                if self.clock.saturating_sub(link.created_at) >= lifetime {
                    return Err(format!("link {} outlived its memory", link.id));
                }
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> StateTrace {
        StateTrace {
            t: self.clock,
            links: self
                .links
                .values()
                .map(|l| {
                    let e = l.span();
                    [e.lo.0, e.hi.0]
                })
                .collect(),
            free: self.free.clone(),
        }
    }
}
