//! Route selection that prefers edges already carrying a live link, and the
//! swap schedules used to collapse a linked route into one end-to-end link.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netstate::NetworkState;
use crate::topology::{Edge, NodeId};

/// Cost of an unlinked edge in units of the cost of a linked edge, so a
/// linked edge costs 1/1000 of an unlinked one.
pub const UNLINKED_EDGE_COST: u64 = 1000;
pub const LINKED_EDGE_COST: u64 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoutingError {
    #[error("request endpoints coincide at node {0}")]
    SameEndpoints(NodeId),
    #[error("no path from {0} to {1}")]
    Unreachable(NodeId, NodeId),
}

/// A fixed path plus the split of its edges into those with a live link at
/// decision time (`have`) and those without (`need`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub path: Vec<NodeId>,
    pub have: BTreeSet<Edge>,
    pub need: BTreeSet<Edge>,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn source(&self) -> NodeId {
        self.path[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.path.last().expect("route has two or more nodes")
    }

    /// Consecutive path edges in path order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.path.windows(2).map(|w| Edge::new(w[0], w[1]))
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.path.contains(&n)
    }
}

/// Cheapest path from `a` to `b` where edges carrying a live link are nearly
/// free. Ties go to fewer hops, then to the lexicographically smaller node
/// sequence.
pub fn find_route(state: &NetworkState<'_>, a: NodeId, b: NodeId) -> Result<Route, RoutingError> {
    if a == b {
        return Err(RoutingError::SameEndpoints(a));
    }
    let topology = state.topology();
    let linked = |u: NodeId, v: NodeId| state.find_link(u, v).is_some();

    // Label-setting search over (cost, hops, path). Equal-cost equal-hop
    // prefixes have equal length, so lexicographic order on the full path is
    // decided by the prefix and settling each node once is exact.
    let mut settled = vec![false; topology.n_nodes()];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, 0usize, vec![a])));
    while let Some(Reverse((cost, hops, path))) = heap.pop() {
        let u = *path.last().expect("non-empty");
        if settled[u.0] {
            continue;
        }
        settled[u.0] = true;
        if u == b {
            return Ok(classify(state, path));
        }
        for &v in topology.neighbors(u) {
            if settled[v.0] {
                continue;
            }
            let step = if linked(u, v) {
                LINKED_EDGE_COST
            } else {
                UNLINKED_EDGE_COST
            };
            let mut next = path.clone();
            next.push(v);
            heap.push(Reverse((cost + step, hops + 1, next)));
        }
    }
    Err(RoutingError::Unreachable(a, b))
}

/// Splits the edges of `path` by whether a live link spans them now.
pub fn classify(state: &NetworkState<'_>, path: Vec<NodeId>) -> Route {
    let mut have = BTreeSet::new();
    let mut need = BTreeSet::new();
    for w in path.windows(2) {
        let e = Edge::new(w[0], w[1]);
        if state.find_link(w[0], w[1]).is_some() {
            have.insert(e);
        } else {
            need.insert(e);
        }
    }
    Route { path, have, need }
}

/// Order in which adjacent link segments are merged by swapping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapOrder {
    /// Grow one segment from the source end.
    #[default]
    LeftToRight,
    /// Merge neighbouring pairs level by level.
    Balanced,
}

/// Merge of two adjacent path segments, given as index ranges into the path.
/// The swap happens at `path[left.1]`, which equals `path[right.0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapMerge {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

impl SwapMerge {
    pub fn via(&self) -> usize {
        self.left.1
    }

    pub fn merged(&self) -> (usize, usize) {
        (self.left.0, self.right.1)
    }
}

/// Swap schedule collapsing the segments delimited by `boundaries`
/// (strictly increasing path indices, first and last being the route ends)
/// into a single segment. Produces `boundaries.len() - 2` merges.
pub fn swap_sequence(boundaries: &[usize], order: SwapOrder) -> Vec<SwapMerge> {
    let mut segments: Vec<(usize, usize)> = boundaries.windows(2).map(|w| (w[0], w[1])).collect();
    let mut merges = Vec::new();
    match order {
        SwapOrder::LeftToRight => {
            let mut iter = segments.into_iter();
            if let Some(mut acc) = iter.next() {
                for seg in iter {
                    let m = SwapMerge {
                        left: acc,
                        right: seg,
                    };
                    merges.push(m);
                    acc = m.merged();
                }
            }
        }
        SwapOrder::Balanced => {
            while segments.len() > 1 {
                let mut next = Vec::with_capacity(segments.len().div_ceil(2));
                for pair in segments.chunks(2) {
                    if let [l, r] = pair {
                        let m = SwapMerge { left: *l, right: *r };
                        merges.push(m);
                        next.push(m.merged());
                    } else {
                        next.push(pair[0]);
                    }
                }
                segments = next;
            }
        }
    }
    merges
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServiceAction {
    /// Attempt the missing elementary link until it exists.
    Generate(Edge),
    /// Swap at `via`, joining the link ending at `left` with the one ending at `right`.
    Swap {
        via: NodeId,
        left: NodeId,
        right: NodeId,
    },
}

/// What it takes to serve `route`: the on-demand generations for each
/// missing edge, then the swaps collapsing the per-hop links.
pub fn service_plan(route: &Route, order: SwapOrder) -> Vec<ServiceAction> {
    let mut plan: Vec<ServiceAction> = route
        .edges()
        .filter(|e| route.need.contains(e))
        .map(ServiceAction::Generate)
        .collect();
    let boundaries: Vec<usize> = (0..route.path.len()).collect();
    plan.extend(swap_sequence(&boundaries, order).into_iter().map(|m| {
        ServiceAction::Swap {
            via: route.path[m.via()],
            left: route.path[m.left.0],
            right: route.path[m.right.1],
        }
    }));
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{make_bottleneck, Topology};

    fn n(i: usize) -> NodeId {
        NodeId(i)
    }

    fn nodes(ids: &[usize]) -> Vec<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn chain_route_splits_have_and_need() {
        let t = Topology::new(3, [(0, 1), (1, 2)], vec![2; 3]).unwrap();
        let mut s = NetworkState::new(&t, None);
        s.insert_link(n(0), n(1), 0);
        let r = find_route(&s, n(0), n(2)).unwrap();
        assert_eq!(r.path, nodes(&[0, 1, 2]));
        assert_eq!(r.have, [Edge::new(n(0), n(1))].into());
        assert_eq!(r.need, [Edge::new(n(1), n(2))].into());
    }

    #[test]
    fn bottleneck_route_without_links() {
        let t = make_bottleneck();
        let s = NetworkState::new(&t, None);
        let r = find_route(&s, n(0), n(5)).unwrap();
        assert_eq!(r.path, nodes(&[0, 3, 4, 5]));
        assert!(r.have.is_empty());
        assert_eq!(r.need.len(), 3);
    }

    #[test]
    fn linked_path_beats_lexicographic_order() {
        // Square 0-1-3 / 0-2-3; without links [0,1,3] wins on order.
        let t = Topology::new(4, [(0, 1), (0, 2), (1, 3), (2, 3)], vec![2; 4]).unwrap();
        let mut s = NetworkState::new(&t, None);
        assert_eq!(find_route(&s, n(0), n(3)).unwrap().path, nodes(&[0, 1, 3]));
        s.insert_link(n(0), n(2), 0);
        s.insert_link(n(2), n(3), 0);
        let r = find_route(&s, n(0), n(3)).unwrap();
        assert_eq!(r.path, nodes(&[0, 2, 3]));
        assert!(r.need.is_empty());
    }

    #[test]
    fn linked_detour_beats_short_unlinked_path() {
        // 0-3 direct but unlinked, 0-1-2-3 fully linked: 3/1000 < 1.
        let t = Topology::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)], vec![2; 4]).unwrap();
        let mut s = NetworkState::new(&t, None);
        for (a, b) in [(0, 1), (1, 2), (2, 3)] {
            s.insert_link(n(a), n(b), 0);
        }
        let r = find_route(&s, n(0), n(3)).unwrap();
        assert_eq!(r.path, nodes(&[0, 1, 2, 3]));
        assert!(r.need.is_empty());
    }

    #[test]
    fn same_endpoints_rejected() {
        let t = make_bottleneck();
        let s = NetworkState::new(&t, None);
        assert_eq!(find_route(&s, n(2), n(2)), Err(RoutingError::SameEndpoints(n(2))));
    }

    fn route(path: &[usize], need: &[(usize, usize)]) -> Route {
        let path = nodes(path);
        let need: BTreeSet<Edge> = need.iter().map(|&(a, b)| Edge::new(n(a), n(b))).collect();
        let have = path
            .windows(2)
            .map(|w| Edge::new(w[0], w[1]))
            .filter(|e| !need.contains(e))
            .collect();
        Route { path, have, need }
    }

    fn count(plan: &[ServiceAction]) -> (usize, usize) {
        let gens = plan.iter().filter(|a| matches!(a, ServiceAction::Generate(_))).count();
        (gens, plan.len() - gens)
    }

    #[test]
    fn plan_fully_linked_is_swaps_only() {
        let plan = service_plan(&route(&[0, 1, 2, 3], &[]), SwapOrder::LeftToRight);
        assert_eq!(count(&plan), (0, 2));
        assert_eq!(
            plan,
            vec![
                ServiceAction::Swap { via: n(1), left: n(0), right: n(2) },
                ServiceAction::Swap { via: n(2), left: n(0), right: n(3) },
            ]
        );
    }

    #[test]
    fn plan_generates_before_swapping() {
        let plan = service_plan(&route(&[0, 1, 2], &[(1, 2)]), SwapOrder::LeftToRight);
        assert_eq!(plan[0], ServiceAction::Generate(Edge::new(n(1), n(2))));
        assert_eq!(count(&plan), (1, 1));
    }

    #[test]
    fn plan_length_four_hops_two_missing() {
        for order in [SwapOrder::LeftToRight, SwapOrder::Balanced] {
            let plan = service_plan(&route(&[0, 1, 2, 3, 4], &[(1, 2), (3, 4)]), order);
            assert_eq!(count(&plan), (2, 3));
        }
    }

    #[test]
    fn balanced_schedule_pairs_neighbours() {
        let merges = swap_sequence(&[0, 1, 2, 3, 4], SwapOrder::Balanced);
        let vias: Vec<usize> = merges.iter().map(SwapMerge::via).collect();
        assert_eq!(vias, vec![1, 3, 2]);
        assert_eq!(merges.last().unwrap().merged(), (0, 4));
        let odd = swap_sequence(&[0, 2, 3, 5], SwapOrder::Balanced);
        assert_eq!(odd.iter().map(SwapMerge::via).collect::<Vec<_>>(), vec![2, 3]);
        assert!(swap_sequence(&[0, 3], SwapOrder::LeftToRight).is_empty());
    }
}
