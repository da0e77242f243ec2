//! Closed-form estimates of link supply under uniform neighbor choice.

use thiserror::Error;

use crate::topology::{NodeId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("{0} and {1} are not neighbors")]
    NotAdjacent(NodeId, NodeId),
    #[error("node {0} has no neighbors")]
    Isolated(NodeId),
}

/// Expected links formed on edge `(n, k)` in one step when every node picks a
/// neighbor uniformly and attempts with success `p_gen`.
pub fn expected_pair_links_per_step(
    topology: &Topology,
    n: NodeId,
    k: NodeId,
    p_gen: f64,
) -> Result<f64, AnalyticsError> {
    if !topology.are_adjacent(n, k) {
        return Err(AnalyticsError::NotAdjacent(n, k));
    }
    let (dn, dk) = (topology.degree(n) as f64, topology.degree(k) as f64);
    Ok(p_gen * (dn + dk) / (dn * dk))
}

/// Expected links `n` forms with all its neighbors in one step.
pub fn expected_node_links_per_step(
    topology: &Topology,
    n: NodeId,
    p_gen: f64,
) -> Result<f64, AnalyticsError> {
    if topology.degree(n) == 0 {
        return Err(AnalyticsError::Isolated(n));
    }
    let inbound: f64 = topology
        .neighbors(n)
        .iter()
        .map(|&k| 1.0 / topology.degree(k) as f64)
        .sum();
    Ok(p_gen * (1.0 + inbound))
}

/// Expected links shared by `n` and `k` after `interval` steps of free
/// generation, capped by the time `n` needs to fill `memories` slots.
pub fn expected_links_over_interval(
    topology: &Topology,
    n: NodeId,
    k: NodeId,
    p_gen: f64,
    memories: f64,
    interval: f64,
) -> Result<f64, AnalyticsError> {
    let per_step = expected_pair_links_per_step(topology, n, k, p_gen)?;
    let node_rate = expected_node_links_per_step(topology, n, p_gen)?;
    let fill_time = if node_rate > 0.0 {
        memories / node_rate
    } else {
        f64::INFINITY
    };
    Ok(per_step * interval.min(fill_time))
}
