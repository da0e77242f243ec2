use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::routing::Route;
use crate::topology::{Edge, TrafficMatrix};

/// One end-to-end entanglement demand. Served from `pair.lo` to `pair.hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub index: usize,
    pub pair: Edge,
    pub scheduled_at: u64,
    pub submitted_at: Option<u64>,
    pub completed_at: Option<u64>,
    /// Route fixed at submission.
    pub route: Option<Route>,
}

impl Request {
    /// Steps between submission and completion.
    pub fn latency(&self) -> Option<u64> {
        Some(self.completed_at? - self.submitted_at?)
    }
}

/// Draws `length` requests with pair probabilities proportional to their
/// traffic weight. Request `n` is scheduled at `interval * (n + 1)`; the first
/// interval is the initial generation period.
pub fn build_queue(
    traffic: &TrafficMatrix,
    length: usize,
    interval: u64,
    rng: &mut impl Rng,
) -> Vec<Request> {
    let pairs = traffic.pairs();
    let index = WeightedIndex::new(pairs.iter().map(|(_, w)| *w))
        .expect("traffic matrix has a positive entry");
    (0..length)
        .map(|n| Request {
            index: n,
            pair: pairs[index.sample(rng)].0,
            scheduled_at: interval * (n as u64 + 1),
            submitted_at: None,
            completed_at: None,
            route: None,
        })
        .collect()
}
