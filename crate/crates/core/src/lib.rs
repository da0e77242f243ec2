//! Discrete time-step simulator for continuous entanglement generation in
//! quantum networks.
//!
//! Nodes hold a fixed number of quantum memories and, while idle, speculatively
//! generate entanglement links with partners chosen by a generation scheme.
//! Requests for end-to-end entanglement are served one at a time: a route is
//! fixed when the request is submitted, missing elementary links are generated
//! on demand, and the chain is collapsed by entanglement swapping. The adaptive
//! scheme shifts each node's partner distribution toward the neighbors it had
//! to link on demand for earlier requests.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] – immutable graphs, memory allocation and traffic matrices.
//! * [`netstate`] – memory slots and live links, expiration and swapping.
//! * [`schemes`] – partner-selection policies and the adaptive update rule.
//! * [`routing`] – link-preferring route selection and service plans.
//! * [`engine`] – the per-step loop, request queues and trial orchestration.
//! * [`metrics`] – latency aggregation, smoothing, analytic expectations, CSV.

pub mod engine;
pub mod metrics;
pub mod netstate;
pub mod routing;
pub mod schemes;
pub mod topology;

pub use engine::{
    build_queue, run_experiment, run_experiment_with_jobs, run_trial, run_trial_observed,
    Experiment, Request, SimConfig, SimError, TrialObserver, TrialResult,
};
pub use metrics::LatencySeries;
pub use netstate::{EntanglementLink, LinkId, NetworkState};
pub use routing::{find_route, Route, SwapOrder};
pub use schemes::{NeighborDistribution, SchemeConfig, SchemeKind, UsageRecord};
pub use topology::{Edge, NodeId, Topology, TopologyDocument, TrafficMatrix};
