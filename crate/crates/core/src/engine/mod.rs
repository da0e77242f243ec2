//! Discrete-time simulation of one request queue over a network, and the
//! multi-trial driver.

mod config;
mod generation;
mod queue;

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    ConfigError, SimConfig, DEFAULT_MAX_STEPS, DEFAULT_MEMORY_LIFETIME, DEFAULT_P_GEN,
    DEFAULT_P_SWAP, DEFAULT_QUEUE_INTERVAL, DEFAULT_QUEUE_LENGTH, DEFAULT_TRIALS,
};
pub use generation::{continuous_generation_step, GenerationPolicy};
pub use queue::{build_queue, Request};

use crate::metrics::LatencySeries;
use crate::netstate::{LinkId, NetworkState};
use crate::routing::{find_route, swap_sequence, Route, RoutingError};
use crate::schemes::{usage_from_route, UsageRecord};
use crate::topology::{NodeId, Topology, TrafficMatrix};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("traffic matrix covers {traffic} nodes but the topology has {topology}")]
    TrafficSize { traffic: usize, topology: usize },
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("trial {trial} hit the step cap of {max_steps} after completing {completed} requests")]
    StepCap {
        trial: usize,
        max_steps: u64,
        completed: usize,
        /// Latencies of the requests that did complete.
        partial: Vec<u64>,
    },
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
}

/// Hooks called by [`run_trial_observed`]. All default to no-ops.
pub trait TrialObserver {
    /// A request was submitted and its route fixed.
    fn on_route(&mut self, _t: u64, _request: &Request, _route: &Route, _state: &NetworkState<'_>) {}
    fn on_complete(&mut self, _t: u64, _request: &Request, _policy: &GenerationPolicy) {}
    /// End of step `t`, after continuous generation.
    fn on_step(&mut self, _t: u64, _active: Option<&Request>, _state: &NetworkState<'_>) {}
}

impl TrialObserver for () {}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub requests: Vec<Request>,
    /// Step at which the last request completed.
    pub last_step: u64,
}

impl TrialResult {
    pub fn latencies(&self) -> Vec<u64> {
        self.requests
            .iter()
            .map(|r| r.latency().expect("completed trial"))
            .collect()
    }
}

/// Seed of trial `trial` under master seed `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

pub fn run_trial(
    config: &SimConfig,
    topology: &Topology,
    traffic: &TrafficMatrix,
    trial: usize,
) -> Result<TrialResult, SimError> {
    run_trial_observed(config, topology, traffic, trial, &mut ())
}

enum Progress {
    Pending,
    Completed,
}

/// Per-step scratch for the active request.
struct Service<'a> {
    config: &'a SimConfig,
    /// Nodes that already acted this step.
    spent: Vec<bool>,
}

impl Service<'_> {
    /// Greedy cover of the path by live links: from each covered position,
    /// jump along the link reaching farthest down the path. Returns the
    /// segments `(from, to, link)` and the start indices of uncovered hops.
    fn cover(state: &NetworkState<'_>, path: &[NodeId]) -> (Vec<(usize, usize, LinkId)>, Vec<usize>) {
        let position: BTreeMap<NodeId, usize> =
            path.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut segments = Vec::new();
        let mut gaps = Vec::new();
        let mut i = 0;
        while i + 1 < path.len() {
            let best = state
                .links_at(path[i])
                .filter_map(|l| {
                    let far = l.span().other(path[i])?;
                    let j = *position.get(&far)?;
                    (j > i).then_some((j, l.created_at, l.id))
                })
                .min_by_key(|&(j, created, id)| (std::cmp::Reverse(j), created, id));
            match best {
                Some((j, _, id)) => {
                    segments.push((i, j, id));
                    i = j;
                }
                None => {
                    gaps.push(i);
                    i += 1;
                }
            }
        }
        (segments, gaps)
    }

    fn advance(
        &mut self,
        state: &mut NetworkState<'_>,
        route: &Route,
        rng: &mut ChaCha8Rng,
    ) -> Progress {
        let path = &route.path;
        let (segments, gaps) = Self::cover(state, path);

        if gaps.is_empty() {
            if path.iter().any(|n| self.spent[n.0]) {
                return Progress::Pending;
            }
            for n in path {
                self.spent[n.0] = true;
            }
            let mut live: BTreeMap<(usize, usize), LinkId> =
                segments.iter().map(|&(i, j, id)| ((i, j), id)).collect();
            let mut boundaries: Vec<usize> = segments.iter().map(|s| s.0).collect();
            boundaries.push(path.len() - 1);
            for m in swap_sequence(&boundaries, self.config.swap_order) {
                let (Some(l), Some(r)) = (live.remove(&m.left), live.remove(&m.right)) else {
                    continue;
                };
                let out = state
                    .try_swap(l, r, path[m.via()], self.config.p_swap, rng)
                    .expect("segments meet at the via node");
                if let Some(id) = out {
                    live.insert(m.merged(), id);
                }
            }
            if let Some(id) = live.remove(&(0, path.len() - 1)) {
                state.release(id).expect("end-to-end link is live");
                return Progress::Completed;
            }
            return Progress::Pending;
        }

        // Missing hops are attempted in parallel, one attempt per hop.
        let mut protected: Vec<LinkId> = segments.iter().map(|s| s.2).collect();
        let mut acted = Vec::new();
        for i in gaps {
            let (u, v) = (path[i], path[i + 1]);
            if self.spent[u.0] || self.spent[v.0] {
                continue;
            }
            acted.extend([u, v]);
            for n in [u, v] {
                if state.free_slots(n) == 0 {
                    if let Some(old) = state.oldest_link_at(n, &protected) {
                        state.release(old).expect("live link");
                    }
                }
            }
            if state.free_slots(u) == 0 || state.free_slots(v) == 0 {
                continue;
            }
            if let Some(id) = state
                .try_generate(u, v, self.config.p_gen, rng)
                .expect("route hops are physical edges")
            {
                protected.push(id);
            }
        }
        for n in acted {
            self.spent[n.0] = true;
        }
        Progress::Pending
    }
}

/// Runs one trial, reporting to `observer`. The trial's random stream,
/// request queue included, is fixed by `(config.seed, trial)`.
pub fn run_trial_observed(
    config: &SimConfig,
    topology: &Topology,
    traffic: &TrafficMatrix,
    trial: usize,
    observer: &mut impl TrialObserver,
) -> Result<TrialResult, SimError> {
    config.validate()?;
    if traffic.n_nodes() != topology.n_nodes() {
        return Err(SimError::TrafficSize {
            traffic: traffic.n_nodes(),
            topology: topology.n_nodes(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial));
    let mut queue = build_queue(traffic, config.queue_length, config.queue_interval, &mut rng);
    let mut policy = GenerationPolicy::new(topology, &config.scheme).map_err(ConfigError::from)?;
    let mut state = NetworkState::new(topology, config.memory_lifetime);
    let mut service = Service {
        config,
        spent: vec![false; topology.n_nodes()],
    };
    let mut next = 0;
    let mut active: Option<(usize, Route)> = None;
    let mut busy = vec![false; topology.n_nodes()];

    for t in 0..config.max_steps {
        state.expire(t);
        service.spent.fill(false);

        loop {
            if active.is_none() && next < queue.len() && queue[next].scheduled_at <= t {
                let req = &mut queue[next];
                let route = find_route(&state, req.pair.lo, req.pair.hi)?;
                req.submitted_at = Some(t);
                req.route = Some(route.clone());
                observer.on_route(t, req, &route, &state);
                active = Some((next, route));
                next += 1;
            }
            let Some((idx, route)) = &active else { break };
            match service.advance(&mut state, route, &mut rng) {
                Progress::Pending => break,
                Progress::Completed => {
                    queue[*idx].completed_at = Some(t);
                    for &n in &route.path {
                        let (used, created) = usage_from_route(&route.path, &route.have, n);
                        let usage = UsageRecord::new(topology, n, used, created)
                            .expect("route neighbors are physical neighbors");
                        policy.record_usage(&usage);
                    }
                    observer.on_complete(t, &queue[*idx], &policy);
                    active = None;
                }
            }
        }

        busy.copy_from_slice(&service.spent);
        if let Some((_, route)) = &active {
            for n in &route.path {
                busy[n.0] = true;
            }
        }
        continuous_generation_step(&mut state, &policy, &busy, config.p_gen, &mut rng);
        observer.on_step(t, active.as_ref().map(|(i, _)| &queue[*i]), &state);

        if active.is_none() && next == queue.len() {
            return Ok(TrialResult {
                trial,
                requests: queue,
                last_step: t,
            });
        }
    }
    Err(SimError::StepCap {
        trial,
        max_steps: config.max_steps,
        completed: queue.iter().filter(|r| r.completed_at.is_some()).count(),
        partial: queue.iter().filter_map(Request::latency).collect(),
    })
}

/// Outcome of all trials of one configuration.
#[derive(Debug)]
pub struct Experiment {
    pub config: SimConfig,
    pub trials: Vec<TrialResult>,
    /// Trials abandoned at the step cap; excluded from `series`.
    pub failed: Vec<SimError>,
    pub series: LatencySeries,
}

pub fn run_experiment(
    config: &SimConfig,
    topology: &Topology,
    traffic: &TrafficMatrix,
) -> Result<Experiment, SimError> {
    run_experiment_with_jobs(config, topology, traffic, None)
}

/// Runs `config.trials` trials on `jobs` threads (all cores when `None`).
/// Output does not depend on the thread count.
pub fn run_experiment_with_jobs(
    config: &SimConfig,
    topology: &Topology,
    traffic: &TrafficMatrix,
    jobs: Option<usize>,
) -> Result<Experiment, SimError> {
    config.validate()?;
    let run = || -> Vec<Result<TrialResult, SimError>> {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, topology, traffic, i))
            .collect()
    };
    let outcomes = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    };
    let mut trials = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => trials.push(t),
            Err(e @ SimError::StepCap { .. }) => failed.push(e),
            Err(e) => return Err(e),
        }
    }
    if trials.is_empty() {
        return Err(SimError::AllTrialsFailed(config.trials));
    }
    let latencies: Vec<Vec<u64>> = trials.iter().map(TrialResult::latencies).collect();
    let series = LatencySeries::from_trials(&latencies).expect("equal-length non-empty trials");
    Ok(Experiment {
        config: config.clone(),
        trials,
        failed,
        series,
    })
}
