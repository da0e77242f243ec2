use rand::Rng;

use crate::netstate::NetworkState;
use crate::schemes::{
    GlobalPartnerSampler, NeighborDistribution, SchemeConfig, SchemeError, SchemeKind, UsageRecord,
};
use crate::topology::{NodeId, Topology};

/// How idle nodes pick partners for continuous generation.
#[derive(Debug, Clone)]
pub enum GenerationPolicy {
    /// Physical neighbors only, with per-node distributions updated after
    /// every request the node serves.
    Adaptive {
        alpha: f64,
        distributions: Vec<NeighborDistribution>,
    },
    /// Any other node; success needs every hop of a shortest path.
    Global(GlobalPartnerSampler),
}

impl GenerationPolicy {
    pub fn new(topology: &Topology, scheme: &SchemeConfig) -> Result<Self, SchemeError> {
        scheme.validate()?;
        Ok(match scheme.kind {
            SchemeKind::Adaptive => GenerationPolicy::Adaptive {
                alpha: scheme.alpha,
                distributions: topology
                    .nodes()
                    .map(|n| NeighborDistribution::init_uniform(n, topology))
                    .collect::<Result<_, _>>()?,
            },
            SchemeKind::UniformGlobal | SchemeKind::PowerLawGlobal => {
                GenerationPolicy::Global(GlobalPartnerSampler::new(topology, scheme))
            }
        })
    }

    pub fn distribution(&self, n: NodeId) -> Option<&NeighborDistribution> {
        match self {
            GenerationPolicy::Adaptive { distributions, .. } => distributions.get(n.0),
            GenerationPolicy::Global(_) => None,
        }
    }

    pub fn choose_partner(&self, n: NodeId, rng: &mut impl Rng) -> NodeId {
        match self {
            GenerationPolicy::Adaptive { distributions, .. } => {
                distributions[n.0].choose_partner(rng)
            }
            GenerationPolicy::Global(sampler) => sampler.choose(n, rng),
        }
    }

    /// Success probability of one attempt between `a` and `b`.
    pub fn attempt_probability(&self, a: NodeId, b: NodeId, p_gen: f64) -> f64 {
        match self {
            GenerationPolicy::Adaptive { .. } => p_gen,
            GenerationPolicy::Global(sampler) => p_gen.powi(sampler.hop_distance(a, b) as i32),
        }
    }

    /// Feeds a served request back into the owner's distribution. Global
    /// schemes ignore it.
    pub fn record_usage(&mut self, usage: &UsageRecord) {
        if let GenerationPolicy::Adaptive {
            alpha,
            distributions,
        } = self
        {
            distributions[usage.owner().0].adapt_in_place(usage, *alpha);
        }
    }
}

/// One step of continuous generation. Nodes act in index order; a node acts
/// when it is not busy and has a free slot. It draws a partner and, if the
/// partner is also idle with a free slot, makes one attempt. Returns the
/// number of links created.
pub fn continuous_generation_step(
    state: &mut NetworkState<'_>,
    policy: &GenerationPolicy,
    busy: &[bool],
    p_gen: f64,
    rng: &mut impl Rng,
) -> usize {
    let mut created = 0;
    for n in state.topology().nodes() {
        if busy[n.0] || state.free_slots(n) == 0 {
            continue;
        }
        let partner = policy.choose_partner(n, rng);
        if busy[partner.0] || state.free_slots(partner) == 0 {
            continue;
        }
        let p = policy.attempt_probability(n, partner, p_gen);
        if state
            .try_generate_between(n, partner, p, rng)
            .expect("both ends checked")
            .is_some()
        {
            created += 1;
        }
    }
    created
}
