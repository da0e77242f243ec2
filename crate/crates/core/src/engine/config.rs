use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::SwapOrder;
use crate::schemes::{SchemeConfig, SchemeError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} = {value} is not a probability")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("queue interval must be at least 1 step")]
    ZeroInterval,
    #[error("queue length must be at least 1")]
    EmptyQueue,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("memory lifetime must be at least 1 step")]
    ZeroLifetime,
    #[error("step cap must be positive")]
    ZeroStepCap,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// Parameters of one experiment. Node count and memories live in the
/// [`Topology`](crate::topology::Topology).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Steps a stored link survives; `None` keeps links forever.
    pub memory_lifetime: Option<u64>,
    /// Success probability of one elementary generation attempt.
    pub p_gen: f64,
    /// Success probability of one swap.
    pub p_swap: f64,
    /// Steps between scheduled requests; also the initial generation period.
    pub queue_interval: u64,
    pub queue_length: usize,
    pub scheme: SchemeConfig,
    pub trials: usize,
    /// Master seed; per-trial seeds derive from it.
    pub seed: u64,
    pub swap_order: SwapOrder,
    /// A trial still running at this step is abandoned.
    pub max_steps: u64,
}

pub const DEFAULT_MEMORY_LIFETIME: u64 = 1000;
pub const DEFAULT_P_GEN: f64 = 0.01;
pub const DEFAULT_P_SWAP: f64 = 1.0;
pub const DEFAULT_QUEUE_INTERVAL: u64 = 500;
pub const DEFAULT_QUEUE_LENGTH: usize = 100;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            memory_lifetime: Some(DEFAULT_MEMORY_LIFETIME),
            p_gen: DEFAULT_P_GEN,
            p_swap: DEFAULT_P_SWAP,
            queue_interval: DEFAULT_QUEUE_INTERVAL,
            queue_length: DEFAULT_QUEUE_LENGTH,
            scheme: SchemeConfig::adaptive(0.1),
            trials: DEFAULT_TRIALS,
            seed: 0,
            swap_order: SwapOrder::LeftToRight,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("p_gen", self.p_gen), ("p_swap", self.p_swap)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::NotAProbability { name, value });
            }
        }
        if self.queue_interval == 0 {
            return Err(ConfigError::ZeroInterval);
        }
        if self.queue_length == 0 {
            return Err(ConfigError::EmptyQueue);
        }
        if self.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        if self.memory_lifetime == Some(0) {
            return Err(ConfigError::ZeroLifetime);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::ZeroStepCap);
        }
        self.scheme.validate()?;
        Ok(())
    }
}
