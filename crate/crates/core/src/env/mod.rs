//! Environments driven by the trainer.
//!
//! All environments are multi-agent in form: `step` takes one action per
//! agent and only agents reported by [`Environment::active`] before the call
//! produce transitions. Single-agent environments have `agent_count == 1`.

mod dcb;
mod oracle;

pub use dcb::{
    generate_scenario, occupancy_by_scan, Congestion, DcbEnv, DcbScenario, FlightPlan, Occupancy,
    SectorSpec, FEATURE_ROUTE_WIDTH, FEATURE_HOTSPOT_SLOTS,
};
pub use oracle::{OracleMdp, QTable};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::XRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_count: usize,
    pub agent_count: usize,
    pub episode_length: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0
            || self.action_count == 0
            || self.agent_count == 0
            || self.episode_length == 0
        {
            return Err(crate::Error::InvalidConfig(format!(
                "environment '{}' has a zero-sized spec field",
                self.name
            )));
        }
        Ok(())
    }
}

/// Result of one joint step. Vectors are indexed by agent; entries of agents
/// that were inactive before the step are meaningless.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_states: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// True when the agent's transition ends its trajectory (no bootstrap).
    pub terminals: Vec<bool>,
    /// The episode is over. Non-terminal agents at this point were truncated.
    pub done: bool,
}

/// Play-performance measures at the end of an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub final_hotspots: usize,
    pub avg_delay: f64,
    pub delayed_flights: usize,
    pub flights: usize,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns the joint state.
    fn reset(&mut self, rng: &mut XRng) -> Vec<Vec<f64>>;

    /// Agents that must act on the next `step`.
    fn active(&self) -> Vec<bool>;

    fn step(&mut self, actions: &[usize], rng: &mut XRng) -> Result<StepOutcome>;

    /// One name per state feature.
    fn feature_names(&self) -> Vec<String>;

    fn episode_metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics::default()
    }

    /// Every reachable state, for finite environments.
    fn enumerate_states(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Serialized form sufficient to rebuild the environment.
    fn describe(&self) -> String;
}
