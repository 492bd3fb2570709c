//! Deep Q-learning where the target network is replaced by an interpretable
//! gradient-boosted regression-tree mimic learner, refit from scratch on recent
//! replay data and queried for every bootstrap target.
//!
//! The crate is organised by role:
//!
//! - [`config`], [`rng`], [`transition`]: shared types, presets and the seeded
//!   random-stream contract.
//! - [`replay`]: prioritized experience replay with a recency view.
//! - [`qnet`]: the online multilayer-perceptron Q-network.
//! - [`mimic`]: per-action boosted forests with additive feature contributions.
//! - [`env`]: a tabular oracle MDP and DCB-lite, a small multi-agent
//!   demand-capacity-balancing simulator.
//! - [`trainer`]: the alternating Q-network / mimic training loop.
//! - [`metrics`]: fidelity and play-performance measures.
//! - [`explain`]: local, global and training-evolution explanations.
//! - [`cli`]: the `xdqn` command-line front end.
//!
//! Runnable walkthroughs of each capability live under `examples/`.


pub mod cli;
pub mod config;
pub mod env;

pub mod error;
pub mod explain;
pub mod metrics;


pub mod mimic;
pub mod qnet;
pub mod replay;
pub mod rng;
pub mod trainer;

pub mod transition;

pub use config::{default_config, LabelMode, MimicConfig, TargetKind, TrainerConfig};
pub use error::{Error, Result};
pub use mimic::{ContributionVector, MimicEnsemble};
pub use qnet::QNetwork;
pub use replay::ReplayBuffer;
pub use rng::{seeded_rng, XRng};
pub use transition::Transition;
