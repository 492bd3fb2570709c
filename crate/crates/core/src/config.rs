//! Training and mimic-learner configuration.
//!
//! Configurations are stored as flat TOML: the trainer fields at top level and
//! the mimic-learner fields under a `[mimic]` table. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Steps per episode of the airspace-scale setting the defaults were tuned on.
pub const AIRSPACE_STEPS_PER_EPISODE: u64 = 1440;
/// Agent count of the airspace-scale setting.
pub const AIRSPACE_AGENTS: u64 = 7000;
/// Mimic refit period of the airspace-scale setting, in episodes.
pub const AIRSPACE_UPDATE_EVERY_EPISODES: u64 = 9;
/// The recency window is this fraction (1/20) of the refit period.
pub const RECENCY_DIVISOR: u64 = 20;

/// Which model supplies the bootstrap term of the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// The mimic ensemble, refit from scratch every `update_frequency_steps`.
    Mimic,
    /// A frozen copy of the online network (plain DQN baseline).
    FrozenCopy,
}

/// How refit datasets are drawn from the recency window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MimicSampling {
    Uniform,
    Prioritized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCriterion {
    SquaredError,
}

/// Which rows a sampled state contributes to the refit dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// One row for the action stored with the transition.
    TakenAction,
    /// One row per action, each labelled by the online network.
    AllActions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimicConfig {
    pub n_stages: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub shrinkage: f64,
    pub split_criterion: SplitCriterion,
    pub label_mode: LabelMode,
}

impl Default for MimicConfig {
    fn default() -> Self {
        Self {
            n_stages: 100,
            max_depth: 45,
            min_samples_split: 20,
            shrinkage: 0.1,
            split_criterion: SplitCriterion::SquaredError,
            label_mode: LabelMode::AllActions,
        }
    }
}

impl MimicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("mimic.max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "mimic.min_samples_split must be >= 2".into(),
            ));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidConfig(
                "mimic.shrinkage must lie in (0, 1]".into(),
            ));
        }
        if self.n_stages < 1 {
            return Err(Error::InvalidConfig("mimic.n_stages must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_decay_every_episodes: u64,
    pub epsilon_min: f64,
    /// Number of training episodes (M).
    pub episodes: u64,
    /// Global steps between mimic refits (T_u).
    pub update_frequency_steps: u64,
    /// Maximum age in global steps of transitions eligible for a refit (K).
    pub recency_window: u64,
    /// Replay buffer capacity (N).
    pub replay_capacity: usize,
    pub minibatch_size: usize,
    /// Refit datasets pool this many minibatches of states.
    pub mimic_dataset_minibatches: usize,
    /// Adam step size at the first episode.
    pub learning_rate: f64,
    /// When set, the step size is annealed linearly to this value at the last
    /// episode; otherwise it stays constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate_final: Option<f64>,
    pub priority_alpha: f64,
    /// Importance-sampling exponent at the first episode; annealed linearly
    /// to `priority_beta_final` at the last.
    pub priority_beta: f64,
    pub priority_beta_final: f64,
    pub priority_epsilon: f64,
    pub seed: u64,
    pub hidden_layers: Vec<usize>,
    pub grad_clip_norm: f64,
    /// TD updates start once the buffer holds this many transitions.
    pub warmup_transitions: usize,
    /// One TD update every this many stored transitions.
    pub train_every: u64,
    pub target: TargetKind,
    pub mimic_sampling: MimicSampling,
    /// States drawn from the recency window to score each refit.
    pub fidelity_probe_size: usize,
    /// Refit on the environment's full state enumeration instead of the
    /// recency window (tabular environments only).
    pub tile_state_space: bool,
    pub mimic: MimicConfig,
}

/// The airspace-scale defaults. Values it leaves open
/// (discount, minibatch, network, optimizer, boosting stages) are standard
/// choices.
pub fn default_config() -> TrainerConfig {
    let update = AIRSPACE_UPDATE_EVERY_EPISODES * AIRSPACE_STEPS_PER_EPISODE * AIRSPACE_AGENTS;
    TrainerConfig {
        gamma: 0.99,
        epsilon_start: 0.9,
        epsilon_decay: 0.01,
        epsilon_decay_every_episodes: 15,
        epsilon_min: 0.04,
        episodes: 1600,
        update_frequency_steps: update,
        recency_window: update / RECENCY_DIVISOR,
        replay_capacity: 10_000_000,
        minibatch_size: 64,
        mimic_dataset_minibatches: 200,
        learning_rate: 1e-3,
        learning_rate_final: None,
        priority_alpha: 0.6,
        priority_beta: 0.4,
        priority_beta_final: 1.0,
        priority_epsilon: 1e-6,
        seed: 0,
        hidden_layers: vec![256, 256],
        grad_clip_norm: 10.0,
        warmup_transitions: 640,
        train_every: 1,
        target: TargetKind::Mimic,
        mimic_sampling: MimicSampling::Uniform,
        fidelity_probe_size: 2048,
        tile_state_space: false,
        mimic: MimicConfig::default(),
    }
}

impl Default for TrainerConfig {
    fn default() -> Self {
        default_config()
    }
}

impl TrainerConfig {
    /// Converts an episode-based refit period into global steps and derives
    /// the recency window from it.
    pub fn with_episode_schedule(
        mut self,
        steps_per_episode: u64,
        agents: u64,
        update_every_episodes: u64,
    ) -> Self {
        self.update_frequency_steps = (update_every_episodes * steps_per_episode * agents).max(1);
        self.recency_window = (self.update_frequency_steps / RECENCY_DIVISOR)
            .max(self.minibatch_size as u64);
        self
    }

    /// Preset for the tabular oracle MDP.
    pub fn oracle_preset() -> Self {
        Self {
            episodes: 2000,
            update_frequency_steps: 500,
            recency_window: 2048,
            replay_capacity: 10_000,
            minibatch_size: 32,
            mimic_dataset_minibatches: 16,
            learning_rate: 1e-3,
            learning_rate_final: Some(1e-4),
            // Proportional priorities with partial importance correction pull
            // Q below Q* under stochastic termination; sample uniformly here.
            priority_alpha: 0.0,
            hidden_layers: vec![64, 64],
            warmup_transitions: 320,
            fidelity_probe_size: 2048,
            mimic: MimicConfig {
                n_stages: 100,
                max_depth: 12,
                min_samples_split: 20,
                shrinkage: 0.1,
                ..MimicConfig::default()
            },
            ..default_config()
        }
    }

    /// Preset for DCB-lite scenarios.
    pub fn dcb_preset() -> Self {
        Self {
            episodes: 200,
            epsilon_decay: 0.05,
            epsilon_decay_every_episodes: 2,
            update_frequency_steps: 2000,
            recency_window: 4000,
            replay_capacity: 20_000,
            minibatch_size: 32,
            mimic_dataset_minibatches: 32,
            learning_rate: 1e-3,
            hidden_layers: vec![64, 64],
            warmup_transitions: 320,
            fidelity_probe_size: 2048,
            mimic: MimicConfig {
                n_stages: 30,
                max_depth: 8,
                min_samples_split: 20,
                shrinkage: 0.3,
                ..MimicConfig::default()
            },
            ..default_config()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || self.epsilon_min < 0.0 {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.epsilon_min > self.epsilon_start {
            return bad("epsilon_min must not exceed epsilon_start");
        }
        if self.epsilon_decay < 0.0 || self.epsilon_decay_every_episodes == 0 {
            return bad("epsilon decay must be non-negative with a positive period");
        }
        if self.update_frequency_steps < 1 {
            return bad("update_frequency_steps must be >= 1");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size must be positive");
        }
        if self.recency_window < self.minibatch_size as u64 {
            return bad("recency_window must be >= minibatch_size");
        }
        if self.replay_capacity < self.minibatch_size {
            return bad("replay_capacity must be >= minibatch_size");
        }
        if self.mimic_dataset_minibatches == 0 || self.fidelity_probe_size == 0 {
            return bad("mimic dataset and fidelity probe sizes must be positive");
        }
        // a window smaller than one refit dataset would defer every refit
        if !self.tile_state_space
            && (self.recency_window < self.mimic_dataset_states() as u64
                || self.replay_capacity < self.mimic_dataset_states())
        {
            return bad("recency_window and replay_capacity must hold one mimic dataset \
                 (mimic_dataset_minibatches x minibatch_size states)");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if let Some(end) = self.learning_rate_final {
            if !(end > 0.0) || !end.is_finite() {
                return bad("learning_rate_final must be positive");
            }
        }
        if !(self.priority_alpha >= 0.0 && self.priority_beta >= 0.0 && self.priority_epsilon > 0.0)
        {
            return bad("priority_alpha, priority_beta >= 0 and priority_epsilon > 0 required");
        }
        if !(0.0..=1.0).contains(&self.priority_beta_final) {
            return bad("priority_beta_final must lie in [0, 1]");
        }
        if self.train_every == 0 {
            return bad("train_every must be >= 1");
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad("grad_clip_norm must be positive");
        }
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be positive");
        }
        self.mimic.validate()
    }

    /// Number of states pooled into one refit dataset.
    pub fn mimic_dataset_states(&self) -> usize {
        self.mimic_dataset_minibatches * self.minibatch_size
    }

    /// ε after `episodes_done` completed episodes.
    pub fn epsilon_at(&self, episodes_done: u64) -> f64 {
        let decays = (episodes_done / self.epsilon_decay_every_episodes) as f64;
        (self.epsilon_start - decays * self.epsilon_decay).max(self.epsilon_min)
    }

    fn progress(&self, episode: u64) -> f64 {
        let span = self.episodes.saturating_sub(1).max(1) as f64;
        (episode as f64 / span).min(1.0)
    }

    /// Importance-sampling exponent during episode `episode`.
    pub fn beta_at(&self, episode: u64) -> f64 {
        self.priority_beta + (self.priority_beta_final - self.priority_beta) * self.progress(episode)
    }

    /// Adam step size during episode `episode`.
    pub fn learning_rate_at(&self, episode: u64) -> f64 {
        match self.learning_rate_final {
            Some(end) => self.learning_rate + (end - self.learning_rate) * self.progress(episode),
            None => self.learning_rate,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}
