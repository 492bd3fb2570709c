//! The alternating training loop.
//!
//! The online network θ learns from prioritized replay against targets
//! `r + γ max_a Q̂(s', a)`, where `Q̂` is the current mimic ensemble (or a
//! frozen copy of θ for the plain baseline). Every `update_frequency_steps`
//! global steps the mimic is refit from scratch on states drawn from the last
//! `recency_window` steps, labelled by θ. The global step counter advances
//! once per agent transition; all agents share θ and the replay buffer.

mod log;

pub use log::{format_log_line, write_metrics_log, METRICS_HEADER};

use rand::Rng;

use crate::config::{LabelMode, MimicSampling, TargetKind, TrainerConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::metrics::{fidelity_report, EpisodeStats, FidelityReport};
use crate::mimic::{FitReport, MimicEnsemble, MimicSample};
use crate::qnet::{argmax, QNetwork, TdSample};
use crate::replay::{PriorityParams, ReplayBuffer};
use crate::rng::{seeded_stream, streams, XRng};
use crate::transition::Transition;

/// Anything that can supply `max_a Q(s, a)` for bootstrapping.
pub trait ActionValues {
    fn action_values(&self, state: &[f64]) -> Result<Vec<f64>>;
}

impl ActionValues for MimicEnsemble {
    fn action_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.predict_all(state)
    }
}

impl ActionValues for QNetwork {
    fn action_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward(state)
    }
}

/// `r` for terminal transitions, otherwise `r + γ max_a Q̂(s', a)`.
pub fn compute_target<M: ActionValues + ?Sized>(
    t: &Transition,
    model: &M,
    gamma: f64,
) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let best = model
        .action_values(&t.next_state)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(t.reward + gamma * best)
}

/// ε-greedy action for every active agent from the shared network.
/// Inactive agents get action 0 and consume no randomness.
pub fn act_shared(
    joint_state: &[Vec<f64>],
    active: &[bool],
    epsilon: f64,
    qnet: &QNetwork,
    rng: &mut XRng,
) -> Result<Vec<usize>> {
    if joint_state.len() != active.len() {
        return Err(Error::DimensionMismatch {
            expected: joint_state.len(),
            got: active.len(),
        });
    }
    joint_state
        .iter()
        .zip(active)
        .map(|(s, &on)| {
            if on {
                qnet.epsilon_greedy_action(s, epsilon, rng)
            } else {
                Ok(0)
            }
        })
        .collect()
}

/// Policy used in exploitation episodes.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    QNet(&'a QNetwork),
    Mimic(&'a MimicEnsemble),
}

impl Policy<'_> {
    fn action_count(&self) -> usize {
        match self {
            Policy::QNet(q) => q.action_count(),
            Policy::Mimic(m) => m.action_count(),
        }
    }

    fn act(&self, state: &[f64], epsilon: f64, rng: &mut XRng) -> Result<usize> {
        if rng.gen::<f64>() < epsilon {
            return Ok(rng.gen_range(0..self.action_count()));
        }
        match self {
            Policy::QNet(q) => q.greedy_action(state),
            Policy::Mimic(m) => Ok(m.best_action(state)?.0),
        }
    }
}

/// Data handed to observers after every target refresh.
pub struct RefitEvent<'a> {
    pub step: u64,
    pub episode: u64,
    /// The step at which this refresh was scheduled.
    pub scheduled_at: u64,
    pub qnet: &'a QNetwork,
    /// `None` for the frozen-copy baseline.
    pub mimic: Option<&'a MimicEnsemble>,
    pub fit: Option<&'a FitReport>,
    pub fidelity: Option<&'a FidelityReport>,
    pub dataset_states: &'a [Vec<f64>],
}

pub trait TrainObserver {
    fn on_refit(&mut self, _event: &RefitEvent<'_>) -> Result<()> {
        Ok(())
    }

    fn on_episode(&mut self, _stats: &EpisodeStats) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Keeps a copy of every fitted ensemble.
#[derive(Default)]
pub struct KeepSnapshots {
    pub snapshots: Vec<MimicEnsemble>,
}

impl TrainObserver for KeepSnapshots {
    fn on_refit(&mut self, event: &RefitEvent<'_>) -> Result<()> {
        if let Some(m) = event.mimic {
            self.snapshots.push(m.clone());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub step: u64,
    pub episode: u64,
    pub scheduled_at: u64,
    pub fidelity: Option<FidelityReport>,
    pub train_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub qnet: QNetwork,
    /// The last fitted mimic, or the zero sentinel if none was fitted.
    pub mimic: MimicEnsemble,
    pub snapshots: Vec<SnapshotRecord>,
    pub log: Vec<EpisodeStats>,
    /// Scheduled refresh steps that had to wait for the recency window.
    pub deferrals: Vec<u64>,
    pub global_steps: u64,
    pub td_updates: u64,
    pub skipped_non_finite: u64,
}

struct Loop<'a> {
    cfg: &'a TrainerConfig,
    qnet: QNetwork,
    mimic: MimicEnsemble,
    frozen: QNetwork,
    buffer: ReplayBuffer,
    replay_rng: XRng,
    probe_rng: XRng,
    step: u64,
    pending: Option<u64>,
    deferral_logged: bool,
    deferrals: Vec<u64>,
    snapshots: Vec<SnapshotRecord>,
    tiles: Option<Vec<Vec<f64>>>,
    last_fidelity: Option<FidelityReport>,
    last_refit: Option<u64>,
    td_updates: u64,
}

impl Loop<'_> {
    fn td_update(&mut self, lr: f64) -> Result<f64> {
        let cfg = self.cfg;
        let batch = self
            .buffer
            .sample_prioritized(cfg.minibatch_size, &mut self.replay_rng)?;
        let mut targets = Vec::with_capacity(batch.len());
        for s in &batch {
            targets.push(match cfg.target {
                TargetKind::Mimic => compute_target(s.transition, &self.mimic, cfg.gamma)?,
                TargetKind::FrozenCopy => compute_target(s.transition, &self.frozen, cfg.gamma)?,
            });
        }
        let mut errors = Vec::with_capacity(batch.len());
        for (s, y) in batch.iter().zip(&targets) {
            let q = self.qnet.forward(&s.transition.state)?[s.transition.action];
            errors.push(y - q);
        }
        let samples: Vec<TdSample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(s, &target)| TdSample {
                state: &s.transition.state,
                action: s.transition.action,
                target,
                weight: s.weight,
            })
            .collect();
        let loss = self.qnet.td_step(&samples, lr)?;
        let indices: Vec<_> = batch.iter().map(|s| s.index).collect();
        drop(samples);
        drop(batch);
        self.buffer.update_priorities(&indices, &errors);
        self.td_updates += 1;
        Ok(loss)
    }

    /// Refit inputs as (state, stored action). Tiled states carry no action
    /// and are always labelled for every action.
    fn dataset(&mut self) -> Result<Option<Vec<(Vec<f64>, usize)>>> {
        if let Some(tiles) = &self.tiles {
            return Ok(Some(tiles.iter().map(|s| (s.clone(), 0)).collect()));
        }
        let cfg = self.cfg;
        let n = cfg.mimic_dataset_states();
        if self.buffer.window_len(cfg.recency_window, self.step) < n {
            return Ok(None);
        }
        let drawn = match cfg.mimic_sampling {
            MimicSampling::Uniform => self.buffer.sample_recent_uniform(
                n,
                cfg.recency_window,
                self.step,
                &mut self.replay_rng,
            )?,
            MimicSampling::Prioritized => self.buffer.sample_recent_prioritized(
                n,
                cfg.recency_window,
                self.step,
                &mut self.replay_rng,
            )?,
        };
        Ok(Some(drawn.into_iter().map(|t| (t.state.clone(), t.action)).collect()))
    }

    fn label(&self, data: &[(Vec<f64>, usize)]) -> Result<Vec<MimicSample>> {
        let k = self.qnet.action_count();
        let all = self.tiles.is_some() || self.cfg.mimic.label_mode == LabelMode::AllActions;
        let mut rows = Vec::with_capacity(data.len() * if all { k } else { 1 });
        for (s, taken) in data {
            let q = self.qnet.forward(s)?;
            if all {
                rows.extend(q.into_iter().enumerate().map(|(action, target)| MimicSample {
                    state: s.clone(),
                    action,
                    target,
                }));
            } else {
                rows.push(MimicSample {
                    state: s.clone(),
                    action: *taken,
                    target: q[*taken],
                });
            }
        }
        Ok(rows)
    }

    fn probe_states(&mut self, fallback: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let cfg = self.cfg;
        let available = self.buffer.window_len(cfg.recency_window, self.step);
        let n = cfg.fidelity_probe_size.min(available);
        if n == 0 {
            return Ok(fallback.to_vec());
        }
        Ok(self
            .buffer
            .sample_recent_uniform(n, cfg.recency_window, self.step, &mut self.probe_rng)?
            .into_iter()
            .map(|t| t.state.clone())
            .collect())
    }

    /// Attempts the pending refresh; returns true when it happened.
    fn try_refit(&mut self, episode: u64, observer: &mut dyn TrainObserver) -> Result<bool> {
        let Some(scheduled_at) = self.pending else {
            return Ok(false);
        };
        let cfg = self.cfg;
        if cfg.target == TargetKind::FrozenCopy {
            self.frozen = self.qnet.frozen_copy();
            self.pending = None;
            self.last_refit = Some(self.step);
            observer.on_refit(&RefitEvent {
                step: self.step,
                episode,
                scheduled_at,
                qnet: &self.qnet,
                mimic: None,
                fit: None,
                fidelity: None,
                dataset_states: &[],
            })?;
            self.snapshots.push(SnapshotRecord {
                step: self.step,
                episode,
                scheduled_at,
                fidelity: None,
                train_mse: None,
            });
            return Ok(true);
        }
        let Some(data) = self.dataset()? else {
            if !self.deferral_logged {
                self.deferrals.push(scheduled_at);
                self.deferral_logged = true;
            }
            return Ok(false);
        };
        let rows = self.label(&data)?;
        let states: Vec<Vec<f64>> = data.into_iter().map(|(s, _)| s).collect();
        let (mut mimic, fit) = MimicEnsemble::fit(
            &rows,
            self.qnet.input_dim(),
            self.qnet.action_count(),
            &cfg.mimic,
        )?;
        mimic.set_fitted_at(self.step);
        let probe = self.probe_states(&states)?;
        let fidelity = fidelity_report(&probe, &self.qnet, &mimic, self.step)?;
        observer.on_refit(&RefitEvent {
            step: self.step,
            episode,
            scheduled_at,
            qnet: &self.qnet,
            mimic: Some(&mimic),
            fit: Some(&fit),
            fidelity: Some(&fidelity),
            dataset_states: &states,
        })?;
        self.snapshots.push(SnapshotRecord {
            step: self.step,
            episode,
            scheduled_at,
            fidelity: Some(fidelity.clone()),
            train_mse: Some(fit.train_mse),
        });
        self.mimic = mimic;
        self.last_fidelity = Some(fidelity);
        self.last_refit = Some(self.step);
        self.pending = None;
        self.deferral_logged = false;
        Ok(true)
    }
}

/// Runs `cfg.episodes` episodes of training.
pub fn train(
    env: &mut dyn Environment,
    cfg: &TrainerConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let spec = env.spec().clone();
    spec.validate()?;
    let tiles = if cfg.tile_state_space {
        Some(env.enumerate_states().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "tile_state_space requires a finite environment; '{}' cannot enumerate states",
                spec.name
            ))
        })?)
    } else {
        None
    };
    let seed = cfg.seed;
    let qnet = QNetwork::new(
        spec.state_dim,
        &cfg.hidden_layers,
        spec.action_count,
        &mut seeded_stream(seed, streams::NETWORK_INIT),
    )
    .with_grad_clip(cfg.grad_clip_norm);
    let mut act_rng = seeded_stream(seed, streams::ACTING);
    let mut env_rng = seeded_stream(seed, streams::ENV);
    let mut lp = Loop {
        cfg,
        frozen: qnet.frozen_copy(),
        qnet,
        mimic: MimicEnsemble::sentinel(spec.state_dim, spec.action_count),
        buffer: ReplayBuffer::new(
            cfg.replay_capacity,
            spec.state_dim,
            PriorityParams {
                alpha: cfg.priority_alpha,
                beta: cfg.priority_beta,
                epsilon: cfg.priority_epsilon,
            },
        ),
        replay_rng: seeded_stream(seed, streams::REPLAY),
        probe_rng: seeded_stream(seed, streams::PROBE),
        step: 0,
        pending: None,
        deferral_logged: false,
        deferrals: Vec::new(),
        snapshots: Vec::new(),
        tiles,
        last_fidelity: None,
        last_refit: None,
        td_updates: 0,
    };
    let warmup = cfg.warmup_transitions.max(cfg.minibatch_size);
    let mut log = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon_at(episode);
        lp.buffer.set_beta(cfg.beta_at(episode));
        let lr = cfg.learning_rate_at(episode);
        let mut states = env.reset(&mut env_rng);
        let mut agent_steps = vec![0i32; spec.agent_count];
        let (mut ret, mut disc) = (0.0, 0.0);
        let (mut loss_sum, mut loss_n) = (0.0, 0u64);
        let (mut steps, mut transitions) = (0u64, 0u64);
        loop {
            let active = env.active();
            if !active.iter().any(|&a| a) {
                break;
            }
            let actions = act_shared(&states, &active, epsilon, &lp.qnet, &mut act_rng)?;
            let out = env.step(&actions, &mut env_rng)?;
            steps += 1;
            for i in (0..spec.agent_count).filter(|&i| active[i]) {
                lp.step += 1;
                transitions += 1;
                let r = out.rewards[i];
                ret += r;
                disc += cfg.gamma.powi(agent_steps[i]) * r;
                agent_steps[i] += 1;
                let t = Transition {
                    state: std::mem::take(&mut states[i]),
                    action: actions[i],
                    reward: r,
                    next_state: out.next_states[i].clone(),
                    terminal: out.terminals[i],
                    stored_at: lp.step,
                };
                lp.buffer.push(t, 1.0)?;
                if lp.buffer.len() >= warmup && lp.step % cfg.train_every == 0 {
                    loss_sum += lp.td_update(lr)?;
                    loss_n += 1;
                }
                if lp.step % cfg.update_frequency_steps == 0 {
                    lp.pending = Some(lp.step);
                    lp.deferral_logged = false;
                }
                lp.try_refit(episode, observer)?;
            }
            states = out.next_states;
            if out.done {
                break;
            }
        }
        let stats = EpisodeStats {
            episode,
            return_undiscounted: ret,
            return_discounted: disc,
            metrics: env.episode_metrics(),
            steps,
            transitions,
            loss_mean: if loss_n > 0 {
                loss_sum / loss_n as f64
            } else {
                f64::NAN
            },
            epsilon,
            last_refit_step: lp.last_refit,
            fidelity_mae: lp.last_fidelity.as_ref().map(|f| f.max_mae()),
            fidelity_accuracy: lp.last_fidelity.as_ref().map(|f| f.accuracy),
        };
        observer.on_episode(&stats)?;
        log.push(stats);
    }
    let diag = lp.qnet.diagnostics();
    Ok(TrainOutput {
        qnet: lp.qnet,
        mimic: lp.mimic,
        snapshots: lp.snapshots,
        log,
        deferrals: lp.deferrals,
        global_steps: lp.step,
        td_updates: lp.td_updates,
        skipped_non_finite: diag.skipped_non_finite,
    })
}

/// Runs evaluation episodes with a fixed ε. Identical seeds give identical
/// environment randomness for every policy.
pub fn exploit(
    env: &mut dyn Environment,
    policy: Policy<'_>,
    episodes: u64,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<EpisodeStats>> {
    rollout(env, policy, episodes, epsilon, seed, &mut |_, _| {})
}

/// `(state, chosen action)` of every active agent over `episodes` greedy
/// episodes, in visiting order.
pub fn visited_instances(
    env: &mut dyn Environment,
    policy: Policy<'_>,
    episodes: u64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut out = Vec::new();
    rollout(env, policy, episodes, 0.0, seed, &mut |s, a| out.push((s.to_vec(), a)))?;
    Ok(out)
}

fn rollout(
    env: &mut dyn Environment,
    policy: Policy<'_>,
    episodes: u64,
    epsilon: f64,
    seed: u64,
    record: &mut dyn FnMut(&[f64], usize),
) -> Result<Vec<EpisodeStats>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("at least one evaluation episode is required".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument("epsilon must lie in [0, 1]".into()));
    }
    let spec = env.spec().clone();
    if policy.action_count() != spec.action_count {
        return Err(Error::DimensionMismatch {
            expected: spec.action_count,
            got: policy.action_count(),
        });
    }
    let mut act_rng = seeded_stream(seed, streams::EVAL);
    let mut env_rng = seeded_stream(seed, streams::ENV);
    let mut out = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        let mut states = env.reset(&mut env_rng);
        let mut ret = 0.0;
        let (mut steps, mut transitions) = (0u64, 0u64);
        loop {
            let active = env.active();
            if !active.iter().any(|&a| a) {
                break;
            }
            let mut actions = vec![0; spec.agent_count];
            for i in (0..spec.agent_count).filter(|&i| active[i]) {
                actions[i] = policy.act(&states[i], epsilon, &mut act_rng)?;
                record(&states[i], actions[i]);
            }
            let step = env.step(&actions, &mut env_rng)?;
            steps += 1;
            for i in (0..spec.agent_count).filter(|&i| active[i]) {
                transitions += 1;
                ret += step.rewards[i];
            }
            states = step.next_states;
            if step.done {
                break;
            }
        }
        out.push(EpisodeStats {
            episode,
            return_undiscounted: ret,
            // evaluation has no discount
            return_discounted: ret,
            metrics: env.episode_metrics(),
            steps,
            transitions,
            loss_mean: f64::NAN,
            epsilon,
            last_refit_step: None,
            fidelity_mae: None,
            fidelity_accuracy: None,
        });
    }
    Ok(out)
}

/// Greedy action of `model` in every state of a one-hot tabular space.
pub fn greedy_table<M: ActionValues + ?Sized>(states: &[Vec<f64>], model: &M) -> Result<Vec<usize>> {
    states
        .iter()
        .map(|s| Ok(argmax(&model.action_values(s)?)))
        .collect()
}
