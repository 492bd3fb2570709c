//! Fidelity of the mimic to the online network, and play performance.

use serde::{Deserialize, Serialize};

use crate::env::EpisodeMetrics;
use crate::error::{Error, Result};
use crate::mimic::MimicEnsemble;
use crate::qnet::{argmax, QNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Mean absolute Q-value gap, one entry per action.
    pub mae: Vec<f64>,
    /// Fraction of states where both models pick the same greedy action.
    pub accuracy: f64,
    pub samples: usize,
    /// Mean |Q| of the online network over the same states and all actions.
    pub q_scale: f64,
    pub step: u64,
}

impl FidelityReport {
    pub fn max_mae(&self) -> f64 {
        self.mae.iter().cloned().fold(0.0, f64::max)
    }

    /// `max_mae / q_scale`; infinite when the network outputs are all zero
    /// and the mimic disagrees.
    pub fn relative_mae(&self) -> f64 {
        let m = self.max_mae();
        if m == 0.0 {
            0.0
        } else {
            m / self.q_scale
        }
    }
}

fn check(states: &[Vec<f64>], qnet: &QNetwork, mimic: &MimicEnsemble) -> Result<()> {
    if states.is_empty() {
        return Err(Error::Empty("fidelity state set"));
    }
    if qnet.action_count() != mimic.action_count() {
        return Err(Error::DimensionMismatch {
            expected: qnet.action_count(),
            got: mimic.action_count(),
        });
    }
    Ok(())
}

pub fn fidelity_mae(
    states: &[Vec<f64>],
    qnet: &QNetwork,
    mimic: &MimicEnsemble,
) -> Result<Vec<f64>> {
    Ok(fidelity_report(states, qnet, mimic, 0)?.mae)
}

pub fn fidelity_accuracy(
    states: &[Vec<f64>],
    qnet: &QNetwork,
    mimic: &MimicEnsemble,
) -> Result<f64> {
    Ok(fidelity_report(states, qnet, mimic, 0)?.accuracy)
}

pub fn fidelity_report(
    states: &[Vec<f64>],
    qnet: &QNetwork,
    mimic: &MimicEnsemble,
    step: u64,
) -> Result<FidelityReport> {
    check(states, qnet, mimic)?;
    let k = qnet.action_count();
    let mut mae = vec![0.0; k];
    let mut agree = 0usize;
    let mut scale = 0.0;
    for s in states {
        let q = qnet.forward(s)?;
        let m = mimic.predict_all(s)?;
        for a in 0..k {
            mae[a] += (m[a] - q[a]).abs();
            scale += q[a].abs();
        }
        agree += (argmax(&q) == argmax(&m)) as usize;
    }
    let n = states.len() as f64;
    mae.iter_mut().for_each(|v| *v /= n);
    Ok(FidelityReport {
        mae,
        accuracy: agree as f64 / n,
        samples: states.len(),
        q_scale: scale / (n * k as f64),
        step,
    })
}

/// Outcome of one training or evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    /// Sum of all agents' rewards.
    pub return_undiscounted: f64,
    /// Sum over agents of each agent's own discounted reward sequence.
    pub return_discounted: f64,
    pub metrics: EpisodeMetrics,
    pub steps: u64,
    pub transitions: u64,
    /// Mean TD loss over the episode's updates; NaN when none ran.
    pub loss_mean: f64,
    pub epsilon: f64,
    /// Global step of the most recent target refresh, if any.
    pub last_refit_step: Option<u64>,
    /// Largest per-action MAE and the accuracy at that refresh.
    pub fidelity_mae: Option<f64>,
    pub fidelity_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaySummary {
    pub episodes: usize,
    pub final_hotspots: MeanStd,
    pub avg_delay: MeanStd,
    pub delayed_flights: MeanStd,
    pub return_undiscounted: MeanStd,
}

pub fn play_performance(stats: &[EpisodeStats]) -> Result<PlaySummary> {
    if stats.is_empty() {
        return Err(Error::Empty("episode statistics"));
    }
    let col = |f: &dyn Fn(&EpisodeStats) -> f64| {
        MeanStd::of(&stats.iter().map(f).collect::<Vec<_>>())
    };
    Ok(PlaySummary {
        episodes: stats.len(),
        final_hotspots: col(&|s| s.metrics.final_hotspots as f64),
        avg_delay: col(&|s| s.metrics.avg_delay),
        delayed_flights: col(&|s| s.metrics.delayed_flights as f64),
        return_undiscounted: col(&|s| s.return_undiscounted),
    })
}
