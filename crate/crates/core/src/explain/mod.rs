//! Explanations built from mimic feature contributions.
//!
//! Sign convention everywhere: a contribution difference for the pair
//! `(a1, a2)` is `contrib(s, a1) - contrib(s, a2)`, so a positive value means
//! the feature pushes the choice towards `a1`.

mod report;

pub use report::{write_aafc_report, write_acd_report, write_local_report, SIGN_CONVENTION};

use crate::error::{Error, Result};
use crate::mimic::MimicEnsemble;

/// Significance threshold applied to differences by default.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Series returned by default from the evolution analysis.
pub const DEFAULT_TOP_N: usize = 8;
/// Features listed per sign in the cross-pair summary.
pub const MOST_COMMON: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalExplanation {
    pub state: Vec<f64>,
    pub a1: usize,
    pub a2: usize,
    /// Per-feature `contrib(s, a1) - contrib(s, a2)`.
    pub deltas: Vec<f64>,
    pub baseline_gap: f64,
    /// `predict(s, a1) - predict(s, a2)`.
    pub q_gap: f64,
    pub threshold: f64,
    /// Features with `|Δ| > threshold`, by decreasing `|Δ|`.
    pub retained: Vec<usize>,
}

impl LocalExplanation {
    /// `|Σ Δ + baseline gap - q gap|`.
    pub fn reconstruction_error(&self) -> f64 {
        (self.deltas.iter().sum::<f64>() + self.baseline_gap - self.q_gap).abs()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidArgument("threshold must be finite and >= 0".into()));
    }
    Ok(())
}

/// Features with `|v| > threshold`, largest magnitude first, ties by index.
fn significant(values: &[f64], threshold: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len())
        .filter(|&f| values[f].abs() > threshold)
        .collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

pub fn explain_local(
    mimic: &MimicEnsemble,
    state: &[f64],
    a1: usize,
    a2: usize,
    threshold: f64,
) -> Result<LocalExplanation> {
    if a1 == a2 {
        return Err(Error::InvalidArgument(format!(
            "the two compared actions must differ (both are {a1})"
        )));
    }
    check_threshold(threshold)?;
    let c1 = mimic.contributions(state, a1)?;
    let c2 = mimic.contributions(state, a2)?;
    let deltas: Vec<f64> = c1
        .contributions
        .iter()
        .zip(&c2.contributions)
        .map(|(x, y)| x - y)
        .collect();
    let retained = significant(&deltas, threshold);
    Ok(LocalExplanation {
        state: state.to_vec(),
        a1,
        a2,
        deltas,
        baseline_gap: c1.baseline - c2.baseline,
        q_gap: c1.prediction - c2.prediction,
        threshold,
        retained,
    })
}

/// Average contribution difference for `(reference, action)` over the
/// instances whose selected action is `action`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalAcd {
    pub reference: usize,
    pub action: usize,
    pub acd: Vec<f64>,
    pub instances: usize,
    /// `|ACD| > threshold`, largest magnitude first.
    pub significant: Vec<usize>,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcdReport {
    pub reference: usize,
    pub threshold: f64,
    pub action_count: usize,
    /// One entry per non-reference action selected by some instance, in
    /// action order.
    pub pairs: Vec<GlobalAcd>,
    /// Features most often significant with positive (favouring the
    /// reference) and negative sign across pairs, as `(feature, pairs)`.
    pub most_common_positive: Vec<(usize, usize)>,
    pub most_common_negative: Vec<(usize, usize)>,
}

fn most_common(counts: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(f, &c)| (f, c))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// Mean per-feature difference `contrib(s, reference) - contrib(s, a)` for
/// every action `a != reference`, averaged over instances that selected `a`.
pub fn explain_global_acd(
    mimic: &MimicEnsemble,
    instances: &[(Vec<f64>, usize)],
    reference: usize,
    threshold: f64,
) -> Result<AcdReport> {
    if instances.is_empty() {
        return Err(Error::Empty("instance set"));
    }
    check_threshold(threshold)?;
    let k = mimic.action_count();
    if reference >= k {
        return Err(Error::ActionOutOfRange {
            action: reference,
            count: k,
        });
    }
    let dim = mimic.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (state, action) in instances {
        if *action >= k {
            return Err(Error::ActionOutOfRange {
                action: *action,
                count: k,
            });
        }
        if *action == reference {
            continue;
        }
        let e = explain_local(mimic, state, reference, *action, threshold)?;
        for (s, d) in sums[*action].iter_mut().zip(&e.deltas) {
            *s += d;
        }
        counts[*action] += 1;
    }
    let mut pairs = Vec::new();
    let mut pos = vec![0usize; dim];
    let mut neg = vec![0usize; dim];
    for a in (0..k).filter(|&a| a != reference && counts[a] > 0) {
        let acd: Vec<f64> = sums[a].iter().map(|s| s / counts[a] as f64).collect();
        let sig = significant(&acd, threshold);
        let positive = sig.iter().filter(|&&f| acd[f] > 0.0).count();
        for &f in &sig {
            if acd[f] > 0.0 {
                pos[f] += 1;
            } else {
                neg[f] += 1;
            }
        }
        pairs.push(GlobalAcd {
            reference,
            action: a,
            instances: counts[a],
            negative: sig.len() - positive,
            positive,
            significant: sig,
            acd,
        });
    }
    Ok(AcdReport {
        reference,
        threshold,
        action_count: k,
        pairs,
        most_common_positive: most_common(&pos, MOST_COMMON),
        most_common_negative: most_common(&neg, MOST_COMMON),
    })
}

/// Mean absolute contribution of one feature to one action's Q-value across
/// snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct AafcSeries {
    pub feature: usize,
    pub action: usize,
    pub stamps: Vec<u64>,
    pub values: Vec<f64>,
}

/// Mean `|contribution|` per feature of `action` for one ensemble.
pub fn aafc(mimic: &MimicEnsemble, probe: &[Vec<f64>], action: usize) -> Result<Vec<f64>> {
    if probe.is_empty() {
        return Err(Error::Empty("probe state set"));
    }
    let mut acc = vec![0.0; mimic.dim()];
    for s in probe {
        let c = mimic.contributions(s, action)?;
        for (a, v) in acc.iter_mut().zip(&c.contributions) {
            *a += v.abs();
        }
    }
    acc.iter_mut().for_each(|a| *a /= probe.len() as f64);
    Ok(acc)
}

/// AAFC of every feature in every snapshot; returns the `top_n` features
/// ranked by their value in the last snapshot.
pub fn explain_evolution_aafc(
    snapshots: &[MimicEnsemble],
    probe: &[Vec<f64>],
    action: usize,
    top_n: usize,
) -> Result<Vec<AafcSeries>> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            ">=2 snapshots required, got {}",
            snapshots.len()
        )));
    }
    if snapshots.windows(2).any(|w| w[0].fitted_at() >= w[1].fitted_at()) {
        return Err(Error::InvalidArgument(
            "snapshot stamps must be strictly increasing".into(),
        ));
    }
    let table = snapshots
        .iter()
        .map(|m| aafc(m, probe, action))
        .collect::<Result<Vec<_>>>()?;
    let last = table.last().expect("two or more snapshots");
    let mut order: Vec<usize> = (0..last.len()).collect();
    order.sort_by(|&a, &b| last[b].total_cmp(&last[a]).then(a.cmp(&b)));
    order.truncate(top_n);
    let stamps: Vec<u64> = snapshots.iter().map(|m| m.fitted_at()).collect();
    Ok(order
        .into_iter()
        .map(|feature| AafcSeries {
            feature,
            action,
            stamps: stamps.clone(),
            values: table.iter().map(|row| row[feature]).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests;
