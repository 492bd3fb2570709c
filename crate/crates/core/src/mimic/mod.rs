//! The interpretable mimic learner.
//!
//! One gradient-boosted forest per action, which is the same model as a single
//! tree whose root branches on the action: rows that share an action always
//! reach the same subtree. Each forest predicts
//! `base + shrinkage × Σ_t tree_t(s)` and every prediction splits exactly into
//! a baseline plus per-feature contributions accumulated along the decision
//! paths.

mod io;
mod tree;

pub use io::{MIMIC_MAGIC, MIMIC_VERSION};
pub use tree::{best_split, Node, RegressionTree, Split, SplitChoice, TreeParams};

use crate::config::MimicConfig;
use crate::error::{Error, Result};
use crate::qnet::argmax;

/// One training row: `(state, action, target Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimicSample {
    pub state: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionForest {
    pub base: f64,
    pub trees: Vec<RegressionTree>,
    /// Set when the action had too few rows and fell back to a constant.
    pub fallback: bool,
}

impl ActionForest {
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            trees: Vec::new(),
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimicEnsemble {
    dim: usize,
    shrinkage: f64,
    forests: Vec<ActionForest>,
    fitted_at: u64,
}

/// Additive explanation of one predicted Q-value.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionVector {
    pub baseline: f64,
    pub contributions: Vec<f64>,
    pub prediction: f64,
}

impl ContributionVector {
    /// `|baseline + Σ contributions − prediction|`.
    pub fn additivity_gap(&self) -> f64 {
        (self.baseline + self.contributions.iter().sum::<f64>() - self.prediction).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub rows_per_action: Vec<usize>,
    pub fallback_actions: Vec<usize>,
    /// Training MSE of the final ensemble over all rows.
    pub train_mse: f64,
    /// Training MSE after 0, 1, ..., n_stages stages.
    pub staged_mse: Vec<f64>,
}

impl MimicEnsemble {
    /// Constant forests, one per action.
    pub fn constant(dim: usize, values: &[f64]) -> Self {
        Self {
            dim,
            shrinkage: 1.0,
            forests: values.iter().map(|&v| ActionForest::constant(v)).collect(),
            fitted_at: 0,
        }
    }

    /// The pre-fit model: predicts 0 for every action.
    pub fn sentinel(dim: usize, actions: usize) -> Self {
        Self::constant(dim, &vec![0.0; actions])
    }

    pub fn from_parts(
        dim: usize,
        shrinkage: f64,
        forests: Vec<ActionForest>,
        fitted_at: u64,
    ) -> Result<Self> {
        if forests.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one action".into()));
        }
        for f in &forests {
            for t in &f.trees {
                if t.nodes().iter().any(|n| n.split.is_some_and(|s| s.feature >= dim)) {
                    return Err(Error::Format("split feature exceeds state dimension".into()));
                }
            }
        }
        Ok(Self {
            dim,
            shrinkage,
            forests,
            fitted_at,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action_count(&self) -> usize {
        self.forests.len()
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn forests(&self) -> &[ActionForest] {
        &self.forests
    }

    /// Global step at which the ensemble was fitted.
    pub fn fitted_at(&self) -> u64 {
        self.fitted_at
    }

    pub fn set_fitted_at(&mut self, step: u64) {
        self.fitted_at = step;
    }

    pub fn is_constant(&self) -> bool {
        self.forests.iter().all(|f| f.trees.is_empty())
    }

    /// Fits every action's forest from scratch.
    pub fn fit(
        data: &[MimicSample],
        dim: usize,
        actions: usize,
        config: &MimicConfig,
    ) -> Result<(Self, FitReport)> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("mimic dataset"));
        }
        for s in data {
            if s.state.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.state.len(),
                });
            }
            if s.action >= actions {
                return Err(Error::ActionOutOfRange {
                    action: s.action,
                    count: actions,
                });
            }
            if !s.target.is_finite() {
                return Err(Error::NonFinite("mimic target".into()));
            }
        }
        let global_mean = data.iter().map(|s| s.target).sum::<f64>() / data.len() as f64;
        let params = TreeParams {
            max_depth: config.max_depth,
            min_samples_split: config.min_samples_split,
        };

        let mut forests = Vec::with_capacity(actions);
        let mut rows_per_action = Vec::with_capacity(actions);
        let mut fallback_actions = Vec::new();
        // Per-stage squared error summed over actions.
        let mut staged_sse = vec![0.0; config.n_stages + 1];
        for a in 0..actions {
            let rows: Vec<&MimicSample> = data.iter().filter(|s| s.action == a).collect();
            rows_per_action.push(rows.len());
            if rows.len() < config.min_samples_split {
                fallback_actions.push(a);
                let sse: f64 = rows.iter().map(|s| (s.target - global_mean).powi(2)).sum();
                staged_sse.iter_mut().for_each(|x| *x += sse);
                forests.push(ActionForest {
                    base: global_mean,
                    trees: Vec::new(),
                    fallback: true,
                });
                continue;
            }
            let x: Vec<f64> = rows.iter().flat_map(|s| s.state.iter().copied()).collect();
            let y: Vec<f64> = rows.iter().map(|s| s.target).collect();
            let (forest, sse) = fit_forest(&x, dim, &y, config.n_stages, config.shrinkage, params);
            for (acc, v) in staged_sse.iter_mut().zip(sse) {
                *acc += v;
            }
            forests.push(forest);
        }
        let ensemble = Self {
            dim,
            shrinkage: config.shrinkage,
            forests,
            fitted_at: 0,
        };
        let train_mse = data
            .iter()
            .map(|s| (ensemble.predict_unchecked(&s.state, s.action) - s.target).powi(2))
            .sum::<f64>()
            / data.len() as f64;
        let n = data.len() as f64;
        Ok((
            ensemble,
            FitReport {
                rows_per_action,
                fallback_actions,
                train_mse,
                staged_mse: staged_sse.into_iter().map(|s| s / n).collect(),
            },
        ))
    }

    fn predict_unchecked(&self, state: &[f64], action: usize) -> f64 {
        let f = &self.forests[action];
        f.base + self.shrinkage * f.trees.iter().map(|t| t.predict(state)).sum::<f64>()
    }

    pub fn predict(&self, state: &[f64], action: usize) -> Result<f64> {
        self.check(state, action)?;
        Ok(self.predict_unchecked(state, action))
    }

    /// Q-values of every action.
    pub fn predict_all(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state, 0)?;
        Ok((0..self.action_count())
            .map(|a| self.predict_unchecked(state, a))
            .collect())
    }

    /// Lowest-index argmax over actions and its value.
    pub fn best_action(&self, state: &[f64]) -> Result<(usize, f64)> {
        let q = self.predict_all(state)?;
        let a = argmax(&q);
        Ok((a, q[a]))
    }

    pub fn contributions(&self, state: &[f64], action: usize) -> Result<ContributionVector> {
        self.check(state, action)?;
        let f = &self.forests[action];
        let mut contributions = vec![0.0; self.dim];
        let mut baseline = f.base;
        for t in &f.trees {
            baseline += self.shrinkage * t.root().value;
            t.accumulate_contributions(state, self.shrinkage, &mut contributions);
        }
        Ok(ContributionVector {
            baseline,
            contributions,
            prediction: self.predict_unchecked(state, action),
        })
    }

    fn check(&self, state: &[f64], action: usize) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.len(),
            });
        }
        if action >= self.action_count() {
            return Err(Error::ActionOutOfRange {
                action,
                count: self.action_count(),
            });
        }
        Ok(())
    }

    /// Indented text rendering, one node per line.
    pub fn dump_text(&self, feature_names: Option<&[String]>) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "ensemble dim={} actions={} shrinkage={} fitted_at={}",
            self.dim,
            self.action_count(),
            self.shrinkage,
            self.fitted_at
        );
        for (a, f) in self.forests.iter().enumerate() {
            let _ = writeln!(
                out,
                "action {a} base={} trees={}{}",
                f.base,
                f.trees.len(),
                if f.fallback { " fallback" } else { "" }
            );
            for (k, t) in f.trees.iter().enumerate() {
                let _ = writeln!(out, "  tree {k}");
                dump_node(t, 0, 2, feature_names, &mut out);
            }
        }
        out
    }
}

fn dump_node(
    t: &RegressionTree,
    i: usize,
    indent: usize,
    names: Option<&[String]>,
    out: &mut String,
) {
    use std::fmt::Write;
    let n = &t.nodes()[i];
    let pad = "  ".repeat(indent);
    match n.split {
        None => {
            let _ = writeln!(out, "{pad}leaf value={} n={}", n.value, n.samples);
        }
        Some(s) => {
            let name = names
                .and_then(|v| v.get(s.feature))
                .map(|s| format!(" ({s})"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{pad}x[{}]{name} <= {} value={} n={}",
                s.feature, s.threshold, n.value, n.samples
            );
            dump_node(t, s.left, indent + 1, names, out);
            dump_node(t, s.right, indent + 1, names, out);
        }
    }
}

/// Boosts `n_stages` trees on squared loss. Returns the forest and the
/// training SSE after each stage (index 0 is the constant model).
fn fit_forest(
    x: &[f64],
    dim: usize,
    y: &[f64],
    n_stages: usize,
    shrinkage: f64,
    params: TreeParams,
) -> (ActionForest, Vec<f64>) {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let cols = tree::to_columns(x, dim);
    let sorted = tree::presort(&cols, dim, n);
    let mut fitted = vec![base; n];
    let mut residual = vec![0.0; n];
    let sse = |fitted: &[f64]| -> f64 { y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum() };
    let mut staged = Vec::with_capacity(n_stages + 1);
    staged.push(sse(&fitted));
    let mut trees = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let t = RegressionTree::fit_presorted(&cols, &residual, &sorted, params);
        for i in 0..n {
            fitted[i] += shrinkage * t.predict(&x[i * dim..(i + 1) * dim]);
        }
        staged.push(sse(&fitted));
        trees.push(t);
    }
    (
        ActionForest {
            base,
            trees,
            fallback: false,
        },
        staged,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LabelMode;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn cfg(stages: usize, depth: usize, shrinkage: f64) -> MimicConfig {
        MimicConfig {
            n_stages: stages,
            max_depth: depth,
            min_samples_split: 2,
            shrinkage,
            label_mode: LabelMode::AllActions,
            ..MimicConfig::default()
        }
    }

    fn random_data(seed: u64, n: usize, dim: usize, actions: usize) -> Vec<MimicSample> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let state: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let action = rng.gen_range(0..actions);
                let target = state[0] * 2.0 - state[dim - 1].powi(2) + action as f64;
                MimicSample {
                    state,
                    action,
                    target,
                }
            })
            .collect()
    }

    #[test]
    fn constant_targets_predict_constant() {
        let data: Vec<MimicSample> = (0..40)
            .map(|i| MimicSample {
                state: vec![i as f64, -(i as f64)],
                action: i % 2,
                target: 5.0,
            })
            .collect();
        let (m, report) = MimicEnsemble::fit(&data, 2, 2, &cfg(10, 3, 0.1)).unwrap();
        for s in &data {
            assert_eq!(m.predict(&s.state, 0).unwrap(), 5.0);
            assert_eq!(m.predict(&s.state, 1).unwrap(), 5.0);
        }
        assert_eq!(report.train_mse, 0.0);
    }

    #[test]
    fn step_function_exact_fit() {
        let data: Vec<MimicSample> = [-2.0, -1.5, -1.0, 0.5, 1.0, 3.0]
            .iter()
            .map(|&v: &f64| MimicSample {
                state: vec![v],
                action: 0,
                target: if v < 0.0 { 0.0 } else { 1.0 },
            })
            .collect();
        let (m, report) = MimicEnsemble::fit(&data, 1, 1, &cfg(1, 1, 1.0)).unwrap();
        assert_eq!(report.train_mse, 0.0);
        let split = m.forests()[0].trees[0].root().split.unwrap();
        assert!(split.threshold > -1.0 && split.threshold < 0.5);
        assert_eq!(split.threshold, -0.25);
    }

    #[test]
    fn predict_matches_reported_mse() {
        let data = random_data(1, 300, 3, 2);
        let (m, report) = MimicEnsemble::fit(&data, 3, 2, &cfg(20, 3, 0.2)).unwrap();
        let mse = data
            .iter()
            .map(|s| (m.predict(&s.state, s.action).unwrap() - s.target).powi(2))
            .sum::<f64>()
            / data.len() as f64;
        assert_eq!(mse, report.train_mse);
    }

    #[test]
    fn staged_mse_is_non_increasing_and_below_variance() {
        let data = random_data(2, 400, 2, 1);
        let (_, report) = MimicEnsemble::fit(&data, 2, 1, &cfg(50, 3, 0.1)).unwrap();
        let mean = data.iter().map(|s| s.target).sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|s| (s.target - mean).powi(2)).sum::<f64>() / data.len() as f64;
        assert!((report.staged_mse[0] - var).abs() < 1e-9);
        for w in report.staged_mse.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(report.train_mse <= var);
    }

    #[test]
    fn more_stages_generalise_better_on_quadratic() {
        let make = |seed| -> Vec<MimicSample> {
            let mut rng = seeded_rng(seed);
            (0..400)
                .map(|_| {
                    let x: f64 = rng.gen_range(-2.0..2.0);
                    MimicSample {
                        state: vec![x],
                        action: 0,
                        target: x * x,
                    }
                })
                .collect()
        };
        let train = make(10);
        let test = make(11);
        let mse = |m: &MimicEnsemble| {
            test.iter()
                .map(|s| (m.predict(&s.state, 0).unwrap() - s.target).powi(2))
                .sum::<f64>()
                / test.len() as f64
        };
        let (one, _) = MimicEnsemble::fit(&train, 1, 1, &cfg(1, 3, 0.1)).unwrap();
        let (fifty, _) = MimicEnsemble::fit(&train, 1, 1, &cfg(50, 3, 0.1)).unwrap();
        assert!(mse(&fifty) <= mse(&one));
    }

    #[test]
    fn sparse_action_falls_back_to_global_mean() {
        let mut data = random_data(3, 100, 2, 1);
        data.push(MimicSample {
            state: vec![0.0, 0.0],
            action: 1,
            target: 100.0,
        });
        let mut c = cfg(5, 2, 0.1);
        c.min_samples_split = 20;
        let (m, report) = MimicEnsemble::fit(&data, 2, 2, &c).unwrap();
        assert_eq!(report.fallback_actions, vec![1]);
        let mean = data.iter().map(|s| s.target).sum::<f64>() / data.len() as f64;
        assert!((m.predict(&[0.3, 0.3], 1).unwrap() - mean).abs() < 1e-12);
        assert!(m.forests()[1].fallback);
    }

    #[test]
    fn best_action_cases() {
        let one = MimicEnsemble::constant(2, &[3.0]);
        assert_eq!(one.best_action(&[0.0, 0.0]).unwrap(), (0, 3.0));
        let two = MimicEnsemble::constant(2, &[1.0, 2.0]);
        assert_eq!(two.best_action(&[0.0, 0.0]).unwrap(), (1, 2.0));
    }

    #[test]
    fn constant_ensemble_has_zero_contributions() {
        let m = MimicEnsemble::constant(3, &[4.0, -1.0]);
        let c = m.contributions(&[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(c.baseline, 4.0);
        assert_eq!(c.contributions, vec![0.0; 3]);
        assert_eq!(c.prediction, 4.0);
    }

    #[test]
    fn single_split_contribution() {
        let t = RegressionTree::from_nodes(vec![
            Node {
                value: 1.0,
                samples: 4,
                split: Some(Split {
                    feature: 1,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                }),
            },
            Node::leaf(-1.0, 2),
            Node::leaf(3.0, 2),
        ])
        .unwrap();
        let m = MimicEnsemble::from_parts(
            3,
            1.0,
            vec![ActionForest {
                base: 0.0,
                trees: vec![t],
                fallback: false,
            }],
            0,
        )
        .unwrap();
        let c = m.contributions(&[9.0, 0.5, -9.0], 0).unwrap();
        assert_eq!(c.baseline, 1.0);
        assert_eq!(c.contributions, vec![0.0, 2.0, 0.0]);
        assert_eq!(c.prediction, 3.0);
        let c = m.contributions(&[9.0, -0.5, -9.0], 0).unwrap();
        assert_eq!(c.contributions, vec![0.0, -2.0, 0.0]);
    }

    #[test]
    fn action_isolation() {
        let data = random_data(4, 300, 2, 2);
        let mut perturbed = data.clone();
        for s in perturbed.iter_mut().filter(|s| s.action == 1) {
            s.target += 10.0 * s.state[0];
        }
        let c = cfg(10, 3, 0.2);
        let (a, _) = MimicEnsemble::fit(&data, 2, 2, &c).unwrap();
        let (b, _) = MimicEnsemble::fit(&perturbed, 2, 2, &c).unwrap();
        assert_eq!(a.forests()[0], b.forests()[0]);
        assert_ne!(a.forests()[1], b.forests()[1]);
    }

    #[test]
    fn fit_rejects_bad_rows() {
        let bad = vec![MimicSample {
            state: vec![0.0],
            action: 3,
            target: 1.0,
        }];
        assert!(MimicEnsemble::fit(&bad, 1, 2, &cfg(1, 1, 1.0)).is_err());
        assert!(MimicEnsemble::fit(&[], 1, 2, &cfg(1, 1, 1.0)).is_err());
    }

    #[test]
    fn text_dump_lists_nodes() {
        let data = random_data(5, 60, 2, 1);
        let (m, _) = MimicEnsemble::fit(&data, 2, 1, &cfg(2, 2, 0.5)).unwrap();
        let text = m.dump_text(None);
        assert!(text.contains("action 0"));
        assert!(text.contains("leaf value="));
        assert!(text.contains("<="));
    }
}
