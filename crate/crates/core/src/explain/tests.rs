use rand::Rng;

use super::*;
use crate::config::MimicConfig;
use crate::mimic::{ActionForest, MimicSample, Node, RegressionTree, Split};
use crate::rng::seeded_rng;

fn stump(feature: usize, threshold: f64, root: f64, left: f64, right: f64) -> RegressionTree {
    RegressionTree::from_nodes(vec![
        Node {
            value: root,
            samples: 10,
            split: Some(Split {
                feature,
                threshold,
                left: 1,
                right: 2,
            }),
        },
        Node::leaf(left, 5),
        Node::leaf(right, 5),
    ])
    .unwrap()
}

fn forest(base: f64, trees: Vec<RegressionTree>) -> ActionForest {
    ActionForest {
        base,
        trees,
        fallback: false,
    }
}

/// Action 0 splits on feature 1; action 1 is constant.
fn two_action() -> MimicEnsemble {
    MimicEnsemble::from_parts(
        3,
        0.5,
        vec![
            forest(1.0, vec![stump(1, 0.5, 2.0, 1.0, 4.0)]),
            forest(0.0, vec![RegressionTree::constant(3.0, 10)]),
        ],
        7,
    )
    .unwrap()
}

fn fitted(seed: u64, dim: usize, actions: usize) -> MimicEnsemble {
    let mut rng = seeded_rng(seed);
    let data: Vec<MimicSample> = (0..300)
        .map(|_| {
            let state: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let action = rng.gen_range(0..actions);
            let target = state[0] * (action as f64 + 1.0) - state[dim - 1] + rng.gen_range(-0.1..0.1);
            MimicSample {
                state,
                action,
                target,
            }
        })
        .collect();
    let cfg = MimicConfig {
        n_stages: 15,
        max_depth: 4,
        min_samples_split: 10,
        shrinkage: 0.3,
        ..MimicConfig::default()
    };
    MimicEnsemble::fit(&data, dim, actions, &cfg).unwrap().0
}

fn names(dim: usize) -> Vec<String> {
    (0..dim).map(|f| format!("f{f}")).collect()
}

#[test]
fn constant_forests_have_zero_deltas() {
    let m = MimicEnsemble::constant(4, &[1.0, 2.5]);
    let e = explain_local(&m, &[0.3; 4], 0, 1, 0.0).unwrap();
    assert_eq!(e.deltas, vec![0.0; 4]);
    assert!(e.retained.is_empty());
    assert_eq!(e.q_gap, -1.5);
    assert_eq!(e.baseline_gap, -1.5);
}

#[test]
fn hand_traced_two_action_pair() {
    let m = two_action();
    let e = explain_local(&m, &[0.0, 1.0, 0.0], 0, 1, DEFAULT_THRESHOLD).unwrap();
    // action 0: base 1 + 0.5·2 = 2, contribution 0.5·(4 − 2) on feature 1
    // action 1: base 0 + 0.5·3 = 1.5
    assert_eq!(e.deltas, vec![0.0, 1.0, 0.0]);
    assert_eq!(e.baseline_gap, 0.5);
    assert_eq!(e.q_gap, 1.5);
    assert_eq!(e.retained, vec![1]);
    // the left branch contributes 0.5·(1 − 2) = −0.5, not strictly above 0.5
    let e = explain_local(&m, &[0.0, 0.0, 0.0], 0, 1, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(e.deltas[1], -0.5);
    assert!(e.retained.is_empty());
}

#[test]
fn zero_threshold_keeps_every_nonzero_feature() {
    let m = fitted(3, 5, 3);
    let e = explain_local(&m, &[0.2, -0.4, 0.1, 0.9, -0.7], 2, 0, 0.0).unwrap();
    let nonzero = e.deltas.iter().filter(|d| **d != 0.0).count();
    assert_eq!(e.retained.len(), nonzero);
    for w in e.retained.windows(2) {
        assert!(e.deltas[w[0]].abs() >= e.deltas[w[1]].abs());
    }
}

#[test]
fn local_rejects_equal_actions_and_bad_threshold() {
    let m = two_action();
    assert!(matches!(
        explain_local(&m, &[0.0; 3], 1, 1, 0.5),
        Err(Error::InvalidArgument(_))
    ));
    assert!(explain_local(&m, &[0.0; 3], 0, 1, -1.0).is_err());
    assert!(explain_local(&m, &[0.0; 3], 0, 1, f64::NAN).is_err());
    assert!(explain_local(&m, &[0.0; 3], 0, 5, 0.5).is_err());
}

#[test]
fn local_reconstructs_q_gap() {
    let m = fitted(11, 4, 3);
    let mut rng = seeded_rng(12);
    for _ in 0..200 {
        let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let e = explain_local(&m, &s, 0, 2, 0.1).unwrap();
        assert!(e.reconstruction_error() < 1e-9);
    }
}

#[test]
fn single_instance_acd_is_the_local_delta() {
    let m = fitted(5, 4, 3);
    let s = vec![0.5, -0.2, 0.3, 0.8];
    let r = explain_global_acd(&m, &[(s.clone(), 2)], 0, 0.0).unwrap();
    assert_eq!(r.pairs.len(), 1);
    let local = explain_local(&m, &s, 0, 2, 0.0).unwrap();
    assert_eq!(r.pairs[0].acd, local.deltas);
    assert_eq!(r.pairs[0].instances, 1);
    assert_eq!(r.pairs[0].significant, local.retained);
}

#[test]
fn duplicated_instances_leave_acd_unchanged() {
    let m = fitted(6, 4, 3);
    let inst = vec![(vec![0.1, 0.2, -0.3, 0.4], 1), (vec![-0.6, 0.0, 0.9, -0.2], 2)];
    let once = explain_global_acd(&m, &inst, 0, 0.05).unwrap();
    let twice: Vec<_> = inst.iter().chain(&inst).cloned().collect();
    let twice = explain_global_acd(&m, &twice, 0, 0.05).unwrap();
    for (a, b) in once.pairs.iter().zip(&twice.pairs) {
        assert_eq!(b.instances, 2 * a.instances);
        for (x, y) in a.acd.iter().zip(&b.acd) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn acd_matches_brute_force_mean() {
    let m = fitted(8, 4, 4);
    let mut rng = seeded_rng(9);
    let inst: Vec<(Vec<f64>, usize)> = (0..120)
        .map(|_| ((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(0..4)))
        .collect();
    let r = explain_global_acd(&m, &inst, 1, 0.0).unwrap();
    for a in [0, 2, 3] {
        let sel: Vec<_> = inst.iter().filter(|(_, b)| *b == a).collect();
        let mut mean = vec![0.0; 4];
        for (s, _) in &sel {
            let c1 = m.contributions(s, 1).unwrap();
            let c2 = m.contributions(s, a).unwrap();
            for f in 0..4 {
                mean[f] += (c1.contributions[f] - c2.contributions[f]) / sel.len() as f64;
            }
        }
        let pair = r.pairs.iter().find(|p| p.action == a).unwrap();
        assert_eq!(pair.instances, sel.len());
        for f in 0..4 {
            assert!((pair.acd[f] - mean[f]).abs() < 1e-9);
        }
    }
    assert!(r.pairs.iter().all(|p| p.action != 1));
}

#[test]
fn absent_actions_produce_no_pair_but_a_report_section() {
    let m = two_action();
    let inst = vec![(vec![0.0, 1.0, 0.0], 1)];
    let r = explain_global_acd(&m, &inst, 0, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(r.pairs.len(), 1);
    assert_eq!(r.pairs[0].positive, 1);
    assert_eq!(r.most_common_positive, vec![(1, 1)]);
    assert!(r.most_common_negative.is_empty());

    let m3 = MimicEnsemble::from_parts(
        3,
        0.5,
        vec![
            forest(1.0, vec![stump(1, 0.5, 2.0, 1.0, 4.0)]),
            forest(0.0, vec![RegressionTree::constant(3.0, 10)]),
            forest(0.0, vec![RegressionTree::constant(3.0, 10)]),
        ],
        7,
    )
    .unwrap();
    let r = explain_global_acd(&m3, &inst, 0, DEFAULT_THRESHOLD).unwrap();
    let mut buf = Vec::new();
    write_acd_report(&mut buf, &r, &names(3)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(SIGN_CONVENTION));
    assert!(text.contains("# pair 0-1\tinstances 1"));
    assert!(text.contains("# pair 0-2\tinstances 0"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "reference\taction\tinstances\tfeature_index\tfeature\tacd\tsign");
    assert_eq!(rows[1], "0\t1\t1\t1\tf1\t1.000000\t+");
    assert_eq!(rows.len(), 2);
}

#[test]
fn acd_rejects_bad_input() {
    let m = two_action();
    assert!(explain_global_acd(&m, &[], 0, 0.5).is_err());
    assert!(explain_global_acd(&m, &[(vec![0.0; 3], 1)], 2, 0.5).is_err());
    assert!(explain_global_acd(&m, &[(vec![0.0; 3], 4)], 0, 0.5).is_err());
}

#[test]
fn acd_is_linear_in_shrinkage() {
    let m = fitted(21, 4, 3);
    let mut doubled = MimicEnsemble::from_parts(
        m.dim(),
        2.0 * m.shrinkage(),
        m.forests().to_vec(),
        m.fitted_at(),
    )
    .unwrap();
    doubled.set_fitted_at(m.fitted_at());
    let inst = vec![(vec![0.3, -0.1, 0.5, 0.2], 1), (vec![-0.4, 0.6, 0.1, -0.9], 2)];
    let a = explain_global_acd(&m, &inst, 0, 0.0).unwrap();
    let b = explain_global_acd(&doubled, &inst, 0, 0.0).unwrap();
    for (p, q) in a.pairs.iter().zip(&b.pairs) {
        for (x, y) in p.acd.iter().zip(&q.acd) {
            assert!((2.0 * x - y).abs() < 1e-9);
        }
    }
}

fn growing(step: u64, gap: f64) -> MimicEnsemble {
    MimicEnsemble::from_parts(
        4,
        1.0,
        vec![
            forest(0.0, vec![stump(2, 0.0, 0.0, -gap, gap), stump(0, 0.0, 0.0, -0.1, 0.1)]),
            forest(0.0, vec![]),
        ],
        step,
    )
    .unwrap()
}

#[test]
fn aafc_tracks_a_planted_growing_split() {
    let snaps: Vec<_> = (1..=5).map(|k| growing(100 * k, k as f64)).collect();
    let probe = vec![vec![1.0, 1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0, -1.0]];
    let series = explain_evolution_aafc(&snaps, &probe, 0, 2).unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0].feature, 2);
    assert_eq!(series[0].stamps, vec![100, 200, 300, 400, 500]);
    assert_eq!(series[0].values, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(series[1].feature, 0);
    assert!(series[1].values.iter().all(|v| (v - 0.1).abs() < 1e-12));

    let mut buf = Vec::new();
    write_aafc_report(&mut buf, &series, &names(4)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "stamp\tfeature_index\tfeature\taafc");
    assert_eq!(rows.len(), 1 + 2 * 5);
    assert_eq!(rows[5], "500\t2\tf2\t5.000000");
}

#[test]
fn aafc_of_identical_and_constant_snapshots_is_flat() {
    let probe = vec![vec![0.5, -0.5, 0.2, 0.0]];
    let same = vec![growing(1, 2.0), growing(2, 2.0), growing(3, 2.0)];
    for s in explain_evolution_aafc(&same, &probe, 0, 4).unwrap() {
        assert!(s.values.windows(2).all(|w| w[0] == w[1]));
    }
    let flat = vec![
        MimicEnsemble::constant(4, &[1.0, 2.0]),
        {
            let mut m = MimicEnsemble::constant(4, &[3.0, 2.0]);
            m.set_fitted_at(5);
            m
        },
    ];
    for s in explain_evolution_aafc(&flat, &probe, 1, 4).unwrap() {
        assert_eq!(s.values, vec![0.0, 0.0]);
    }
}

#[test]
fn evolution_requires_two_ordered_snapshots() {
    let probe = vec![vec![0.0; 4]];
    assert!(explain_evolution_aafc(&[growing(1, 1.0)], &probe, 0, 2).is_err());
    assert!(explain_evolution_aafc(&[growing(2, 1.0), growing(2, 1.0)], &probe, 0, 2).is_err());
    assert!(explain_evolution_aafc(&[growing(1, 1.0), growing(2, 1.0)], &[], 0, 2).is_err());
}

#[test]
fn local_report_lists_only_retained_features() {
    let m = two_action();
    let e = explain_local(&m, &[0.0, 1.0, 0.0], 0, 1, DEFAULT_THRESHOLD).unwrap();
    let mut buf = Vec::new();
    write_local_report(&mut buf, &e, &names(3)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("# threshold\t0.5"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["feature_index\tfeature\tdelta", "1\tf1\t1.000000"]);
    assert!(write_local_report(&mut Vec::new(), &e, &names(1)).is_err());
}
