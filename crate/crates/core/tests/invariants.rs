mod common;

use proptest::prelude::*;
use rand::Rng;
use xdqn::env::{generate_scenario, occupancy_by_scan, Congestion, DcbEnv, Environment};
use xdqn::explain::explain_global_acd;
use xdqn::metrics::fidelity_report;
use xdqn::mimic::{ActionForest, Node, RegressionTree};
use xdqn::{seeded_rng, MimicEnsemble, QNetwork};

fn congestion(i: u8) -> Congestion {
    [Congestion::Low, Congestion::Medium, Congestion::High][i as usize % 3]
}

/// Every tree node value multiplied by `c`; bases too.
fn scaled(m: &MimicEnsemble, c: f64) -> MimicEnsemble {
    let forests = m
        .forests()
        .iter()
        .map(|f| ActionForest {
            base: f.base * c,
            trees: f
                .trees
                .iter()
                .map(|t| {
                    let nodes: Vec<Node> = t
                        .nodes()
                        .iter()
                        .map(|n| Node {
                            value: n.value * c,
                            ..*n
                        })
                        .collect();
                    RegressionTree::from_nodes(nodes).unwrap()
                })
                .collect(),
            fallback: f.fallback,
        })
        .collect();
    MimicEnsemble::from_parts(m.dim(), m.shrinkage(), forests, m.fitted_at()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn incremental_occupancy_matches_minute_scan(
        seed in 0u64..10_000,
        flights in 6usize..30,
        level in 0u8..3,
        actions in proptest::collection::vec(0usize..11, 1..200),
    ) {
        let Ok(sc) = generate_scenario(flights, 4, congestion(level), seed) else {
            return Ok(());
        };
        let mut env = DcbEnv::new(sc.clone()).unwrap();
        let mut rng = seeded_rng(seed);
        env.reset(&mut rng);
        let mut it = actions.iter().cycle();
        loop {
            let active = env.active();
            let joint: Vec<usize> = active.iter().map(|&a| if a { *it.next().unwrap() } else { 0 }).collect();
            let out = env.step(&joint, &mut rng).unwrap();
            prop_assert_eq!(env.occupancy(), occupancy_by_scan(&sc, env.delays()));
            prop_assert!(env.delays().iter().all(|&d| d <= sc.max_delay));
            prop_assert!(out.rewards.iter().all(|r| *r <= 0.0));
            if out.done {
                break;
            }
        }
    }

    #[test]
    fn fidelity_is_permutation_invariant(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = seeded_rng(seed);
        let qnet = QNetwork::new(3, &[5], 3, &mut rng);
        let mimic = common::random_ensemble(&mut rng, 3, 3);
        let mut states: Vec<Vec<f64>> = (0..n).map(|_| common::random_state(&mut rng, 3)).collect();
        let a = fidelity_report(&states, &qnet, &mimic, 0).unwrap();
        states.reverse();
        states.rotate_left(n / 3);
        let b = fidelity_report(&states, &qnet, &mimic, 0).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        for (x, y) in a.mae.iter().zip(&b.mae) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn accuracy_ignores_a_common_output_shift(seed in any::<u64>(), c in -50.0f64..50.0) {
        let mut rng = seeded_rng(seed);
        let qnet = QNetwork::new(3, &[4], 4, &mut rng);
        let mimic = common::random_ensemble(&mut rng, 3, 4);
        let states: Vec<Vec<f64>> = (0..40).map(|_| common::random_state(&mut rng, 3)).collect();
        let mut shifted = qnet.clone();
        shifted.shift_outputs(c);
        let forests = mimic
            .forests()
            .iter()
            .map(|f| ActionForest { base: f.base + c, ..f.clone() })
            .collect();
        let mimic_shifted = MimicEnsemble::from_parts(3, mimic.shrinkage(), forests, 0).unwrap();
        let a = fidelity_report(&states, &qnet, &mimic, 0).unwrap();
        let b = fidelity_report(&states, &shifted, &mimic_shifted, 0).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        for (x, y) in a.mae.iter().zip(&b.mae) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn acd_is_linear_in_leaf_values(seed in any::<u64>(), c in -4.0f64..4.0) {
        let mut rng = seeded_rng(seed);
        let m = common::random_ensemble(&mut rng, 4, 3);
        let inst: Vec<(Vec<f64>, usize)> = (0..30)
            .map(|_| (common::random_state(&mut rng, 4), rng.gen_range(0..3)))
            .collect();
        prop_assume!(inst.iter().any(|(_, a)| *a != 0));
        let a = explain_global_acd(&m, &inst, 0, 0.0).unwrap();
        let b = explain_global_acd(&scaled(&m, c), &inst, 0, 0.0).unwrap();
        prop_assert_eq!(a.pairs.len(), b.pairs.len());
        for (p, q) in a.pairs.iter().zip(&b.pairs) {
            for (x, y) in p.acd.iter().zip(&q.acd) {
                prop_assert!((c * x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn contributions_add_up(seed in any::<u64>()) {
        prop_assert!(common::additivity_worst(seed, 20) < 1e-6);
    }

    #[test]
    fn splits_match_brute_force(seed in any::<u64>()) {
        prop_assert_eq!(common::split_mismatches(seed, 5), 0);
    }

    #[test]
    fn mimic_round_trips_bit_exactly(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let m = common::random_ensemble(&mut rng, 5, 3);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = MimicEnsemble::read_from(&mut buf.as_slice()).unwrap();
        for _ in 0..20 {
            let s = common::random_state(&mut rng, 5);
            for a in 0..3 {
                prop_assert_eq!(m.predict(&s, a).unwrap().to_bits(), back.predict(&s, a).unwrap().to_bits());
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = seeded_rng(2);
    for _ in 0..25 {
        assert!(common::gradient_case(&mut rng) < 1e-4);
    }
}

#[test]
fn sum_tree_root_matches_leaves() {
    assert!(common::sum_tree_audit(5, 3000) < 1e-9);
}

#[test]
fn recency_window_is_exact() {
    assert_eq!(common::recency_window_violations(), 0);
}

#[test]
fn sampling_frequencies_follow_priorities() {
    let p = common::chi_square_pvalue(&[1.0, 2.0, 3.0, 4.0, 10.0, 0.5], 20_000, 4, 8);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn uncapacitated_dcb_prefers_zero_delay() {
    // with unlimited capacity every delay only costs, so the best joint
    // action over 3 flights and 3 delays is all zeros
    let mut sc = generate_scenario(3, 2, Congestion::Medium, 4).unwrap();
    for s in &mut sc.sectors {
        s.capacity = u32::MAX;
    }
    let mut best = (f64::NEG_INFINITY, vec![]);
    for code in 0..27usize {
        let joint = vec![code % 3, code / 3 % 3, code / 9];
        let mut env = DcbEnv::new(sc.clone()).unwrap();
        let mut rng = seeded_rng(0);
        env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let active = env.active();
            let acts: Vec<usize> = (0..3).map(|i| if active[i] { joint[i] } else { 0 }).collect();
            let out = env.step(&acts, &mut rng).unwrap();
            total += out.rewards.iter().sum::<f64>();
            if out.done {
                break;
            }
        }
        if total > best.0 {
            best = (total, joint);
        }
    }
    assert_eq!(best, (0.0, vec![0, 0, 0]));
}
