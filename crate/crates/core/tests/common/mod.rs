//! Generators and independent oracles shared by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use xdqn::mimic::{ActionForest, Node, RegressionTree, Split};
use xdqn::qnet::TdSample;
use xdqn::replay::{PriorityParams, ReplayBuffer};
use xdqn::{seeded_rng, MimicEnsemble, QNetwork, Transition, XRng};

/// Random tree of depth at most `depth` with arbitrary node values.
pub fn random_tree(rng: &mut XRng, dim: usize, depth: usize) -> RegressionTree {
    fn grow(rng: &mut XRng, dim: usize, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node::leaf(rng.gen_range(-5.0..5.0), rng.gen_range(1..100)));
        if depth > 0 && rng.gen_bool(0.7) {
            let feature = rng.gen_range(0..dim);
            let threshold = rng.gen_range(-1.0..1.0);
            let left = grow(rng, dim, depth - 1, nodes);
            let right = grow(rng, dim, depth - 1, nodes);
            nodes[id].split = Some(Split {
                feature,
                threshold,
                left,
                right,
            });
        }
        id
    }
    let mut nodes = Vec::new();
    grow(rng, dim, depth, &mut nodes);
    RegressionTree::from_nodes(nodes).expect("well-formed tree")
}

pub fn random_ensemble(rng: &mut XRng, dim: usize, actions: usize) -> MimicEnsemble {
    let shrinkage = rng.gen_range(0.01..1.0);
    let forests = (0..actions)
        .map(|_| ActionForest {
            base: rng.gen_range(-10.0..10.0),
            trees: (0..rng.gen_range(0..12))
                .map(|_| {
                    let depth = rng.gen_range(0..6);
                    random_tree(rng, dim, depth)
                })
                .collect(),
            fallback: false,
        })
        .collect();
    MimicEnsemble::from_parts(dim, shrinkage, forests, 0).expect("valid ensemble")
}

pub fn random_state(rng: &mut XRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

/// Worst `|baseline + Σ contributions − prediction|` over `n` random triples.
pub fn additivity_worst(seed: u64, n: usize) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let dim = rng.gen_range(1..8);
        let actions = rng.gen_range(1..5);
        let m = random_ensemble(&mut rng, dim, actions);
        let s = random_state(&mut rng, dim);
        let a = rng.gen_range(0..actions);
        let c = m.contributions(&s, a).unwrap();
        let pred = m.predict(&s, a).unwrap();
        worst = worst.max((c.baseline + c.contributions.iter().sum::<f64>() - pred).abs());
    }
    worst
}

/// Exact comparison of `a_num / a_den` and `b_num / b_den` (dens > 0).
fn less(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// Exhaustive best split for integer targets, comparing child SSEs as exact
/// fractions. Ties keep the lowest feature, then the lowest threshold.
pub fn brute_force_split(x: &[Vec<f64>], y: &[i64]) -> Option<(usize, f64)> {
    let n = x.len();
    let dim = x.first()?.len();
    let sum_sq: i128 = y.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let total: i128 = y.iter().map(|&v| v as i128).sum();
    let mut best: Option<((i128, i128), usize, f64)> = None;
    for f in 0..dim {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let (mut nl, mut sl) = (0i128, 0i128);
            for (r, &v) in x.iter().zip(y) {
                if r[f] <= threshold {
                    nl += 1;
                    sl += v as i128;
                }
            }
            let nr = n as i128 - nl;
            let sr = total - sl;
            // SSE = Σy² − sl²/nl − sr²/nr as one fraction over nl·nr
            let sse = (sum_sq * nl * nr - sl * sl * nr - sr * sr * nl, nl * nr);
            if best.map_or(true, |b| less(sse, b.0)) {
                best = Some((sse, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// One random node dataset: integer targets, features mixing coarse integer
/// grids (many ties) and continuous values.
pub fn split_case(rng: &mut XRng) -> (Vec<Vec<f64>>, Vec<i64>) {
    let n = rng.gen_range(2..=200);
    let dim = rng.gen_range(1..=6);
    let grid: Vec<bool> = (0..dim).map(|_| rng.gen_bool(0.5)).collect();
    let x = (0..n)
        .map(|_| {
            (0..dim)
                .map(|f| {
                    if grid[f] {
                        rng.gen_range(0..5) as f64
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let spread = if rng.gen_bool(0.5) { 3 } else { 1000 };
    let y = (0..n).map(|_| rng.gen_range(-spread..=spread)).collect();
    (x, y)
}

/// Number of mismatches between `best_split` and the brute force over
/// `cases` random datasets.
pub fn split_mismatches(seed: u64, cases: usize) -> usize {
    let mut rng = seeded_rng(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let (x, y) = split_case(&mut rng);
        let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let got = xdqn::mimic::best_split(&x, &targets).map(|c| (c.feature, c.threshold));
        if got != brute_force_split(&x, &y) {
            bad += 1;
        }
    }
    bad
}

/// `|a − n| / max(|a|, |n|, 1e-8)`: relative, with an absolute floor for
/// entries that are zero on both sides.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Max relative error between backpropagation and central differences on a
/// random small network and batch.
pub fn gradient_case(rng: &mut XRng) -> f64 {
    let input = rng.gen_range(1..=5);
    let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=6)).collect();
    let actions = rng.gen_range(1..=4);
    let mut net = QNetwork::new(input, &hidden, actions, rng);
    // random biases too: zero biases behind a dead unit sit exactly on a
    // ReLU kink, where no derivative exists
    let random: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    net.set_params(&random);
    let states: Vec<Vec<f64>> = (0..rng.gen_range(1..=6))
        .map(|_| (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let batch: Vec<TdSample> = states
        .iter()
        .map(|s| TdSample {
            state: s,
            action: rng.gen_range(0..actions),
            target: rng.gen_range(-3.0..3.0),
            weight: rng.gen_range(0.1..1.0),
        })
        .collect();
    let (_, grad) = net.loss_and_gradient(&batch).unwrap();
    let params = net.params();
    let h = 1e-6;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        probe.set_params(&p);
        let up = probe.loss_and_gradient(&batch).unwrap().0;
        p[i] = params[i] - h;
        probe.set_params(&p);
        let down = probe.loss_and_gradient(&batch).unwrap().0;
        worst = worst.max(relative_error(grad.0[i], (up - down) / (2.0 * h)));
    }
    worst
}

pub fn transition(dim: usize, stamp: u64) -> Transition {
    Transition {
        state: vec![stamp as f64; dim],
        action: 0,
        reward: 0.0,
        next_state: vec![0.0; dim],
        terminal: false,
        stored_at: stamp,
    }
}

/// Buffer of `priorities.len()` transitions (stamps 0..) whose leaves hold
/// exactly `priorities` (alpha 1, epsilon 0).
pub fn fixed_priority_buffer(priorities: &[f64]) -> ReplayBuffer {
    let params = PriorityParams {
        alpha: 1.0,
        beta: 0.4,
        epsilon: 0.0,
    };
    let mut buf = ReplayBuffer::new(priorities.len(), 1, params);
    for stamp in 0..priorities.len() as u64 {
        buf.push(transition(1, stamp), 0.0).unwrap();
    }
    let handles: Vec<_> = (0..priorities.len()).map(|i| buf.handle(i).unwrap()).collect();
    buf.update_priorities(&handles, priorities);
    buf
}

/// Pearson chi-square p-value of prioritized draws against `p_i / Σp`.
pub fn chi_square_pvalue(priorities: &[f64], batches: usize, batch: usize, seed: u64) -> f64 {
    let buf = fixed_priority_buffer(priorities);
    let mut rng = seeded_rng(seed);
    let mut counts = vec![0u64; priorities.len()];
    for _ in 0..batches {
        for s in buf.sample_prioritized(batch, &mut rng).unwrap() {
            counts[s.transition.stored_at as usize] += 1;
        }
    }
    let total_p: f64 = priorities.iter().sum();
    let draws = (batches * batch) as f64;
    let stat: f64 = counts
        .iter()
        .zip(priorities)
        .map(|(&c, &p)| {
            let e = draws * p / total_p;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((priorities.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Worst relative sum-tree audit after `ops` random pushes, priority updates
/// and samples on a small ring.
pub fn sum_tree_audit(seed: u64, ops: usize) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut buf = ReplayBuffer::new(257, 2, PriorityParams::default());
    let mut stamp = 0u64;
    let mut worst: f64 = 0.0;
    for _ in 0..ops {
        match rng.gen_range(0..3) {
            0 => {
                buf.push(transition(2, stamp), rng.gen_range(0.0..10.0)).unwrap();
                stamp += rng.gen_range(0..3);
            }
            1 if buf.len() >= 8 => {
                let handles: Vec<_> = buf
                    .sample_prioritized(8, &mut rng)
                    .unwrap()
                    .iter()
                    .map(|s| s.index)
                    .collect();
                let errors: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..20.0)).collect();
                buf.update_priorities(&handles, &errors);
            }
            _ if !buf.is_empty() => {
                let i = rng.gen_range(0..buf.len());
                let h = buf.handle(i).unwrap();
                buf.update_priorities(&[h], &[rng.gen_range(0.0..1e3)]);
            }
            _ => {}
        }
        worst = worst.max(buf.audit());
    }
    worst
}

/// Exhaustive recency-window check: every window size and query step over a
/// ring with irregular stamps returns exactly the transitions with
/// `stored_at > step − window`. Returns the number of violations.
pub fn recency_window_violations() -> usize {
    let mut rng = seeded_rng(41);
    let mut buf = ReplayBuffer::new(20, 1, PriorityParams::default());
    let mut stamp = 0;
    let mut bad = 0;
    for _ in 0..45 {
        buf.push(transition(1, stamp), 1.0).unwrap();
        stamp += rng.gen_range(0..3);
        let latest = buf.latest_stamp().unwrap();
        for step in latest..latest + 4 {
            for window in 0..=step + 2 {
                let expect: Vec<u64> = buf
                    .iter()
                    .map(|t| t.stored_at)
                    .filter(|&s| s as i128 > step as i128 - window as i128)
                    .collect();
                if buf.window_len(window, step) != expect.len() {
                    bad += 1;
                    continue;
                }
                if expect.is_empty() {
                    continue;
                }
                let mut got: Vec<u64> = buf
                    .sample_recent_uniform(expect.len(), window, step, &mut rng)
                    .unwrap()
                    .iter()
                    .map(|t| t.stored_at)
                    .collect();
                got.sort_unstable();
                let mut want = expect.clone();
                want.sort_unstable();
                if got != want {
                    bad += 1;
                }
            }
        }
    }
    bad
}
