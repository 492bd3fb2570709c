//! A seeded random tabular MDP: exact Q* by value iteration, policy
//! evaluation and a sampled episode through the `Environment` interface.
//!
//! `cargo run --release --example oracle_mdp -- [seed]`

use xdqn::env::{Environment, OracleMdp};
use xdqn::seeded_rng;

fn main() -> xdqn::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mdp = OracleMdp::random(8, 3, seed)?;

    let q = mdp.value_iteration(0.95, 1e-12)?;
    println!("Q* at gamma 0.95 (Bellman residual {:.2e})", mdp.bellman_residual(&q, 0.95));
    for s in 0..8 {
        let row: Vec<String> = q.row(s).iter().map(|v| format!("{v:8.4}")).collect();
        println!("  s{s}: {}", row.join(" "));
    }

    // every state terminates with positive probability, so gamma = 1 is finite
    let greedy = mdp.value_iteration(1.0, 1e-12)?.greedy_policy();
    println!("optimal undiscounted policy {greedy:?}");
    println!("  expected return {:.4}", mdp.expected_return(&greedy, 1.0)?);
    for a in 0..3 {
        println!("  constant action {a}: {:.4}", mdp.expected_return(&[a; 8], 1.0)?);
    }

    let mut env = mdp.clone();
    let mut rng = seeded_rng(seed);
    let mut states = env.reset(&mut rng);
    let mut total = 0.0;
    let mut path = Vec::new();
    loop {
        let s = states[0].iter().position(|&x| x == 1.0).expect("one-hot");
        path.push(s);
        let out = env.step(&[greedy[s]], &mut rng)?;
        total += out.rewards[0];
        states = out.next_states;
        if out.done {
            break;
        }
    }
    println!("one greedy episode visits {path:?}, return {total:.4}");
    Ok(())
}
