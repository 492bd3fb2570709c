//! Train on a random 16-state MDP and compare the mimic's greedy policy with
//! the value-iteration optimum.
//!
//! `cargo run --release --example train_oracle -- [seed] [config.toml]`

use xdqn::env::{Environment, OracleMdp};
use xdqn::trainer::{greedy_table, train, NoObserver};
use xdqn::TrainerConfig;

fn main() -> xdqn::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut env = OracleMdp::random(16, 3, seed)?;
    let base = match std::env::args().nth(2) {
        Some(path) => TrainerConfig::load(std::path::Path::new(&path))?,
        None => TrainerConfig::oracle_preset(),
    };
    let cfg = TrainerConfig { seed, ..base };
    let started = std::time::Instant::now();
    let out = train(&mut env, &cfg, &mut NoObserver)?;
    let states = env.enumerate_states().expect("finite");

    let optimum = env.optimal_return(1.0)?;
    let mimic_ret = env.expected_return(&greedy_table(&states, &out.mimic)?, 1.0)?;
    let qnet_ret = env.expected_return(&greedy_table(&states, &out.qnet)?, 1.0)?;
    let worst = (0..3)
        .map(|a| env.expected_return(&[a; 16], 1.0))
        .collect::<xdqn::Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    println!("seed {seed}: {} global steps, {} refits, {:.1?}", out.global_steps, out.snapshots.len(), started.elapsed());
    println!("optimal return        {optimum:.4}");
    println!("mimic greedy return   {mimic_ret:.4} ({:+.2}%)", 100.0 * (mimic_ret - optimum) / optimum);
    println!("network greedy return {qnet_ret:.4}");
    println!("worst constant policy {worst:.4}");
    let q_star = env.value_iteration(cfg.gamma, 1e-10)?;
    let mut err = 0.0;
    for (s, x) in states.iter().enumerate() {
        let q = out.qnet.forward(x)?;
        for (a, v) in q.iter().enumerate() {
            err += (v - q_star.get(s, a)).abs();
        }
    }
    println!("network vs Q* mean abs error {:.4}", err / (states.len() * 3) as f64);
    if let Some(f) = out.snapshots.last().and_then(|s| s.fidelity.as_ref()) {
        println!(
            "final refit: accuracy {:.3}, max MAE {:.4}, q_scale {:.3}, relative {:.4}",
            f.accuracy,
            f.max_mae(),
            f.q_scale,
            f.relative_mae()
        );
    }
    Ok(())
}
