//! Train on a generated DCB-lite scenario with the mimic target and with the
//! frozen-copy baseline, then compare exploitation performance.
//!
//! `cargo run --release --example train_dcb -- [seed] [config.toml]`

use std::time::Instant;

use xdqn::env::{generate_scenario, Congestion, DcbEnv, Environment};
use xdqn::metrics::play_performance;
use xdqn::trainer::{exploit, train, NoObserver, Policy};
use xdqn::{MimicEnsemble, TargetKind, TrainerConfig};

fn main() -> xdqn::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let base = match std::env::args().nth(2) {
        Some(path) => TrainerConfig::load(std::path::Path::new(&path))?,
        None => TrainerConfig::dcb_preset(),
    };
    let scenario = generate_scenario(50, 6, Congestion::Medium, seed)?;
    let mut env = DcbEnv::new(scenario)?;
    let spec = env.spec().clone();
    let eval_episodes = 20;

    let zero = MimicEnsemble::sentinel(spec.state_dim, spec.action_count);
    let idle = play_performance(&exploit(&mut env, Policy::Mimic(&zero), 1, 0.0, seed)?)?;
    println!("no-delay policy: {:.2} hotspots", idle.final_hotspots.mean);

    for target in [TargetKind::Mimic, TargetKind::FrozenCopy] {
        let cfg = TrainerConfig { seed, target, ..base.clone() };
        let started = Instant::now();
        let out = train(&mut env, &cfg, &mut NoObserver)?;
        let q = play_performance(&exploit(&mut env, Policy::QNet(&out.qnet), eval_episodes, 0.04, seed)?)?;
        print!(
            "{target:?}: {} steps, {:.1?}; network policy {:.2} hotspots, {:.2} min delay, {:.2} delayed",
            out.global_steps,
            started.elapsed(),
            q.final_hotspots.mean,
            q.avg_delay.mean,
            q.delayed_flights.mean
        );
        if target == TargetKind::Mimic {
            let m = play_performance(&exploit(&mut env, Policy::Mimic(&out.mimic), eval_episodes, 0.04, seed)?)?;
            let f = out.snapshots.last().and_then(|s| s.fidelity.clone());
            print!(
                "; mimic policy {:.2} hotspots, {:.2} min delay",
                m.final_hotspots.mean, m.avg_delay.mean
            );
            if let Some(f) = f {
                print!("; fidelity accuracy {:.3}, relative MAE {:.4}", f.accuracy, f.relative_mae());
            }
        }
        println!();
    }
    Ok(())
}
