//! Generate a DCB-lite scenario, inspect its hotspots and state features, and
//! play one episode with a hand-written delay rule.
//!
//! `cargo run --release --example dcb_scenario -- [seed]`

use xdqn::env::{generate_scenario, Congestion, DcbEnv, Environment};
use xdqn::seeded_rng;

fn main() -> xdqn::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = generate_scenario(30, 5, Congestion::Medium, seed)?;
    println!(
        "{} flights, {} sectors, horizon {} min, periods of {} min",
        scenario.flights.len(),
        scenario.sectors.len(),
        scenario.horizon_minutes(),
        scenario.period_length
    );
    for s in &scenario.sectors {
        println!("  {} capacity {}", s.name, s.capacity);
    }

    let mut env = DcbEnv::new(scenario)?;
    let mut rng = seeded_rng(seed);
    let states = env.reset(&mut rng);
    println!("hotspots with no delays: {}", env.hotspot_cells());

    let names = env.feature_names();
    let first = (0..states.len()).find(|&i| env.hotspot_minutes(i) > 0).unwrap_or(0);
    println!("features of flight {first}:");
    for (n, v) in names.iter().zip(&states[first]) {
        println!("  {n:30} {v:8.4}");
    }

    // delay by 5 minutes whenever the flight still sits in a hotspot
    let mut total = 0.0;
    loop {
        let active = env.active();
        let actions: Vec<usize> = (0..active.len())
            .map(|i| if active[i] && env.hotspot_minutes(i) > 0 { 5 } else { 0 })
            .collect();
        let out = env.step(&actions, &mut rng)?;
        total += out.rewards.iter().sum::<f64>();
        if out.done {
            break;
        }
    }
    let m = env.episode_metrics();
    println!(
        "rule-based episode: {} hotspots left, {} delayed flights, average delay {:.2} min, return {total:.1}",
        m.final_hotspots, m.delayed_flights, m.avg_delay
    );
    Ok(())
}
