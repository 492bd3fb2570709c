//! Prioritized replay: fixed priorities, empirical sampling frequencies,
//! importance weights and the recency window used for mimic datasets.
//!
//! `cargo run --release --example replay_sampling`

use xdqn::replay::{PriorityParams, ReplayBuffer};
use xdqn::{seeded_rng, Transition};

fn transition(stamp: u64) -> Transition {
    Transition {
        state: vec![stamp as f64],
        action: 0,
        reward: 0.0,
        next_state: vec![0.0],
        terminal: false,
        stored_at: stamp,
    }
}

fn main() -> xdqn::Result<()> {
    let params = PriorityParams {
        alpha: 1.0,
        beta: 0.5,
        epsilon: 0.0,
    };
    let mut buf = ReplayBuffer::new(8, 1, params);
    for stamp in 0..8 {
        buf.push(transition(stamp), 1.0)?;
    }
    // TD errors 1..=8 give priorities 1..=8 with alpha 1
    let handles: Vec<_> = (0..8).map(|i| buf.handle(i).expect("stored")).collect();
    let errors: Vec<f64> = (1..=8).map(f64::from).collect();
    buf.update_priorities(&handles, &errors);
    println!("total priority {} (audit {:.1e})", buf.total_priority(), buf.audit());

    let mut rng = seeded_rng(3);
    let mut counts = [0u64; 8];
    let draws = 200_000;
    for _ in 0..draws / 8 {
        for s in buf.sample_prioritized(8, &mut rng)? {
            counts[s.transition.stored_at as usize] += 1;
        }
    }
    println!("stamp  expected  observed");
    for (i, c) in counts.iter().enumerate() {
        println!("{i:5}  {:8.4}  {:8.4}", (i + 1) as f64 / 36.0, *c as f64 / draws as f64);
    }

    let batch = buf.sample_prioritized(4, &mut rng)?;
    for s in &batch {
        println!("stamp {} weight {:.4}", s.transition.stored_at, s.weight);
    }

    let mut ring = ReplayBuffer::new(100, 1, PriorityParams::default());
    for stamp in 0..250 {
        ring.push(transition(stamp), 1.0)?;
    }
    let recent = ring.sample_recent_uniform(10, 20, 249, &mut rng)?;
    let stamps: Vec<u64> = recent.iter().map(|t| t.stored_at).collect();
    println!(
        "ring of 100 after 250 pushes holds {}..={}; the last 20 stamps up to 249 hold {} entries, sample {stamps:?}",
        ring.logical(0).expect("full").stored_at,
        ring.latest_stamp().expect("full"),
        ring.window_len(20, 249)
    );
    Ok(())
}
