//! Backpropagation against central finite differences on a small network,
//! followed by a few TD steps driving one Q-value to a fixed target.
//!
//! `cargo run --release --example gradient_check`

use rand::Rng;
use xdqn::qnet::TdSample;
use xdqn::{seeded_rng, QNetwork};

fn main() -> xdqn::Result<()> {
    let mut rng = seeded_rng(11);
    let mut net = QNetwork::new(4, &[6, 5], 3, &mut rng);
    let states: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let batch: Vec<TdSample> = states
        .iter()
        .enumerate()
        .map(|(i, s)| TdSample {
            state: s,
            action: i % 3,
            target: rng.gen_range(-2.0..2.0),
            weight: rng.gen_range(0.2..1.0),
        })
        .collect();

    let (_, analytic) = net.loss_and_gradient(&batch)?;
    let params = net.params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut probe = net.clone();
        let mut p = params.clone();
        p[i] += h;
        probe.set_params(&p);
        let up = probe.loss_and_gradient(&batch)?.0;
        p[i] -= 2.0 * h;
        probe.set_params(&p);
        let down = probe.loss_and_gradient(&batch)?.0;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic.0[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic.0[i] - numeric).abs() / scale);
    }
    println!("{} parameters, max relative gradient error {worst:.2e}", params.len());

    let s = vec![0.3, -0.2, 0.8, 0.1];
    let one = [TdSample {
        state: &s,
        action: 1,
        target: 2.5,
        weight: 1.0,
    }];
    for step in 0..=300 {
        let loss = net.td_step(&one, 1e-2)?;
        if step % 100 == 0 {
            println!("step {step:3}: loss {loss:.6}, Q(s,1) = {:.4}", net.forward(&s)?[1]);
        }
    }
    Ok(())
}
