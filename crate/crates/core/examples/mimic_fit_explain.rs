//! Fit a per-action boosted forest to a known Q-function, check that feature
//! contributions add up to each prediction, and read local and global
//! explanations off the fitted trees.
//!
//! `cargo run --release --example mimic_fit_explain`

use rand::Rng;
use xdqn::explain::{explain_global_acd, explain_local, write_acd_report, write_local_report};
use xdqn::mimic::MimicSample;
use xdqn::{seeded_rng, MimicConfig, MimicEnsemble};

/// Action 0 likes feature 0, action 1 dislikes feature 2, action 2 is flat.
fn q(s: &[f64], a: usize) -> f64 {
    match a {
        0 => 3.0 * s[0] + 0.5 * s[1],
        1 => -2.0 * s[2] + 1.0,
        _ => 0.5,
    }
}

fn main() -> xdqn::Result<()> {
    let mut rng = seeded_rng(5);
    let states: Vec<Vec<f64>> = (0..1500)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let data: Vec<MimicSample> = states
        .iter()
        .flat_map(|s| {
            (0..3).map(move |a| MimicSample {
                state: s.clone(),
                action: a,
                target: q(s, a),
            })
        })
        .collect();
    let cfg = MimicConfig {
        n_stages: 80,
        max_depth: 3,
        shrinkage: 0.2,
        ..MimicConfig::default()
    };
    let (mimic, report) = MimicEnsemble::fit(&data, 4, 3, &cfg)?;
    println!(
        "fitted {} rows per action, train MSE {:.5}",
        report.rows_per_action[0], report.train_mse
    );

    let names: Vec<String> = ["speed", "load", "queue", "noise"].map(String::from).to_vec();
    let worst = states
        .iter()
        .flat_map(|s| (0..3).map(move |a| (s, a)))
        .map(|(s, a)| mimic.contributions(s, a).map(|c| c.additivity_gap()))
        .collect::<xdqn::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("largest |baseline + sum(contributions) - prediction| = {worst:.2e}");

    println!("\nfirst tree of action 1:");
    let first = MimicEnsemble::from_parts(
        4,
        mimic.shrinkage(),
        vec![xdqn::mimic::ActionForest {
            trees: mimic.forests()[1].trees[..1].to_vec(),
            ..mimic.forests()[1].clone()
        }],
        0,
    )?;
    print!("{}", first.dump_text(Some(&names)));

    let s = vec![0.9, 0.0, 0.7, 0.0];
    let local = explain_local(&mimic, &s, 0, 1, 0.5)?;
    println!("\nwhy action 0 over action 1 at {s:?}:");
    write_local_report(&mut std::io::stdout(), &local, &names)?;

    let instances: Vec<(Vec<f64>, usize)> = states
        .iter()
        .take(300)
        .map(|s| Ok((s.clone(), mimic.best_action(s)?.0)))
        .collect::<xdqn::Result<_>>()?;
    let acd = explain_global_acd(&mimic, &instances, 2, 0.3)?;
    println!("\naverage contribution differences against action 2:");
    write_acd_report(&mut std::io::stdout(), &acd, &names)?;
    Ok(())
}
