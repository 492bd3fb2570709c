//! The command-line lifecycle on a short DCB-lite run: generate a scenario,
//! train, evaluate both policies and write all three explanation reports.
//!
//! `cargo run --release --example explain_pipeline`

use std::fs;
use std::process::ExitCode;

fn xdqn(args: &[&str]) -> Result<(), ExitCode> {
    println!("$ xdqn {}", args.join(" "));
    let code = xdqn::cli::run(std::iter::once("xdqn").chain(args.iter().copied()));
    if code == ExitCode::SUCCESS {
        Ok(())
    } else {
        Err(code)
    }
}

fn show(path: &std::path::Path, lines: usize) {
    println!("--- {}", path.display());
    let text = fs::read_to_string(path).unwrap_or_default();
    for l in text.lines().take(lines) {
        println!("{l}");
    }
}

fn main() -> Result<(), ExitCode> {
    let tmp = tempfile::tempdir().map_err(|_| ExitCode::FAILURE)?;
    let dir = tmp.path();
    let scenario = dir.join("scenario.toml");
    let config = dir.join("short.toml");
    let run = dir.join("run");
    // a short schedule: refits every 500 steps give several snapshots
    fs::write(
        &config,
        "episodes = 40\nupdate_frequency_steps = 500\nrecency_window = 1200\n",
    )
    .map_err(|_| ExitCode::FAILURE)?;
    let (s, c, r) = (
        scenario.to_str().unwrap(),
        config.to_str().unwrap(),
        run.to_str().unwrap(),
    );

    xdqn(&["genscenario", "--flights", "30", "--sectors", "5", "--seed", "2", "--out", s])?;
    xdqn(&["train", "--scenario", s, "--config", c, "--seed", "2", "--out", r])?;
    xdqn(&["evaluate", "--out", r, "--policy", "qnet", "--episodes", "3"])?;
    xdqn(&["evaluate", "--out", r, "--policy", "mimic", "--episodes", "3"])?;
    xdqn(&["explain", "--out", r, "--mode", "global", "--reference-action", "0"])?;
    xdqn(&["explain", "--out", r, "--mode", "local", "--action-pair", "0,5", "--instances", "1"])?;
    xdqn(&["explain", "--out", r, "--mode", "evolution", "--reference-action", "0", "--top-n", "3"])?;

    let reports = run.join("reports");
    show(&reports.join("acd_ref0.tsv"), 20);
    show(&reports.join("local_0_5_000.tsv"), 12);
    show(&reports.join("aafc_action0.tsv"), 12);
    show(&run.join("manifest.json"), 12);
    Ok(())
}
