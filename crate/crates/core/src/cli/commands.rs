use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::run_dir::*;
use super::{EvaluateArgs, ExplainArgs, ExplainMode, GenArgs, PolicyKind, TrainArgs};
use crate::config::{TargetKind, TrainerConfig};
use crate::env::{generate_scenario, DcbScenario, Environment};
use crate::error::{Error, Result};
use crate::explain::{
    explain_evolution_aafc, explain_global_acd, explain_local, write_aafc_report, write_acd_report,
    write_local_report,
};
use crate::metrics::{fidelity_report, play_performance, FidelityReport, PlaySummary};
use crate::mimic::MimicEnsemble;
use crate::qnet::QNetwork;
use crate::trainer::{
    exploit, format_log_line, train, visited_instances, Policy, RefitEvent, TrainObserver,
    METRICS_HEADER,
};

/// `preset` with the keys of the TOML file at `path` overlaid; nested tables
/// merge key by key. Unknown keys are rejected by name.
pub fn load_config(path: Option<&Path>, preset: TrainerConfig) -> Result<TrainerConfig> {
    let Some(path) = path else {
        return Ok(preset);
    };
    let text = fs::read_to_string(path).map_err(|e| missing(path, e))?;
    let overrides: toml::Table = text
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let mut base: toml::Table = preset.to_toml()?.parse()?;
    merge(&mut base, overrides);
    TrainerConfig::from_toml(&toml::to_string(&base)?)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn require(dir: &Path, rel: &str) -> Result<std::path::PathBuf> {
    let path = dir.join(rel);
    if !path.is_file() {
        return Err(Error::InvalidArgument(format!(
            "missing artifact {} in run directory {}",
            rel,
            dir.display()
        )));
    }
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct RefitRecord {
    step: u64,
    episode: u64,
    scheduled_at: u64,
    train_mse: Option<f64>,
    fidelity: Option<FidelityReport>,
    snapshot: Option<String>,
}

/// Saves every mimic snapshot as soon as it is fitted.
struct SnapshotWriter<'a> {
    dir: &'a Path,
    refits: Vec<RefitRecord>,
}

impl TrainObserver for SnapshotWriter<'_> {
    fn on_refit(&mut self, e: &RefitEvent<'_>) -> Result<()> {
        let snapshot = match e.mimic {
            Some(m) => {
                let name = snapshot_name(e.step);
                m.save(&self.dir.join(&name))?;
                Some(name)
            }
            None => None,
        };
        self.refits.push(RefitRecord {
            step: e.step,
            episode: e.episode,
            scheduled_at: e.scheduled_at,
            train_mse: e.fit.map(|f| f.train_mse),
            fidelity: e.fidelity.cloned(),
            snapshot,
        });
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn write_refits(dir: &Path, refits: &[RefitRecord]) -> Result<()> {
    create(&dir.join(METRICS).join("refits.tsv"), |w| {
        writeln!(w, "step\tepisode\tscheduled_at\ttrain_mse\tmae_max\trelative_mae\taccuracy\tq_scale\tsnapshot")?;
        for r in refits {
            let f = r.fidelity.as_ref();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.step,
                r.episode,
                r.scheduled_at,
                opt(r.train_mse),
                opt(f.map(|f| f.max_mae())),
                opt(f.map(|f| f.relative_mae())),
                opt(f.map(|f| f.accuracy)),
                opt(f.map(|f| f.q_scale)),
                r.snapshot.as_deref().unwrap_or("-")
            )?;
        }
        Ok(())
    })?;
    write_json(&dir.join(METRICS).join("refits.json"), &refits)
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    episodes: u64,
    global_steps: u64,
    td_updates: u64,
    refits: usize,
    deferred_refits: Vec<u64>,
    skipped_non_finite: u64,
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    // everything that can fail on input is checked before the run directory
    // is created
    let scenario_bytes = if a.scenario == "oracle" {
        None
    } else {
        let path = Path::new(&a.scenario);
        let bytes = fs::read(path).map_err(|e| missing(path, e))?;
        DcbScenario::from_toml(std::str::from_utf8(&bytes).map_err(|e| {
            Error::InvalidScenario(format!("{}: {e}", path.display()))
        })?)?;
        Some(bytes)
    };
    let preset = match scenario_bytes {
        None => TrainerConfig::oracle_preset(),
        Some(_) => TrainerConfig::dcb_preset(),
    };
    let mut cfg = load_config(a.config.as_deref(), preset)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let record = match scenario_bytes {
        None => EnvRecord::Oracle {
            states: ORACLE_STATES,
            actions: ORACLE_ACTIONS,
            seed: cfg.seed,
        },
        Some(_) => EnvRecord::Dcb {
            scenario: SCENARIO.into(),
        },
    };
    let dir = a.out.as_path();
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(Error::InvalidArgument(format!(
            "output directory {} is not empty",
            dir.display()
        )));
    }
    for sub in [MODELS, SNAPSHOTS, METRICS, REPORTS] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let cfg_text = cfg.to_toml()?;
    fs::write(dir.join(CONFIG), &cfg_text)?;
    write_json(&dir.join(ENVIRONMENT), &record)?;
    if let Some(bytes) = &scenario_bytes {
        fs::write(dir.join(SCENARIO), bytes)?;
    }
    let mut manifest = RunManifest::new(
        cfg.seed,
        ScenarioSource {
            source: a.scenario.clone(),
            sha256: scenario_bytes.as_deref().map(sha256_hex),
        },
        sha256_hex(cfg_text.as_bytes()),
    );
    manifest.store(dir)?;

    let mut env = record.open(dir)?;
    let mut observer = SnapshotWriter {
        dir,
        refits: Vec::new(),
    };
    let out = train(env.as_mut(), &cfg, &mut observer)?;
    out.qnet.save(&dir.join(QNET_FILE))?;
    if cfg.target == TargetKind::Mimic {
        out.mimic.save(&dir.join(MIMIC_FILE))?;
    }
    create(&dir.join(METRICS_LOG), |w| {
        writeln!(w, "{METRICS_HEADER}")?;
        for s in &out.log {
            writeln!(w, "{}", format_log_line(s))?;
        }
        Ok(())
    })?;
    write_refits(dir, &observer.refits)?;
    write_json(
        &dir.join(METRICS).join("summary.json"),
        &TrainSummary {
            episodes: out.log.len() as u64,
            global_steps: out.global_steps,
            td_updates: out.td_updates,
            refits: observer.refits.len(),
            deferred_refits: out.deferrals.clone(),
            skipped_non_finite: out.skipped_non_finite,
        },
    )?;
    manifest
        .timings
        .insert("train".into(), started.elapsed().as_secs_f64());
    manifest.complete = true;
    manifest.store(dir)?;
    println!(
        "trained {} episodes, {} steps, {} refits -> {}",
        out.log.len(),
        out.global_steps,
        observer.refits.len(),
        dir.display()
    );
    Ok(())
}

struct Run {
    manifest: RunManifest,
    cfg: TrainerConfig,
    env: Box<dyn Environment>,
}

fn open_run(dir: &Path) -> Result<Run> {
    let manifest = RunManifest::load(dir)?;
    if !manifest.complete {
        return Err(Error::InvalidArgument(format!(
            "run in {} did not complete",
            dir.display()
        )));
    }
    let cfg = TrainerConfig::load(&require(dir, CONFIG)?)?;
    let env = EnvRecord::load(dir)?.open(dir)?;
    Ok(Run { manifest, cfg, env })
}

fn load_mimic(dir: &Path) -> Result<MimicEnsemble> {
    MimicEnsemble::load(&require(dir, MIMIC_FILE)?)
}

#[derive(Debug, Serialize)]
struct EvaluationRecord {
    policy: &'static str,
    episodes: u64,
    epsilon: f64,
    seed: u64,
    summary: PlaySummary,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let dir = a.out.as_path();
    let mut run = open_run(dir)?;
    let qnet = QNetwork::load(&require(dir, QNET_FILE)?)?;
    let mimic = match a.policy {
        PolicyKind::Mimic => Some(load_mimic(dir)?),
        PolicyKind::Qnet => None,
    };
    let (name, policy) = match &mimic {
        Some(m) => ("mimic", Policy::Mimic(m)),
        None => ("qnet", Policy::QNet(&qnet)),
    };
    let seed = a.seed.unwrap_or(run.cfg.seed);
    let stats = exploit(run.env.as_mut(), policy, a.episodes, a.epsilon, seed)?;
    let summary = play_performance(&stats)?;
    create(&dir.join(REPORTS).join(format!("evaluate_{name}.tsv")), |w| {
        writeln!(w, "{METRICS_HEADER}")?;
        for s in &stats {
            writeln!(w, "{}", format_log_line(s))?;
        }
        Ok(())
    })?;
    write_json(
        &dir.join(REPORTS).join(format!("evaluate_{name}.json")),
        &EvaluationRecord {
            policy: name,
            episodes: a.episodes,
            epsilon: a.epsilon,
            seed,
            summary,
        },
    )?;
    println!(
        "{name}: return {:.4} ± {:.4}, hotspots {:.2}, avg delay {:.2}",
        summary.return_undiscounted.mean,
        summary.return_undiscounted.std,
        summary.final_hotspots.mean,
        summary.avg_delay.mean
    );
    if let Some(m) = &mimic {
        let probe = match run.env.enumerate_states() {
            Some(states) => states,
            None => {
                let mut s: Vec<Vec<f64>> =
                    visited_instances(run.env.as_mut(), Policy::Mimic(m), a.episodes, seed)?
                        .into_iter()
                        .map(|(s, _)| s)
                        .collect();
                s.truncate(run.cfg.fidelity_probe_size);
                s
            }
        };
        let fidelity = fidelity_report(&probe, &qnet, m, m.fitted_at())?;
        println!(
            "fidelity: accuracy {:.4}, max MAE {:.4}, q scale {:.4} over {} states",
            fidelity.accuracy,
            fidelity.max_mae(),
            fidelity.q_scale,
            fidelity.samples
        );
        write_json(&dir.join(REPORTS).join("fidelity_mimic.json"), &fidelity)?;
    }
    run.manifest
        .timings
        .insert(format!("evaluate_{name}"), started.elapsed().as_secs_f64());
    run.manifest.store(dir)
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let started = Instant::now();
    let dir = a.out.as_path();
    let mut run = open_run(dir)?;
    let names = run.env.feature_names();
    let seed = a.seed.unwrap_or(run.cfg.seed);
    let reports = dir.join(REPORTS);
    let mut written = Vec::new();
    match a.mode {
        ExplainMode::Local => {
            let (a1, a2) = a.action_pair;
            if a1 == a2 {
                return Err(Error::InvalidArgument(format!(
                    "--action-pair needs two different actions, got {a1},{a2}"
                )));
            }
            let mimic = load_mimic(dir)?;
            let inst = visited_instances(run.env.as_mut(), Policy::Mimic(&mimic), a.episodes, seed)?;
            // instances where a1 was chosen come first
            let chosen = inst
                .iter()
                .filter(|(_, b)| *b == a1)
                .chain(inst.iter().filter(|(_, b)| *b != a1))
                .take(a.instances);
            for (k, (state, _)) in chosen.enumerate() {
                let e = explain_local(&mimic, state, a1, a2, a.threshold)?;
                let path = reports.join(format!("local_{a1}_{a2}_{k:03}.tsv"));
                create(&path, |w| write_local_report(w, &e, &names))?;
                written.push(path);
            }
        }
        ExplainMode::Global => {
            let mimic = load_mimic(dir)?;
            let inst = visited_instances(run.env.as_mut(), Policy::Mimic(&mimic), a.episodes, seed)?;
            let report = explain_global_acd(&mimic, &inst, a.reference_action, a.threshold)?;
            let path = reports.join(format!("acd_ref{}.tsv", a.reference_action));
            create(&path, |w| write_acd_report(w, &report, &names))?;
            written.push(path);
        }
        ExplainMode::Evolution => {
            let snaps = load_snapshots(dir)?;
            if snaps.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "evolution needs at least 2 mimic snapshots, found {}",
                    snaps.len()
                )));
            }
            let last = snaps.last().expect("two or more snapshots");
            let probe: Vec<Vec<f64>> =
                visited_instances(run.env.as_mut(), Policy::Mimic(last), a.episodes, seed)?
                    .into_iter()
                    .map(|(s, _)| s)
                    .collect();
            let series = explain_evolution_aafc(&snaps, &probe, a.reference_action, a.top_n)?;
            let path = reports.join(format!("aafc_action{}.tsv", a.reference_action));
            create(&path, |w| write_aafc_report(w, &series, &names))?;
            written.push(path);
        }
    }
    for p in &written {
        println!("{}", p.display());
    }
    let mode = format!("explain_{:?}", a.mode).to_lowercase();
    run.manifest
        .timings
        .insert(mode, started.elapsed().as_secs_f64());
    run.manifest.store(dir)
}

pub fn cmd_genscenario(a: &GenArgs) -> Result<()> {
    let scenario = generate_scenario(a.flights, a.sectors, a.congestion, a.seed)?;
    scenario.save(&a.out)?;
    println!(
        "{} flights, {} sectors, {} congestion -> {}",
        a.flights,
        a.sectors,
        a.congestion,
        a.out.display()
    );
    Ok(())
}
