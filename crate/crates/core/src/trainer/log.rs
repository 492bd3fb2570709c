//! Tab-separated per-episode metrics log.
//!
//! Columns, in order: episode index, undiscounted return summed over agents,
//! mean TD loss (`NaN` before updates start), ε, final hotspot cells, average
//! delay per flight, flights delayed more than four minutes, global step of
//! the latest target refresh, largest per-action fidelity MAE at that
//! refresh, fidelity accuracy at that refresh. Absent values are `-`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::metrics::EpisodeStats;

pub const METRICS_HEADER: &str = "episode\treturn\tloss_mean\tepsilon\thotspots\tavg_delay\tdelayed_flights\tlast_refit_step\tfidelity_mae\tfidelity_accuracy";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn format_log_line(s: &EpisodeStats) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        s.episode,
        s.return_undiscounted,
        s.loss_mean,
        s.epsilon,
        s.metrics.final_hotspots,
        s.metrics.avg_delay,
        s.metrics.delayed_flights,
        opt(s.last_refit_step),
        opt(s.fidelity_mae),
        opt(s.fidelity_accuracy),
    )
}

pub fn write_metrics_log(stats: &[EpisodeStats], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{METRICS_HEADER}")?;
    for s in stats {
        writeln!(w, "{}", format_log_line(s))?;
    }
    w.flush()?;
    Ok(())
}
