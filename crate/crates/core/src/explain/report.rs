//! Tab-separated report writers. Lines starting with `#` are metadata; the
//! first non-`#` line of each file is the column header.

use std::io::Write;

use super::{AafcSeries, AcdReport, LocalExplanation};
use crate::error::{Error, Result};

/// Written at the top of every report.
pub const SIGN_CONVENTION: &str =
    "# sign: delta(a1,a2) = contrib(a1) - contrib(a2); positive favours the first action of the pair";

fn name<'a>(names: &'a [String], f: usize) -> Result<&'a str> {
    names.get(f).map(String::as_str).ok_or_else(|| {
        Error::InvalidArgument(format!("no feature name for index {f} ({} names)", names.len()))
    })
}

fn sign(v: f64) -> char {
    if v > 0.0 {
        '+'
    } else {
        '-'
    }
}

/// Global report: one `# pair r-a` block for every non-reference action,
/// including actions no instance selected (`instances 0`, no rows), then the
/// features most often significant per sign.
pub fn write_acd_report<W: Write>(out: &mut W, report: &AcdReport, names: &[String]) -> Result<()> {
    writeln!(out, "{SIGN_CONVENTION}")?;
    writeln!(out, "# reference_action\t{}", report.reference)?;
    writeln!(out, "# threshold\t{}", report.threshold)?;
    writeln!(out, "reference\taction\tinstances\tfeature_index\tfeature\tacd\tsign")?;
    for a in (0..report.action_count).filter(|&a| a != report.reference) {
        let pair = report.pairs.iter().find(|p| p.action == a);
        let instances = pair.map_or(0, |p| p.instances);
        writeln!(out, "# pair {}-{a}\tinstances {instances}", report.reference)?;
        let Some(p) = pair else { continue };
        for &f in &p.significant {
            writeln!(
                out,
                "{}\t{a}\t{instances}\t{f}\t{}\t{:.6}\t{}",
                report.reference,
                name(names, f)?,
                p.acd[f],
                sign(p.acd[f])
            )?;
        }
    }
    for (label, list) in [
        ("positive", &report.most_common_positive),
        ("negative", &report.most_common_negative),
    ] {
        let items = list
            .iter()
            .map(|&(f, n)| Ok(format!("{f}:{}:{n}", name(names, f)?)))
            .collect::<Result<Vec<_>>>()?;
        writeln!(out, "# most_common_{label}\t{}", items.join(","))?;
    }
    Ok(())
}

/// Per-instance report: retained features only, largest `|Δ|` first.
pub fn write_local_report<W: Write>(
    out: &mut W,
    e: &LocalExplanation,
    names: &[String],
) -> Result<()> {
    writeln!(out, "{SIGN_CONVENTION}")?;
    writeln!(out, "# actions\t{}\t{}", e.a1, e.a2)?;
    writeln!(out, "# threshold\t{}", e.threshold)?;
    writeln!(out, "# q_gap\t{:.9}", e.q_gap)?;
    writeln!(out, "# baseline_gap\t{:.9}", e.baseline_gap)?;
    writeln!(out, "feature_index\tfeature\tdelta")?;
    for &f in &e.retained {
        writeln!(out, "{f}\t{}\t{:.6}", name(names, f)?, e.deltas[f])?;
    }
    Ok(())
}

/// Evolution report: one row per (snapshot, feature).
pub fn write_aafc_report<W: Write>(
    out: &mut W,
    series: &[AafcSeries],
    names: &[String],
) -> Result<()> {
    writeln!(out, "{SIGN_CONVENTION}")?;
    if let Some(s) = series.first() {
        writeln!(out, "# action\t{}", s.action)?;
    }
    writeln!(out, "stamp\tfeature_index\tfeature\taafc")?;
    for s in series {
        for (stamp, v) in s.stamps.iter().zip(&s.values) {
            writeln!(out, "{stamp}\t{}\t{}\t{v:.6}", s.feature, name(names, s.feature)?)?;
        }
    }
    Ok(())
}
