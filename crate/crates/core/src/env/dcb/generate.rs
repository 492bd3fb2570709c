use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::scenario::{occupancy_by_scan, DcbScenario, FlightPlan, SectorSpec};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

const PERIOD_LENGTH: u32 = 15;
const MAX_DELAY: u32 = 10;
const STEP_MINUTES: u32 = 10;
const EPISODE_LENGTH: u32 = 24;
const DECISION_LEAD: u32 = 30;
const LATEST_TAKEOFF: u32 = 200;

/// Target ratio of sector capacity to undelayed peak demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Congestion {
    None,
    Low,
    Medium,
    High,
}

impl Congestion {
    fn capacity_fraction(self) -> f64 {
        match self {
            Congestion::None => f64::INFINITY,
            Congestion::Low => 0.85,
            Congestion::Medium => 0.7,
            Congestion::High => 0.55,
        }
    }
}

impl FromStr for Congestion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(Error::InvalidArgument(format!(
                "unknown congestion level '{other}' (none, low, medium, high)"
            ))),
        }
    }
}

impl fmt::Display for Congestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        })
    }
}

/// Random scenario whose capacities are set from the undelayed peak demand
/// of each sector. `None` gives every sector room for all flights; other
/// levels must produce at least one hotspot or the call fails.
pub fn generate_scenario(
    n_flights: usize,
    n_sectors: usize,
    congestion: Congestion,
    seed: u64,
) -> Result<DcbScenario> {
    if n_flights == 0 || n_sectors == 0 {
        return Err(Error::InvalidArgument(
            "n_flights and n_sectors must be positive".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    let flights = (0..n_flights)
        .map(|_| {
            let len = if n_sectors == 1 { 1 } else { rng.gen_range(2..=4) };
            let mut route: Vec<usize> = Vec::with_capacity(len);
            while route.len() < len {
                let s = rng.gen_range(0..n_sectors);
                if route.last() != Some(&s) {
                    route.push(s);
                }
            }
            FlightPlan {
                takeoff_minute: rng.gen_range(0..=LATEST_TAKEOFF),
                minutes_per_sector: (0..len).map(|_| rng.gen_range(5..=20)).collect(),
                route,
            }
        })
        .collect();
    let mut scenario = DcbScenario {
        period_length: PERIOD_LENGTH,
        max_delay: MAX_DELAY,
        cost_per_hotspot_minute: 1.0,
        cost_per_delay_minute: 0.1,
        step_minutes: STEP_MINUTES,
        episode_length: EPISODE_LENGTH,
        decision_lead_minutes: DECISION_LEAD,
        sectors: (0..n_sectors)
            .map(|i| SectorSpec {
                name: format!("S{i}"),
                capacity: n_flights as u32,
            })
            .collect(),
        flights,
    };
    if congestion == Congestion::None {
        scenario.validate()?;
        return Ok(scenario);
    }
    let occ = occupancy_by_scan(&scenario, &vec![0; n_flights]);
    let frac = congestion.capacity_fraction();
    for (s, sector) in scenario.sectors.iter_mut().enumerate() {
        let peak = occ.counts[s * occ.n_periods..(s + 1) * occ.n_periods]
            .iter()
            .copied()
            .max()
            .unwrap_or(0);
        let cap = ((peak as f64 * frac).floor() as u32).max(1);
        sector.capacity = if peak >= 2 { cap.min(peak - 1) } else { peak.max(1) };
    }
    let hot = occupancy_by_scan(&scenario, &vec![0; n_flights]).hotspot_cells(&scenario);
    if hot == 0 {
        return Err(Error::InvalidScenario(format!(
            "congestion level '{congestion}' is unsatisfiable: no sector ever holds two flights at once \
             with {n_flights} flights over {n_sectors} sectors"
        )));
    }
    scenario.validate()?;
    Ok(scenario)
}
