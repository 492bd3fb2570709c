use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest route representable in the state features.
pub const FEATURE_ROUTE_WIDTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub name: String,
    /// Maximum flights per counting period.
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightPlan {
    pub takeoff_minute: u32,
    /// Sector indices in crossing order.
    pub route: Vec<usize>,
    pub minutes_per_sector: Vec<u32>,
}

impl FlightPlan {
    pub fn duration(&self) -> u32 {
        self.minutes_per_sector.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcbScenario {
    pub period_length: u32,
    pub max_delay: u32,
    pub cost_per_hotspot_minute: f64,
    pub cost_per_delay_minute: f64,
    pub step_minutes: u32,
    pub episode_length: u32,
    /// Flights start deciding this many minutes before their current takeoff.
    pub decision_lead_minutes: u32,
    pub sectors: Vec<SectorSpec>,
    pub flights: Vec<FlightPlan>,
}

impl DcbScenario {
    pub fn horizon_minutes(&self) -> u32 {
        self.episode_length * self.step_minutes
    }

    /// Counting periods needed to cover every flight at maximum delay.
    pub fn n_periods(&self) -> usize {
        let end = self
            .flights
            .iter()
            .map(|f| f.takeoff_minute + self.max_delay + f.duration())
            .max()
            .unwrap_or(0);
        end.div_ceil(self.period_length).max(1) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.period_length == 0 || self.step_minutes == 0 || self.episode_length == 0 {
            return bad("period_length, step_minutes and episode_length must be positive".into());
        }
        if self.max_delay == 0 {
            return bad("max_delay must be >= 1".into());
        }
        if self.decision_lead_minutes < self.step_minutes {
            return bad("decision_lead_minutes must be >= step_minutes".into());
        }
        for (name, c) in [
            ("cost_per_hotspot_minute", self.cost_per_hotspot_minute),
            ("cost_per_delay_minute", self.cost_per_delay_minute),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if self.sectors.is_empty() || self.flights.is_empty() {
            return bad("scenario needs at least one sector and one flight".into());
        }
        for (i, s) in self.sectors.iter().enumerate() {
            if s.capacity == 0 {
                return bad(format!("sector {i} ('{}') has capacity 0", s.name));
            }
        }
        for (i, f) in self.flights.iter().enumerate() {
            if f.route.is_empty() || f.route.len() != f.minutes_per_sector.len() {
                return bad(format!(
                    "flight {i}: route length {} and minutes_per_sector length {} must match and be non-zero",
                    f.route.len(),
                    f.minutes_per_sector.len()
                ));
            }
            if f.route.len() > FEATURE_ROUTE_WIDTH {
                return bad(format!(
                    "flight {i}: routes longer than {FEATURE_ROUTE_WIDTH} sectors are not supported"
                ));
            }
            if let Some(&s) = f.route.iter().find(|&&s| s >= self.sectors.len()) {
                return bad(format!("flight {i}: unknown sector {s}"));
            }
            if f.minutes_per_sector.iter().any(|&m| m == 0) {
                return bad(format!("flight {i}: zero minutes in a sector"));
            }
            if f.takeoff_minute + self.max_delay >= self.horizon_minutes() {
                return bad(format!(
                    "flight {i}: takeoff {} plus max_delay must fall before the episode end ({} min)",
                    f.takeoff_minute,
                    self.horizon_minutes()
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Sector occupancy for a fixed delay assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    pub n_periods: usize,
    /// Flights per cell, `[sector][period]`.
    pub counts: Vec<u32>,
    /// Minutes each flight spends in hotspot cells.
    pub hotspot_minutes: Vec<u32>,
}

impl Occupancy {
    pub fn hotspot_cells(&self, scenario: &DcbScenario) -> usize {
        self.counts
            .iter()
            .enumerate()
            .filter(|(c, &n)| n > scenario.sectors[c / self.n_periods].capacity)
            .count()
    }
}

/// Minute-by-minute recomputation from scratch. Slow; used to check the
/// incremental path.
pub fn occupancy_by_scan(scenario: &DcbScenario, delays: &[u32]) -> Occupancy {
    let n_periods = scenario.n_periods();
    let l = scenario.period_length;
    let mut counts = vec![0u32; scenario.sectors.len() * n_periods];
    let mut visited: Vec<Vec<(usize, u32)>> = Vec::with_capacity(scenario.flights.len());
    for (f, &d) in scenario.flights.iter().zip(delays) {
        let mut minute = f.takeoff_minute + d;
        let mut cells = BTreeSet::new();
        let mut minutes = Vec::new();
        for (&s, &m) in f.route.iter().zip(&f.minutes_per_sector) {
            for _ in 0..m {
                let cell = s * n_periods + (minute / l) as usize;
                cells.insert(cell);
                minutes.push((cell, minute));
                minute += 1;
            }
        }
        for &c in &cells {
            counts[c] += 1;
        }
        visited.push(minutes);
    }
    let hotspot_minutes = visited
        .iter()
        .map(|mins| {
            mins.iter()
                .filter(|(c, _)| counts[*c] > scenario.sectors[c / n_periods].capacity)
                .count() as u32
        })
        .collect();
    Occupancy {
        n_periods,
        counts,
        hotspot_minutes,
    }
}
