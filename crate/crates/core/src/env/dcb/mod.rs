//! DCB-lite: flights (agents) choose ground delays before takeoff to keep
//! sector demand within capacity.
//!
//! Time advances `step_minutes` per step. A flight acts on every step from
//! `decision_lead_minutes` before its current takeoff until it departs; each
//! action adds `min(a, max_delay - delay)` minutes. The departing transition
//! is terminal. Every acting flight receives
//! `-(λ1 · hotspot_minutes + λ2 · delay)` for the joint assignment after the
//! step. A cell (sector, counting period) counts each flight touching it once
//! and is a hotspot when its count exceeds the sector capacity.
//!
//! State layout (19 features):
//!
//! | index  | meaning                                                        |
//! |--------|----------------------------------------------------------------|
//! | 0      | delay / max_delay                                              |
//! | 1      | hotspot cells the flight touches                               |
//! | 2..5   | sector of the first three such hotspots, scaled ids, -1 padded |
//! | 5..9   | route sector ids scaled to [0, 1], -1 padded                   |
//! | 9..13  | minutes in each route sector / 60, 0 padded                    |
//! | 13..17 | hotspot minutes in each route sector / 60, 0 padded            |
//! | 17     | current takeoff minute / horizon                               |
//! | 18     | minutes until takeoff / (lead + max_delay)                     |

mod generate;
mod scenario;

pub use generate::{generate_scenario, Congestion};
pub use scenario::{
    occupancy_by_scan, DcbScenario, FlightPlan, Occupancy, SectorSpec, FEATURE_ROUTE_WIDTH,
};

use super::{EnvSpec, Environment, EpisodeMetrics, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::XRng;

pub const FEATURE_HOTSPOT_SLOTS: usize = 3;
const STATE_DIM: usize = 4 + FEATURE_HOTSPOT_SLOTS + 3 * FEATURE_ROUTE_WIDTH;
/// Delay beyond which a flight counts as delayed.
const DELAYED_THRESHOLD: u32 = 4;

#[derive(Debug, Clone, Copy)]
struct Piece {
    visit: usize,
    cell: usize,
    minutes: u32,
}

#[derive(Debug, Clone, Default)]
struct Track {
    pieces: Vec<Piece>,
    cells: Vec<usize>,
}

fn track(plan: &FlightPlan, delay: u32, period: u32, n_periods: usize) -> Track {
    let mut pieces = Vec::new();
    let mut start = plan.takeoff_minute + delay;
    for (visit, (&s, &m)) in plan.route.iter().zip(&plan.minutes_per_sector).enumerate() {
        let end = start + m;
        let mut p = start / period;
        while p * period < end {
            let lo = start.max(p * period);
            let hi = end.min((p + 1) * period);
            pieces.push(Piece {
                visit,
                cell: s * n_periods + p as usize,
                minutes: hi - lo,
            });
            p += 1;
        }
        start = end;
    }
    let mut cells: Vec<usize> = pieces.iter().map(|p| p.cell).collect();
    cells.sort_unstable();
    cells.dedup();
    Track { pieces, cells }
}

#[derive(Debug, Clone)]
pub struct DcbEnv {
    scenario: DcbScenario,
    spec: EnvSpec,
    n_periods: usize,
    capacity: Vec<u32>,
    delays: Vec<u32>,
    departed: Vec<bool>,
    tracks: Vec<Track>,
    counts: Vec<u32>,
    t: u32,
}

impl DcbEnv {
    pub fn new(scenario: DcbScenario) -> Result<Self> {
        scenario.validate()?;
        let n_periods = scenario.n_periods();
        let capacity = scenario
            .sectors
            .iter()
            .flat_map(|s| std::iter::repeat(s.capacity).take(n_periods))
            .collect();
        let n = scenario.flights.len();
        let spec = EnvSpec {
            name: "dcb-lite".into(),
            state_dim: STATE_DIM,
            action_count: scenario.max_delay as usize + 1,
            agent_count: n,
            episode_length: scenario.episode_length as usize,
        };
        let mut env = Self {
            scenario,
            spec,
            n_periods,
            capacity,
            delays: vec![0; n],
            departed: vec![false; n],
            tracks: vec![Track::default(); n],
            counts: Vec::new(),
            t: 0,
        };
        env.rebuild();
        Ok(env)
    }

    pub fn scenario(&self) -> &DcbScenario {
        &self.scenario
    }

    pub fn delays(&self) -> &[u32] {
        &self.delays
    }

    pub fn step_index(&self) -> u32 {
        self.t
    }

    fn now(&self) -> u32 {
        self.t * self.scenario.step_minutes
    }

    fn rebuild(&mut self) {
        self.counts = vec![0; self.capacity.len()];
        for i in 0..self.scenario.flights.len() {
            self.tracks[i] = track(
                &self.scenario.flights[i],
                self.delays[i],
                self.scenario.period_length,
                self.n_periods,
            );
            for &c in &self.tracks[i].cells {
                self.counts[c] += 1;
            }
        }
    }

    fn set_delay(&mut self, i: usize, delay: u32) {
        if delay == self.delays[i] {
            return;
        }
        for &c in &self.tracks[i].cells {
            self.counts[c] -= 1;
        }
        self.delays[i] = delay;
        self.tracks[i] = track(
            &self.scenario.flights[i],
            delay,
            self.scenario.period_length,
            self.n_periods,
        );
        for &c in &self.tracks[i].cells {
            self.counts[c] += 1;
        }
    }

    fn is_hot(&self, cell: usize) -> bool {
        self.counts[cell] > self.capacity[cell]
    }

    pub fn hotspot_minutes(&self, i: usize) -> u32 {
        self.tracks[i]
            .pieces
            .iter()
            .filter(|p| self.is_hot(p.cell))
            .map(|p| p.minutes)
            .sum()
    }

    /// Hotspot cells touched by flight `i`, in time order.
    fn hotspots_of(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for p in &self.tracks[i].pieces {
            if self.is_hot(p.cell) && !out.contains(&p.cell) {
                out.push(p.cell);
            }
        }
        out
    }

    pub fn hotspot_cells(&self) -> usize {
        (0..self.counts.len()).filter(|&c| self.is_hot(c)).count()
    }

    /// Occupancy as maintained incrementally.
    pub fn occupancy(&self) -> Occupancy {
        Occupancy {
            n_periods: self.n_periods,
            counts: self.counts.clone(),
            hotspot_minutes: (0..self.delays.len()).map(|i| self.hotspot_minutes(i)).collect(),
        }
    }

    fn is_active(&self, i: usize) -> bool {
        let f = &self.scenario.flights[i];
        !self.departed[i] && self.now() + self.scenario.decision_lead_minutes >= f.takeoff_minute
    }

    fn scaled_sector(&self, s: usize) -> f64 {
        let n = self.scenario.sectors.len();
        if n <= 1 {
            0.0
        } else {
            s as f64 / (n - 1) as f64
        }
    }

    pub fn features(&self, i: usize) -> Vec<f64> {
        let sc = &self.scenario;
        let f = &sc.flights[i];
        let d = self.delays[i];
        let mut x = Vec::with_capacity(STATE_DIM);
        x.push(d as f64 / sc.max_delay as f64);
        let hot = self.hotspots_of(i);
        x.push(hot.len() as f64);
        for k in 0..FEATURE_HOTSPOT_SLOTS {
            x.push(match hot.get(k) {
                Some(&c) => self.scaled_sector(c / self.n_periods),
                None => -1.0,
            });
        }
        for k in 0..FEATURE_ROUTE_WIDTH {
            x.push(f.route.get(k).map_or(-1.0, |&s| self.scaled_sector(s)));
        }
        for k in 0..FEATURE_ROUTE_WIDTH {
            x.push(f.minutes_per_sector.get(k).map_or(0.0, |&m| m as f64 / 60.0));
        }
        let mut per_visit = [0u32; FEATURE_ROUTE_WIDTH];
        for p in &self.tracks[i].pieces {
            if self.is_hot(p.cell) {
                per_visit[p.visit] += p.minutes;
            }
        }
        x.extend(per_visit.iter().map(|&m| m as f64 / 60.0));
        let takeoff = (f.takeoff_minute + d) as f64;
        x.push(takeoff / sc.horizon_minutes() as f64);
        x.push((takeoff - self.now() as f64) / (sc.decision_lead_minutes + sc.max_delay) as f64);
        x
    }

    fn joint_state(&self) -> Vec<Vec<f64>> {
        (0..self.delays.len()).map(|i| self.features(i)).collect()
    }

    fn reward(&self, i: usize) -> f64 {
        -(self.scenario.cost_per_hotspot_minute * self.hotspot_minutes(i) as f64
            + self.scenario.cost_per_delay_minute * self.delays[i] as f64)
    }
}

impl Environment for DcbEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut XRng) -> Vec<Vec<f64>> {
        self.delays.iter_mut().for_each(|d| *d = 0);
        self.departed.iter_mut().for_each(|d| *d = false);
        self.t = 0;
        self.rebuild();
        self.joint_state()
    }

    fn active(&self) -> Vec<bool> {
        if self.t >= self.scenario.episode_length {
            return vec![false; self.delays.len()];
        }
        (0..self.delays.len()).map(|i| self.is_active(i)).collect()
    }

    fn step(&mut self, actions: &[usize], _rng: &mut XRng) -> Result<StepOutcome> {
        let n = self.delays.len();
        if actions.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: actions.len(),
            });
        }
        if self.t >= self.scenario.episode_length {
            return Err(Error::InvalidArgument("step called on a finished episode".into()));
        }
        let active = self.active();
        let count = self.spec.action_count;
        for i in 0..n {
            if active[i] && actions[i] >= count {
                return Err(Error::ActionOutOfRange {
                    action: actions[i],
                    count,
                });
            }
        }
        let max_delay = self.scenario.max_delay;
        for i in 0..n {
            if active[i] {
                let d = (self.delays[i] + actions[i] as u32).min(max_delay);
                self.set_delay(i, d);
            }
        }
        self.t += 1;
        let now = self.now();
        let mut rewards = vec![0.0; n];
        let mut terminals = vec![false; n];
        for i in 0..n {
            if active[i] {
                rewards[i] = self.reward(i);
                if now >= self.scenario.flights[i].takeoff_minute + self.delays[i] {
                    self.departed[i] = true;
                    terminals[i] = true;
                }
            }
        }
        let done = self.t >= self.scenario.episode_length || self.departed.iter().all(|&d| d);
        if done {
            self.t = self.scenario.episode_length;
        }
        Ok(StepOutcome {
            next_states: self.joint_state(),
            rewards,
            terminals,
            done,
        })
    }

    fn feature_names(&self) -> Vec<String> {
        let mut names = vec!["delay".to_string(), "hotspot_count".to_string()];
        for k in 1..=FEATURE_HOTSPOT_SLOTS {
            names.push(format!("hotspot_sector_{k}"));
        }
        for k in 1..=FEATURE_ROUTE_WIDTH {
            names.push(format!("route_sector_{k}"));
        }
        for k in 1..=FEATURE_ROUTE_WIDTH {
            names.push(format!("minutes_in_sector_{k}"));
        }
        for k in 1..=FEATURE_ROUTE_WIDTH {
            names.push(format!("hotspot_minutes_in_sector_{k}"));
        }
        names.push("takeoff_time".into());
        names.push("time_to_takeoff".into());
        names
    }

    fn episode_metrics(&self) -> EpisodeMetrics {
        let n = self.delays.len();
        EpisodeMetrics {
            final_hotspots: self.hotspot_cells(),
            avg_delay: self.delays.iter().map(|&d| d as f64).sum::<f64>() / n as f64,
            delayed_flights: self.delays.iter().filter(|&&d| d > DELAYED_THRESHOLD).count(),
            flights: n,
        }
    }

    fn describe(&self) -> String {
        self.scenario
            .to_toml()
            .unwrap_or_else(|e| format!("unserializable scenario: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn base(flights: Vec<FlightPlan>, capacity: u32) -> DcbScenario {
        DcbScenario {
            period_length: 15,
            max_delay: 10,
            cost_per_hotspot_minute: 1.0,
            cost_per_delay_minute: 0.1,
            step_minutes: 10,
            episode_length: 12,
            decision_lead_minutes: 30,
            sectors: vec![SectorSpec {
                name: "A".into(),
                capacity,
            }],
            flights,
        }
    }

    fn flight(takeoff: u32, minutes: u32) -> FlightPlan {
        FlightPlan {
            takeoff_minute: takeoff,
            route: vec![0],
            minutes_per_sector: vec![minutes],
        }
    }

    #[test]
    fn ample_capacity_has_no_hotspots() {
        let mut env = DcbEnv::new(base(vec![flight(20, 10), flight(22, 10)], 2)).unwrap();
        env.reset(&mut seeded_rng(0));
        assert_eq!(env.hotspot_cells(), 0);
        let out = env.step(&[0, 0], &mut seeded_rng(0)).unwrap();
        assert_eq!(out.rewards, vec![0.0, 0.0]);
    }

    #[test]
    fn overlapping_pair_counts_one_hotspot_each() {
        // both occupy minutes 20..30 of period 1 (15..30)
        let mut env = DcbEnv::new(base(vec![flight(20, 10), flight(20, 10)], 1)).unwrap();
        let x = env.reset(&mut seeded_rng(0));
        assert_eq!(x[0][1], 1.0);
        assert_eq!(x[1][1], 1.0);
        assert_eq!(env.hotspot_cells(), 1);
        assert_eq!(env.hotspot_minutes(0), 10);
    }

    #[test]
    fn single_agent_delay_penalty() {
        for k in 0..=10usize {
            let mut env = DcbEnv::new(base(vec![flight(20, 10)], 1)).unwrap();
            env.reset(&mut seeded_rng(0));
            let out = env.step(&[k], &mut seeded_rng(0)).unwrap();
            assert!((out.rewards[0] + 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn delaying_one_flight_resolves_overlap() {
        // flight 0: 20..25 (period 1), flight 1: 25..30 (period 1); capacity 1
        let sc = base(vec![flight(20, 5), flight(25, 5)], 1);
        let mut env = DcbEnv::new(sc.clone()).unwrap();
        env.reset(&mut seeded_rng(0));
        assert_eq!(env.hotspot_cells(), 1);
        let out = env.step(&[0, 6], &mut seeded_rng(0)).unwrap();
        // flight 1 now 31..36, period 2
        assert_eq!(out.rewards[0], 0.0);
        assert!((out.rewards[1] + 0.6).abs() < 1e-12);
        assert_eq!(env.occupancy(), occupancy_by_scan(&sc, &[0, 6]));
        assert_eq!(env.hotspot_cells(), 0);
    }

    #[test]
    fn delay_is_capped_and_out_of_range_rejected() {
        let mut env = DcbEnv::new(base(vec![flight(30, 5)], 1)).unwrap();
        env.reset(&mut seeded_rng(0));
        env.step(&[7], &mut seeded_rng(0)).unwrap();
        env.step(&[7], &mut seeded_rng(0)).unwrap();
        assert_eq!(env.delays(), &[10]);
        assert!(matches!(
            env.step(&[11], &mut seeded_rng(0)),
            Err(Error::ActionOutOfRange { .. })
        ));
    }

    #[test]
    fn activity_window_and_departure() {
        let mut env = DcbEnv::new(base(vec![flight(30, 5), flight(80, 5)], 1)).unwrap();
        let mut rng = seeded_rng(0);
        env.reset(&mut rng);
        assert_eq!(env.active(), vec![true, false]);
        let mut acted = [0usize; 2];
        loop {
            let a = env.active();
            for (c, &on) in acted.iter_mut().zip(&a) {
                *c += on as usize;
            }
            let out = env.step(&[0, 0], &mut rng).unwrap();
            if out.done {
                break;
            }
        }
        // flight 0 decides at 0, 10, 20; flight 1 at 50, 60, 70
        assert_eq!(acted, [3, 3]);
    }

    #[test]
    fn reset_is_repeatable() {
        let sc = generate_scenario(20, 5, Congestion::High, 3).unwrap();
        let mut env = DcbEnv::new(sc).unwrap();
        let a = env.reset(&mut seeded_rng(1));
        env.step(&vec![3; 20], &mut seeded_rng(1)).unwrap();
        let b = env.reset(&mut seeded_rng(2));
        assert_eq!(a, b);
        assert!(env.delays().iter().all(|&d| d == 0));
    }

    #[test]
    fn features_match_names() {
        let sc = generate_scenario(10, 4, Congestion::Medium, 1).unwrap();
        let mut env = DcbEnv::new(sc).unwrap();
        let x = env.reset(&mut seeded_rng(0));
        assert_eq!(env.feature_names().len(), STATE_DIM);
        assert!(x.iter().all(|s| s.len() == STATE_DIM && s.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn revisited_sector_counts_once() {
        let mut sc = base(vec![], 1);
        sc.sectors.push(SectorSpec {
            name: "B".into(),
            capacity: 1,
        });
        sc.flights = vec![FlightPlan {
            takeoff_minute: 30,
            route: vec![0, 1, 0],
            minutes_per_sector: vec![3, 3, 3],
        }];
        let env = DcbEnv::new(sc.clone()).unwrap();
        assert_eq!(env.hotspot_cells(), 0);
        assert_eq!(env.occupancy(), occupancy_by_scan(&sc, &[0]));
    }

    #[test]
    fn metrics_count_delayed_flights() {
        let sc = base(vec![flight(30, 5), flight(30, 5), flight(30, 5)], 3);
        let mut env = DcbEnv::new(sc).unwrap();
        let mut rng = seeded_rng(0);
        env.reset(&mut rng);
        env.step(&[4, 5, 10], &mut rng).unwrap();
        let m = env.episode_metrics();
        assert_eq!(m.delayed_flights, 2);
        assert!((m.avg_delay - 19.0 / 3.0).abs() < 1e-12);
    }
}
