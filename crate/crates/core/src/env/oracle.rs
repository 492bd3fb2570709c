//! Randomly generated finite MDP with exact dynamic-programming solutions.
//!
//! Each (s, a) pays a fixed reward, ends the episode with probability
//! `terminate[s][a]`, and otherwise moves to a successor drawn from
//! `next[s][a]`. Episodes start uniformly and are truncated after
//! `max_steps`. States are one-hot vectors; the post-termination state is
//! all zeros.

use rand::Rng;

use super::{EnvSpec, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::qnet::argmax;
use crate::rng::{seeded_rng, XRng};

const MAX_STATES: usize = 64;
const MAX_ACTIONS: usize = 4;
const MAX_SWEEPS: usize = 10_000_000;

/// Optimal action values, row-major `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub q: Vec<f64>,
}

impl QTable {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| argmax(self.row(s))).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OracleMdp {
    spec: EnvSpec,
    n_states: usize,
    n_actions: usize,
    rewards: Vec<f64>,
    terminate: Vec<f64>,
    /// `[s][a][s']`, each row sums to 1.
    next: Vec<f64>,
    max_steps: usize,
    seed: Option<u64>,
    state: Option<usize>,
    t: usize,
}

impl OracleMdp {
    /// Seeded random MDP: per (s, a) a reward in [0, 1), a termination
    /// probability in [0.05, 0.25), and up to three successor states.
    pub fn random(n_states: usize, n_actions: usize, seed: u64) -> Result<Self> {
        if n_states == 0 || n_states > MAX_STATES || n_actions == 0 || n_actions > MAX_ACTIONS {
            return Err(Error::InvalidArgument(format!(
                "oracle MDP supports 1..={MAX_STATES} states and 1..={MAX_ACTIONS} actions"
            )));
        }
        let mut rng = seeded_rng(seed);
        let sa = n_states * n_actions;
        let mut rewards = Vec::with_capacity(sa);
        let mut terminate = Vec::with_capacity(sa);
        let mut next = vec![0.0; sa * n_states];
        for i in 0..sa {
            rewards.push(rng.gen::<f64>());
            terminate.push(rng.gen_range(0.05..0.25));
            let row = &mut next[i * n_states..(i + 1) * n_states];
            for _ in 0..3 {
                row[rng.gen_range(0..n_states)] += rng.gen_range(0.1..1.0);
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
        }
        let mut mdp = Self::from_tables(n_states, n_actions, rewards, terminate, next, 200)?;
        mdp.seed = Some(seed);
        Ok(mdp)
    }

    pub fn from_tables(
        n_states: usize,
        n_actions: usize,
        rewards: Vec<f64>,
        terminate: Vec<f64>,
        next: Vec<f64>,
        max_steps: usize,
    ) -> Result<Self> {
        let sa = n_states * n_actions;
        if n_states == 0 || n_actions == 0 || max_steps == 0 {
            return Err(Error::InvalidArgument("empty MDP".into()));
        }
        if rewards.len() != sa || terminate.len() != sa || next.len() != sa * n_states {
            return Err(Error::InvalidArgument("MDP table sizes disagree".into()));
        }
        if terminate.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("termination probabilities must lie in [0, 1]".into()));
        }
        for row in next.chunks(n_states) {
            if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("successor rows must be distributions".into()));
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("MDP reward".into()));
        }
        Ok(Self {
            spec: EnvSpec {
                name: format!("oracle-{n_states}x{n_actions}"),
                state_dim: n_states,
                action_count: n_actions,
                agent_count: 1,
                episode_length: max_steps,
            },
            n_states,
            n_actions,
            rewards,
            terminate,
            next,
            max_steps,
            seed: None,
            state: None,
            t: 0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn termination(&self, s: usize, a: usize) -> f64 {
        self.terminate[s * self.n_actions + a]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[f64] {
        let i = s * self.n_actions + a;
        &self.next[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[s] = 1.0;
        v
    }

    /// Index of a one-hot state vector.
    pub fn state_index(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.n_states {
            return None;
        }
        x.iter().position(|&v| v == 1.0)
    }

    fn backup(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        let cont = 1.0 - self.termination(s, a);
        let ev: f64 = self
            .successors(s, a)
            .iter()
            .zip(v)
            .map(|(p, x)| p * x)
            .sum();
        self.reward(s, a) + gamma * cont * ev
    }

    /// Value iteration until the sup-norm change drops below `tol`.
    /// `gamma == 1` is allowed when every action terminates with positive
    /// probability.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Result<QTable> {
        self.check_gamma(gamma)?;
        let mut v = vec![0.0; self.n_states];
        let mut q = vec![0.0; self.n_states * self.n_actions];
        for _ in 0..MAX_SWEEPS {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    q[s * self.n_actions + a] = self.backup(s, a, &v, gamma);
                }
            }
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                let best = q[s * self.n_actions..(s + 1) * self.n_actions]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta < tol {
                for s in 0..self.n_states {
                    for a in 0..self.n_actions {
                        q[s * self.n_actions + a] = self.backup(s, a, &v, gamma);
                    }
                }
                return Ok(QTable {
                    n_states: self.n_states,
                    n_actions: self.n_actions,
                    q,
                });
            }
        }
        Err(Error::InvalidArgument("value iteration did not converge".into()))
    }

    /// Largest `|Q(s,a) - (r + γ E max Q(s',·))|`.
    pub fn bellman_residual(&self, table: &QTable, gamma: f64) -> f64 {
        let v = table.values();
        let mut worst: f64 = 0.0;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                worst = worst.max((table.get(s, a) - self.backup(s, a, &v, gamma)).abs());
            }
        }
        worst
    }

    /// State values of a deterministic policy (untruncated).
    pub fn policy_values(&self, policy: &[usize], gamma: f64) -> Result<Vec<f64>> {
        self.check_gamma(gamma)?;
        if policy.len() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                got: policy.len(),
            });
        }
        if let Some(&a) = policy.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::ActionOutOfRange {
                action: a,
                count: self.n_actions,
            });
        }
        let mut v = vec![0.0; self.n_states];
        for _ in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                let x = self.backup(s, policy[s], &v, gamma);
                delta = delta.max((x - v[s]).abs());
                v[s] = x;
            }
            if delta < 1e-12 {
                return Ok(v);
            }
        }
        Err(Error::InvalidArgument("policy evaluation did not converge".into()))
    }

    /// Expected return from the uniform start distribution.
    pub fn expected_return(&self, policy: &[usize], gamma: f64) -> Result<f64> {
        let v = self.policy_values(policy, gamma)?;
        Ok(v.iter().sum::<f64>() / self.n_states as f64)
    }

    /// Optimal expected return from the uniform start distribution.
    pub fn optimal_return(&self, gamma: f64) -> Result<f64> {
        let v = self.value_iteration(gamma, 1e-10)?.values();
        Ok(v.iter().sum::<f64>() / self.n_states as f64)
    }

    fn check_gamma(&self, gamma: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument("gamma must lie in [0, 1]".into()));
        }
        if gamma == 1.0 && self.terminate.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidArgument(
                "undiscounted evaluation needs positive termination everywhere".into(),
            ));
        }
        Ok(())
    }
}

impl Environment for OracleMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut XRng) -> Vec<Vec<f64>> {
        let s = rng.gen_range(0..self.n_states);
        self.state = Some(s);
        self.t = 0;
        vec![self.one_hot(s)]
    }

    fn active(&self) -> Vec<bool> {
        vec![self.state.is_some()]
    }

    fn step(&mut self, actions: &[usize], rng: &mut XRng) -> Result<StepOutcome> {
        let s = self
            .state
            .ok_or_else(|| Error::InvalidArgument("step called on a finished episode".into()))?;
        if actions.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: actions.len(),
            });
        }
        let a = actions[0];
        if a >= self.n_actions {
            return Err(Error::ActionOutOfRange {
                action: a,
                count: self.n_actions,
            });
        }
        let reward = self.reward(s, a);
        self.t += 1;
        let terminal = rng.gen::<f64>() < self.termination(s, a);
        let next_state = if terminal {
            self.state = None;
            vec![0.0; self.n_states]
        } else {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = self.n_states - 1;
            for (j, p) in self.successors(s, a).iter().enumerate() {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            self.state = Some(next);
            self.one_hot(next)
        };
        let done = terminal || self.t >= self.max_steps;
        if done {
            self.state = None;
        }
        Ok(StepOutcome {
            next_states: vec![next_state],
            rewards: vec![reward],
            terminals: vec![terminal],
            done,
        })
    }

    fn feature_names(&self) -> Vec<String> {
        (0..self.n_states).map(|s| format!("is_state_{s}")).collect()
    }

    fn enumerate_states(&self) -> Option<Vec<Vec<f64>>> {
        Some((0..self.n_states).map(|s| self.one_hot(s)).collect())
    }

    fn describe(&self) -> String {
        match self.seed {
            Some(seed) => format!(
                "oracle MDP, {} states, {} actions, seed {seed}",
                self.n_states, self.n_actions
            ),
            None => format!("oracle MDP, {} states, {} actions", self.n_states, self.n_actions),
        }
    }
}
