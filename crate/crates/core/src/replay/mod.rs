//! Prioritized experience replay.
//!
//! Transitions live in a FIFO ring. Leaf priorities `(|δ| + ε)^α` sit in a
//! [`SumTree`], which drives proportional sampling for TD updates. Refit
//! datasets for the mimic learner come from the recency view: transitions with
//! `stored_at > c - K`, which always form a contiguous suffix of the ring.

mod dump;
mod sum_tree;

pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use sum_tree::SumTree;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::transition::Transition;

/// Handle to a stored transition. The serial detects slots that were
/// overwritten after sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayIndex {
    pub slot: usize,
    pub serial: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct PriorityParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for PriorityParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta: 0.4,
            epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayDiagnostics {
    pub pushes: u64,
    pub evictions: u64,
    pub stale_priority_updates: u64,
}

#[derive(Debug)]
pub struct PrioritizedSample<'a> {
    pub index: ReplayIndex,
    pub transition: &'a Transition,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    dim: usize,
    storage: Vec<Transition>,
    serials: Vec<u64>,
    next_write: usize,
    next_serial: u64,
    tree: SumTree,
    params: PriorityParams,
    diagnostics: ReplayDiagnostics,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, dim: usize, params: PriorityParams) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            dim,
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            serials: Vec::with_capacity(capacity.min(1 << 20)),
            next_write: 0,
            next_serial: 0,
            tree: SumTree::new(capacity),
            params,
            diagnostics: ReplayDiagnostics::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagnostics(&self) -> ReplayDiagnostics {
        self.diagnostics
    }

    /// Stamp of the most recently stored transition.
    pub fn latest_stamp(&self) -> Option<u64> {
        self.logical(self.len().checked_sub(1)?).map(|t| t.stored_at)
    }

    pub fn total_priority(&self) -> f64 {
        self.tree.total()
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.get(slot)
    }

    /// Relative discrepancy between the tree root and a direct leaf sum.
    pub fn audit(&self) -> f64 {
        let direct = self.tree.leaf_sum();
        let root = self.tree.total();
        if direct == 0.0 {
            root.abs()
        } else {
            ((root - direct) / direct).abs()
        }
    }

    pub fn set_beta(&mut self, beta: f64) {
        self.params.beta = beta;
    }

    fn leaf_priority(&self, td_error: f64) -> f64 {
        (td_error.abs() + self.params.epsilon).powf(self.params.alpha)
    }

    /// Slot holding the `i`-th oldest transition.
    fn slot_of(&self, i: usize) -> usize {
        if self.storage.len() < self.capacity {
            i
        } else {
            (self.next_write + i) % self.capacity
        }
    }

    /// The `i`-th oldest transition.
    pub fn logical(&self, i: usize) -> Option<&Transition> {
        (i < self.len()).then(|| &self.storage[self.slot_of(i)])
    }

    /// Handle of the `i`-th oldest transition, for direct priority updates.
    pub fn handle(&self, i: usize) -> Option<ReplayIndex> {
        (i < self.len()).then(|| {
            let slot = self.slot_of(i);
            ReplayIndex {
                slot,
                serial: self.serials[slot],
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        (0..self.len()).map(move |i| &self.storage[self.slot_of(i)])
    }

    /// Stores `t`, evicting the oldest transition when full. The new leaf
    /// receives at least the current maximum priority.
    pub fn push(&mut self, t: Transition, initial_priority: f64) -> Result<()> {
        if t.state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.state.len(),
            });
        }
        if t.next_state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.next_state.len(),
            });
        }
        if let Some(latest) = self.latest_stamp() {
            if t.stored_at < latest {
                return Err(Error::InvalidArgument(format!(
                    "stored_at {} precedes latest stamp {}",
                    t.stored_at, latest
                )));
            }
        }
        let candidate = if initial_priority.is_finite() {
            self.leaf_priority(initial_priority)
        } else {
            self.leaf_priority(0.0)
        };
        let slot = self.next_write;
        // The evicted leaf may hold the current maximum.
        if self.storage.len() == self.capacity {
            self.tree.set(slot, 0.0);
        }
        let priority = candidate.max(self.tree.max());
        if self.storage.len() < self.capacity {
            self.storage.push(t);
            self.serials.push(self.next_serial);
        } else {
            self.storage[slot] = t;
            self.serials[slot] = self.next_serial;
            self.diagnostics.evictions += 1;
        }
        self.tree.set(slot, priority);
        self.next_serial += 1;
        self.next_write = (self.next_write + 1) % self.capacity;
        self.diagnostics.pushes += 1;
        Ok(())
    }

    /// Draws `batch` transitions with probability proportional to priority,
    /// one from each of `batch` equal-mass strata. Weights are
    /// `(n P(i))^-β` normalised by the batch maximum.
    pub fn sample_prioritized<R: Rng>(
        &self,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<PrioritizedSample<'_>>> {
        let n = self.len();
        if batch > n || batch == 0 {
            return Err(Error::InsufficientSamples {
                requested: batch,
                available: n,
            });
        }
        let total = self.tree.total();
        let segment = total / batch as f64;
        let mut out = Vec::with_capacity(batch);
        for k in 0..batch {
            let mass = segment * (k as f64 + rng.gen::<f64>());
            let mut slot = self.tree.find(mass);
            if slot >= n {
                slot = n - 1;
            }
            let p = self.tree.get(slot) / total;
            let weight = (n as f64 * p).powf(-self.params.beta);
            out.push(PrioritizedSample {
                index: ReplayIndex {
                    slot,
                    serial: self.serials[slot],
                },
                transition: &self.storage[slot],
                weight,
            });
        }
        let max_w = out.iter().map(|s| s.weight).fold(0.0_f64, f64::max);
        if max_w > 0.0 && max_w.is_finite() {
            for s in &mut out {
                s.weight /= max_w;
            }
        }
        Ok(out)
    }

    /// Number of transitions with `stored_at > step - window`.
    pub fn window_len(&self, window: u64, step: u64) -> usize {
        self.len() - self.window_start(window, step)
    }

    /// Logical position of the oldest transition inside the recency window.
    fn window_start(&self, window: u64, step: u64) -> usize {
        let threshold = step as i128 - window as i128;
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if (self.storage[self.slot_of(mid)].stored_at as i128) > threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Uniform draw without replacement from transitions stored during the
    /// last `window` steps before `step`.
    pub fn sample_recent_uniform<R: Rng>(
        &self,
        batch: usize,
        window: u64,
        step: u64,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        let start = self.window_start(window, step);
        let available = self.len() - start;
        if batch > available {
            return Err(Error::WindowUnderpopulated {
                requested: batch,
                available,
            });
        }
        Ok(index::sample(rng, available, batch)
            .into_iter()
            .map(|i| &self.storage[self.slot_of(start + i)])
            .collect())
    }

    /// Priority-weighted draw without replacement from the recency window.
    pub fn sample_recent_prioritized<R: Rng>(
        &self,
        batch: usize,
        window: u64,
        step: u64,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        let start = self.window_start(window, step);
        let available = self.len() - start;
        if batch > available {
            return Err(Error::WindowUnderpopulated {
                requested: batch,
                available,
            });
        }
        let picked = index::sample_weighted(
            rng,
            available,
            |i| self.tree.get(self.slot_of(start + i)),
            batch,
        )
        .map_err(|e| Error::InvalidArgument(format!("weighted sampling failed: {e}")))?;
        Ok(picked
            .into_iter()
            .map(|i| &self.storage[self.slot_of(start + i)])
            .collect())
    }

    /// Sets each leaf to `(|δ| + ε)^α`. Indices whose slot has been
    /// overwritten since sampling are skipped and counted.
    pub fn update_priorities(&mut self, indices: &[ReplayIndex], td_errors: &[f64]) {
        debug_assert_eq!(indices.len(), td_errors.len());
        for (idx, &delta) in indices.iter().zip(td_errors) {
            let live = idx.slot < self.len() && self.serials[idx.slot] == idx.serial;
            if !live || !delta.is_finite() {
                self.diagnostics.stale_priority_updates += 1;
                continue;
            }
            let p = self.leaf_priority(delta);
            self.tree.set(idx.slot, p);
        }
    }
}
