//! Array-backed binary tree holding per-leaf priorities with subtree sums and
//! maxima, giving O(log n) updates and prefix-sum descent.

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self {
            leaves,
            sums: vec![0.0; 2 * leaves],
            maxes: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    pub fn max(&self) -> f64 {
        self.maxes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.sums[self.leaves + leaf]
    }

    /// Sets one leaf and recomputes every ancestor from its children, so the
    /// stored sums never accumulate incremental drift.
    pub fn set(&mut self, leaf: usize, priority: f64) {
        debug_assert!(priority >= 0.0 && priority.is_finite());
        let mut node = self.leaves + leaf;
        self.sums[node] = priority;
        self.maxes[node] = priority;
        while node > 1 {
            node /= 2;
            let (l, r) = (2 * node, 2 * node + 1);
            self.sums[node] = self.sums[l] + self.sums[r];
            self.maxes[node] = self.maxes[l].max(self.maxes[r]);
        }
    }

    /// Returns the leaf whose cumulative interval contains `mass`, skipping
    /// zero-priority leaves. `mass` is clamped into `[0, total)`.
    pub fn find(&self, mass: f64) -> usize {
        let mut mass = mass.max(0.0);
        let mut node = 1;
        while node < self.leaves {
            let (l, r) = (2 * node, 2 * node + 1);
            if (mass < self.sums[l] && self.sums[l] > 0.0) || self.sums[r] <= 0.0 {
                node = l;
            } else {
                mass -= self.sums[l];
                node = r;
            }
        }
        node - self.leaves
    }

    /// Sum of leaves computed directly, independent of the internal nodes.
    pub fn leaf_sum(&self) -> f64 {
        self.sums[self.leaves..].iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_respects_intervals() {
        let mut t = SumTree::new(4);
        t.set(0, 1.0);
        t.set(1, 2.0);
        t.set(2, 3.0);
        assert_eq!(t.total(), 6.0);
        assert_eq!(t.max(), 3.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.5), 1);
        assert_eq!(t.find(2.999), 1);
        assert_eq!(t.find(3.0), 2);
        // overshoot never lands on an empty leaf
        assert_eq!(t.find(100.0), 2);
    }

    #[test]
    fn non_power_of_two_capacity() {
        let mut t = SumTree::new(3);
        for i in 0..3 {
            t.set(i, 1.0);
        }
        assert_eq!(t.total(), 3.0);
        assert_eq!(t.find(2.5), 2);
    }
}
