//! Depth-limited squared-error regression trees.
//!
//! Every node keeps the mean of the training targets that reached it, so a
//! prediction can be decomposed along its root-to-leaf path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Mean training target at this node.
    pub value: f64,
    pub samples: usize,
    pub split: Option<Split>,
}

impl Node {
    pub fn leaf(value: f64, samples: usize) -> Self {
        Self {
            value,
            samples,
            split: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Sum of squared errors of the two children around their means.
    pub child_sse: f64,
    pub left_count: usize,
}

/// Growth limits for one tree.
#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

/// Arena-allocated tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn constant(value: f64, samples: usize) -> Self {
        Self {
            nodes: vec![Node::leaf(value, samples)],
        }
    }

    /// Builds a tree from an explicit arena, checking that child links are in
    /// range and that every node except the root has exactly one parent.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for n in &nodes {
            if let Some(s) = n.split {
                if s.left >= nodes.len() || s.right >= nodes.len() || s.left == 0 || s.right == 0 {
                    return Err(Error::Format("tree child index out of range".into()));
                }
                parents[s.left] += 1;
                parents[s.right] += 1;
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::Format("tree nodes do not form a tree".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    /// Index of the leaf reached by `x`; `x[f] <= threshold` goes left.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    /// Adds `scale × (child − parent)` to `out[feature]` for each split on the
    /// path of `x`.
    pub fn accumulate_contributions(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
            out[s.feature] += scale * (self.nodes[next].value - self.nodes[i].value);
            i = next;
        }
    }

    /// Fits a tree to `targets`. `cols` holds the features column-major
    /// (`cols[f * n + r]`) and `sorted[f]` lists the row indices ordered by
    /// feature `f`.
    pub(crate) fn fit_presorted(
        cols: &[f64],
        targets: &[f64],
        sorted: &[Vec<usize>],
        params: TreeParams,
    ) -> Self {
        let n = targets.len();
        let mut builder = Builder {
            cols,
            n_rows: n,
            targets,
            params,
            nodes: Vec::new(),
            go_left: vec![false; n],
        };
        let members: Vec<Vec<usize>> = sorted.to_vec();
        builder.grow(members, 0);
        Self {
            nodes: builder.nodes,
        }
    }
}

struct Builder<'a> {
    cols: &'a [f64],
    n_rows: usize,
    targets: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

impl Builder<'_> {
    /// Grows the subtree for the rows in `members` (one sorted list per
    /// feature, all holding the same row set) and returns its node index.
    fn grow(&mut self, members: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &members[0];
        let count = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let mean = sum / count as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::leaf(mean, count));
        if depth >= self.params.max_depth || count < self.params.min_samples_split {
            return id;
        }
        let sse: f64 = rows
            .iter()
            .map(|&r| {
                let e = self.targets[r] - mean;
                e * e
            })
            .sum();
        let Some(choice) = best_split_sorted(self.cols, self.n_rows, self.targets, &members) else {
            return id;
        };
        // Ignore splits whose gain is lost in rounding.
        if !(sse - choice.child_sse > 1e-12 * sse.max(1e-300)) || sse <= 0.0 {
            return id;
        }
        let col = &self.cols[choice.feature * self.n_rows..(choice.feature + 1) * self.n_rows];
        for &r in &members[0] {
            self.go_left[r] = col[r] <= choice.threshold;
        }
        let mut left = Vec::with_capacity(members.len());
        let mut right = Vec::with_capacity(members.len());
        let n_left = choice.left_count;
        for list in &members {
            let mut l = Vec::with_capacity(n_left);
            let mut r = Vec::with_capacity(count - n_left);
            for &row in list {
                if self.go_left[row] {
                    l.push(row);
                } else {
                    r.push(row);
                }
            }
            left.push(l);
            right.push(r);
        }
        drop(members);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id].split = Some(Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: l,
            right: r,
        });
        id
    }
}

/// Exact best split over midpoints between consecutive distinct values.
/// Ties resolve to the lowest feature, then the lowest threshold.
/// Relative SSE difference below which two splits count as equally good.
pub const TIE_EPS: f64 = 1e-12;

pub(crate) fn best_split_sorted(
    cols: &[f64],
    n_rows: usize,
    targets: &[f64],
    sorted: &[Vec<usize>],
) -> Option<SplitChoice> {
    let n = sorted.first()?.len();
    if n < 2 {
        return None;
    }
    // Centering keeps the sum-of-squares identity well conditioned.
    let mean = sorted[0].iter().map(|&r| targets[r]).sum::<f64>() / n as f64;
    let total: f64 = sorted[0].iter().map(|&r| targets[r] - mean).sum();
    let total_sq: f64 = sorted[0]
        .iter()
        .map(|&r| (targets[r] - mean) * (targets[r] - mean))
        .sum();
    // candidates within this relative margin of the best are ties and keep
    // the earlier (feature, threshold)
    let margin = TIE_EPS * total_sq;
    let mut best: Option<SplitChoice> = None;
    for (f, order) in sorted.iter().enumerate() {
        let col = &cols[f * n_rows..(f + 1) * n_rows];
        let mut left_sum = 0.0;
        let mut hi = col[order[0]];
        for k in 1..n {
            let prev = order[k - 1];
            left_sum += targets[prev] - mean;
            let lo = hi;
            hi = col[order[k]];
            if lo == hi {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let right_sum = total - left_sum;
            let child_sse = total_sq - left_sum * left_sum / nl - right_sum * right_sum / nr;
            if best.map_or(true, |b| child_sse < b.child_sse - margin) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    child_sse,
                    left_count: k,
                });
            }
        }
    }
    best
}

/// Column-major copy of row-major `x`.
pub(crate) fn to_columns(x: &[f64], dim: usize) -> Vec<f64> {
    let n = x.len() / dim.max(1);
    let mut cols = vec![0.0; x.len()];
    for r in 0..n {
        for f in 0..dim {
            cols[f * n + r] = x[r * dim + f];
        }
    }
    cols
}

/// Presorted row orders, one per feature, from column-major data.
pub(crate) fn presort(cols: &[f64], dim: usize, n: usize) -> Vec<Vec<usize>> {
    (0..dim)
        .map(|f| {
            let col = &cols[f * n..(f + 1) * n];
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// Best squared-error split of the rows `x` against `targets`.
pub fn best_split(x: &[Vec<f64>], targets: &[f64]) -> Option<SplitChoice> {
    let dim = x.first()?.len();
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let cols = to_columns(&flat, dim);
    let sorted = presort(&cols, dim, x.len());
    best_split_sorted(&cols, x.len(), targets, &sorted)
}
