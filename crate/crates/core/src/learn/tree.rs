//! Depth-limited binary CART trees for Gini classification and squared-error
//! regression.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Flat tree; node 0 is the root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Targets are 0/1 labels; leaves hold the positive fraction.
    Gini,
    /// Squared error on real targets.
    SquaredError,
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    Sqrt,
}

impl MaxFeatures {
    pub fn count(self, dim: usize) -> usize {
        match self {
            MaxFeatures::All => dim,
            MaxFeatures::Sqrt => ((dim as f64).sqrt().ceil() as usize).clamp(1, dim.max(1)),
        }
    }
}

pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
}

struct Builder<'a, R, L> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    params: &'a TreeParams,
    rng: &'a mut R,
    leaf_value: L,
    nodes: Vec<TreeNode>,
}

/// Impurity of a node summarised by `(count, Σy, Σy²)`, scaled by count.
fn weighted_impurity(criterion: Criterion, n: f64, sum: f64, sum_sq: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => {
            let p = sum / n;
            n * 2.0 * p * (1.0 - p)
        }
        Criterion::SquaredError => (sum_sq - sum * sum / n).max(0.0),
    }
}

impl<'a, R: Rng, L: FnMut(&[usize]) -> f64> Builder<'a, R, L> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let split = if depth < self.params.max_depth && rows.len() >= self.params.min_samples_split {
            self.best_split(&rows)
        } else {
            None
        };
        match split {
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| self.xs[i][feature] <= threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
            }
            None => {
                let value = (self.leaf_value)(&rows);
                self.nodes[id] = TreeNode::Leaf { value };
            }
        }
        id
    }

    /// Best `(feature, threshold)` strictly reducing impurity. Ties keep the
    /// lowest feature index, then the lowest threshold.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let crit = self.params.criterion;
        let n = rows.len() as f64;
        let (sum, sum_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &i| (s + self.ys[i], q + self.ys[i] * self.ys[i]));
        let parent = weighted_impurity(crit, n, sum, sum_sq);
        if parent <= 1e-12 {
            return None;
        }
        let dim = self.xs[rows[0]].len();
        let mut features: Vec<usize> = match self.params.max_features {
            MaxFeatures::All => (0..dim).collect(),
            mf => sample(self.rng, dim, mf.count(dim)).into_vec(),
        };
        features.sort_unstable();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in features {
            sorted.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let y = self.ys[sorted[k]];
                ls += y;
                lq += y * y;
                let (x0, x1) = (self.xs[sorted[k]][f], self.xs[sorted[k + 1]][f]);
                if x0 == x1 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let imp = weighted_impurity(crit, nl, ls, lq) + weighted_impurity(crit, n - nl, sum - ls, sum_sq - lq);
                if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                    best = Some((imp, f, x0 + (x1 - x0) / 2.0));
                }
            }
        }
        best.filter(|(imp, _, _)| *imp < parent - 1e-12).map(|(_, f, t)| (f, t))
    }
}

/// Grows a tree on `rows` (duplicates allowed, e.g. from bootstrapping).
pub fn grow<R: Rng>(
    xs: &[Vec<f64>],
    ys: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
    leaf_value: impl FnMut(&[usize]) -> f64,
) -> Tree {
    let mut b = Builder { xs, ys, params, rng, leaf_value, nodes: Vec::new() };
    if rows.is_empty() {
        return Tree { nodes: vec![TreeNode::Leaf { value: 0.0 }] };
    }
    b.build(rows, 0);
    Tree { nodes: b.nodes }
}

/// Mean of the targets on `rows`.
pub fn mean_of<'a>(ys: &'a [f64]) -> impl FnMut(&[usize]) -> f64 + 'a {
    move |rows: &[usize]| {
        if rows.is_empty() {
            0.0
        } else {
            rows.iter().map(|&i| ys[i]).sum::<f64>() / rows.len() as f64
        }
    }
}
