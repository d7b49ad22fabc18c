//! Least-squares regression trees with axis-aligned splits.

use super::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        /// Reduction in the sum of squared errors achieved by this split.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Add this tree's split gains into `gains`, indexed by column.
    pub fn accumulate_gains(&self, gains: &mut [f64]) {
        if let TreeNode::Split { feature, gain, left, right, .. } = self {
            gains[*feature] += gain;
            left.accumulate_gains(gains);
            right.accumulate_gains(gains);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Per-column row orderings, computed once and reused by every tree.
pub struct Presorted {
    columns: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let columns = (0..x.n_cols())
            .map(|c| {
                let mut idx: Vec<usize> = (0..x.n_rows()).collect();
                idx.sort_by(|&a, &b| x.get(a, c).total_cmp(&x.get(b, c)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { columns }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub n_left: usize,
}

/// Threshold halfway between two consecutive distinct values, nudged down
/// if rounding would send the upper value left.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Best split of the rows listed (per column, in sorted order) in `orders`.
///
/// Gain is the SSE reduction `n_l * n_r / n * (mean_l - mean_r)^2`. Ties
/// keep the lowest column, then the lowest threshold.
fn best_split(x: &Matrix, target: &[f64], orders: &[Vec<usize>], min_leaf: usize) -> Option<SplitCandidate> {
    let n = orders.first()?.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = orders[0].iter().map(|&i| target[i]).sum();
    let mut best: Option<SplitCandidate> = None;
    for (feature, order) in orders.iter().enumerate() {
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += target[order[k - 1]];
            let (lo, hi) = (x.get(order[k - 1], feature), x.get(order[k], feature));
            if k < min_leaf || n - k < min_leaf || lo == hi {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let diff = left_sum / nl - (total - left_sum) / nr;
            let gain = nl * nr / n as f64 * diff * diff;
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate { feature, threshold: midpoint(lo, hi), gain, n_left: k });
            }
        }
    }
    best
}

/// Fit one tree to `target` over the rows in `presorted`.
pub fn fit_tree(x: &Matrix, target: &[f64], presorted: &Presorted, params: TreeParams) -> TreeNode {
    let mut go_left = vec![false; x.n_rows()];
    let orders = presorted.columns.clone();
    let members: Vec<usize> = (0..x.n_rows()).collect();
    grow(x, target, orders, members, 0, params, &mut go_left)
}

fn leaf(target: &[f64], members: &[usize]) -> TreeNode {
    let value =
        if members.is_empty() { 0.0 } else { members.iter().map(|&i| target[i]).sum::<f64>() / members.len() as f64 };
    TreeNode::Leaf { value }
}

fn grow(
    x: &Matrix,
    target: &[f64],
    orders: Vec<Vec<usize>>,
    members: Vec<usize>,
    depth: usize,
    params: TreeParams,
    go_left: &mut [bool],
) -> TreeNode {
    if depth >= params.max_depth {
        return leaf(target, &members);
    }
    let Some(split) = best_split(x, target, &orders, params.min_samples_leaf) else {
        return leaf(target, &members);
    };
    for &i in &members {
        go_left[i] = x.get(i, split.feature) <= split.threshold;
    }
    let partition = |list: &[usize]| -> (Vec<usize>, Vec<usize>) { list.iter().partition(|&&i| go_left[i]) };
    let (left_orders, right_orders): (Vec<_>, Vec<_>) = orders.iter().map(|o| partition(o)).unzip();
    let (left_members, right_members) = partition(&members);
    debug_assert_eq!(left_members.len(), split.n_left);
    let left = grow(x, target, left_orders, left_members, depth + 1, params, go_left);
    let right = grow(x, target, right_orders, right_members, depth + 1, params, go_left);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        gain: split.gain,
        left: Box::new(left),
        right: Box::new(right),
    }
}
