//! CART-style decision tree classifier.
//!
//! Exhaustive split search: every candidate threshold is the midpoint of two
//! consecutive distinct sorted feature values. A sample goes left when
//! `x[feature] <= threshold`. Ties in split quality resolve to the lowest
//! feature index, then the lowest threshold; leaf majority ties resolve to
//! the lowest class index.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtParams {
    /// Maximum split depth below the root; `None` is unlimited and `Some(0)`
    /// forces a single leaf.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: SplitCriterion,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: SplitCriterion::Gini,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf { class: u32 },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }

    pub fn leaves(&self) -> usize {
        fn walk(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => walk(left) + walk(right),
            }
        }
        walk(&self.root)
    }
}

fn impurity(counts: &[u64], n: f64, criterion: SplitCriterion) -> f64 {
    match criterion {
        SplitCriterion::Gini => {
            1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
        }
        SplitCriterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

fn majority(counts: &[u64]) -> u32 {
    let mut best = 0usize;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u32
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    improvement: f64,
}

/// Grows one tree over the rows listed in `idx`. When `mtry < n_features`, a
/// sorted random subset of features is considered at each node (the random
/// forest behavior); `rng` must then be provided.
pub(crate) fn grow_tree(
    x: &Matrix,
    y: &[u32],
    idx: &mut [u32],
    n_classes: usize,
    params: &DtParams,
    mtry: usize,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> TreeNode {
    grow(x, y, idx, n_classes, params, 0, mtry, rng)
}

#[allow(clippy::too_many_arguments)]
fn grow(
    x: &Matrix,
    y: &[u32],
    idx: &mut [u32],
    n_classes: usize,
    params: &DtParams,
    depth: usize,
    mtry: usize,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> TreeNode {
    let n = idx.len();
    let mut counts = vec![0u64; n_classes];
    for &i in idx.iter() {
        counts[y[i as usize] as usize] += 1;
    }
    let majority_class = majority(&counts);
    let pure = counts[majority_class as usize] as usize == n;
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    if pure
        || depth_capped
        || n < params.min_samples_split
        || n < 2 * params.min_samples_leaf
    {
        return TreeNode::Leaf { class: majority_class };
    }

    let d = x.cols();
    let features: Vec<usize> = if mtry >= d {
        (0..d).collect()
    } else {
        // Partial Fisher-Yates, then sorted so tie-breaking by feature index
        // is independent of draw order.
        let r = rng.as_mut().expect("feature subsampling requires an RNG");
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..mtry {
            let j = r.random_range(i..d);
            pool.swap(i, j);
        }
        let mut chosen = pool[..mtry].to_vec();
        chosen.sort_unstable();
        chosen
    };

    let parent_impurity = impurity(&counts, n as f64, params.criterion);
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, u32)> = Vec::with_capacity(n);
    let mut left_counts = vec![0u64; n_classes];

    for &f in &features {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (x.get(i as usize, f), y[i as usize])));
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        left_counts.iter_mut().for_each(|c| *c = 0);
        let mut right_counts = counts.clone();
        for pos in 0..n - 1 {
            let (v, cls) = sorted[pos];
            left_counts[cls as usize] += 1;
            right_counts[cls as usize] -= 1;
            let v_next = sorted[pos + 1].0;
            if v_next <= v {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
                continue;
            }
            let mut threshold = 0.5 * (v + v_next);
            // Guard against the midpoint rounding up onto the next value,
            // which would leak it into the left branch.
            if threshold >= v_next {
                threshold = v;
            }
            let child = (nl as f64 * impurity(&left_counts, nl as f64, params.criterion)
                + nr as f64 * impurity(&right_counts, nr as f64, params.criterion))
                / n as f64;
            let improvement = parent_impurity - child;
            // Any valid split of an impure node is acceptable, even at zero
            // gain (an XOR step needs it); strict improvement upgrades, so
            // ties keep the lowest feature and threshold.
            let better = match &best {
                None => true,
                Some(b) => improvement > b.improvement,
            };
            if better {
                best = Some(BestSplit { feature: f, threshold, improvement });
            }
        }
    }

    let Some(split) = best else {
        return TreeNode::Leaf { class: majority_class };
    };

    // Stable partition keeps sample order deterministic in both children.
    let mut left_idx: Vec<u32> = Vec::new();
    let mut right_idx: Vec<u32> = Vec::new();
    for &i in idx.iter() {
        if x.get(i as usize, split.feature) <= split.threshold {
            left_idx.push(i);
        } else {
            right_idx.push(i);
        }
    }
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());
    let left = grow(x, y, &mut left_idx, n_classes, params, depth + 1, mtry, rng);
    let right = grow(x, y, &mut right_idx, n_classes, params, depth + 1, mtry, rng);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Trains a single decision tree. `y` values must index into `0..n_classes`.
pub fn train_tree(x: &Matrix, y: &[u32], n_classes: usize, params: &DtParams) -> TreeModel {
    let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
    let root = grow_tree(x, y, &mut idx, n_classes, params, x.cols(), &mut None);
    TreeModel { root }
}
