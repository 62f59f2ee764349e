//! Bagged regression trees used as the surrogate model during
//! model-based optimization. Predictions come with an uncertainty
//! estimate taken from the spread of the per-tree means.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed};

const N_TREES: usize = 25;
const MAX_DEPTH: usize = 30;

enum RegNode {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<RegNode>, right: Box<RegNode> },
}

impl RegNode {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            RegNode::Leaf(v) => *v,
            RegNode::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

pub struct SurrogateForest {
    trees: Vec<RegNode>,
}

fn mean(y: &[f64], idx: &[u32]) -> f64 {
    idx.iter().map(|&i| y[i as usize]).sum::<f64>() / idx.len() as f64
}

/// Best SSE-reducing split across all features, midpoints between adjacent
/// distinct values. Returns `None` when no split separates the rows.
fn best_split(x: &Matrix, y: &[f64], idx: &[u32]) -> Option<(usize, f64)> {
    let n = idx.len();
    let total_sum: f64 = idx.iter().map(|&i| y[i as usize]).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..x.cols() {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x.get(i as usize, feature), y[i as usize])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += pairs[pos].1;
            let (v, v_next) = (pairs[pos].0, pairs[pos + 1].0);
            if v == v_next {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = (n - pos - 1) as f64;
            let right_sum = total_sum - left_sum;
            // Maximizing between-group sum of squares minimizes SSE.
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.is_none_or(|(s, _, _)| score > s) {
                let mut threshold = 0.5 * (v + v_next);
                if threshold >= v_next {
                    threshold = v;
                }
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn grow(x: &Matrix, y: &[f64], idx: &mut [u32], depth: usize) -> RegNode {
    let m = mean(y, idx);
    if idx.len() < 2 || depth >= MAX_DEPTH || idx.iter().all(|&i| y[i as usize] == m) {
        return RegNode::Leaf(m);
    }
    let Some((feature, threshold)) = best_split(x, y, idx) else {
        return RegNode::Leaf(m);
    };
    let split_at = {
        let mut lo = 0;
        for i in 0..idx.len() {
            if x.get(idx[i] as usize, feature) <= threshold {
                idx.swap(lo, i);
                lo += 1;
            }
        }
        lo
    };
    let (left_idx, right_idx) = idx.split_at_mut(split_at);
    let left = Box::new(grow(x, y, left_idx, depth + 1));
    let right = Box::new(grow(x, y, right_idx, depth + 1));
    RegNode::Split { feature, threshold, left, right }
}

/// Fits the bagged ensemble; each tree sees a same-size bootstrap resample.
pub fn fit_surrogate(x: &Matrix, y: &[f64], seed: u64) -> SurrogateForest {
    let n = x.rows();
    let mut trees = Vec::with_capacity(N_TREES);
    for t in 0..N_TREES {
        let mut rng: ChaCha8Rng = rng_from_seed(derive_seed(seed, &[t as u64]));
        let mut idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
        trees.push(grow(x, y, &mut idx, 0));
    }
    SurrogateForest { trees }
}

impl SurrogateForest {
    /// Mean and standard deviation of the per-tree predictions.
    pub fn predict(&self, row: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(row)).collect();
        let k = preds.len() as f64;
        let mu = preds.iter().sum::<f64>() / k;
        let var = preds.iter().map(|p| (p - mu) * (p - mu)).sum::<f64>() / k;
        (mu, var.max(0.0).sqrt())
    }
}
