//! Random forest: bagged CART trees with per-node feature subsampling and
//! majority voting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learners::tree::{grow_tree, DtParams, TreeModel};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_estimators: usize,
    #[serde(flatten)]
    pub tree: DtParams,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams { n_estimators: 100, tree: DtParams::default() }
    }
}

/// Ensemble-construction switches. The defaults are the real algorithm;
/// turning bagging off and widening `mtry` to all features reduces a
/// single-tree forest to a plain decision tree, which the tests exploit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfTrainOptions {
    pub bootstrap: bool,
    /// Features drawn per node; `None` means `ceil(sqrt(n_features))`.
    pub mtry: Option<usize>,
}

impl Default for RfTrainOptions {
    fn default() -> Self {
        RfTrainOptions { bootstrap: true, mtry: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_classes: usize,
}

impl ForestModel {
    /// Majority vote across trees; ties resolve to the lowest class index.
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut votes = vec![0u32; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_row(row) as usize] += 1;
        }
        let mut best = 0usize;
        for (k, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = k;
            }
        }
        best as u32
    }
}

pub fn default_mtry(n_features: usize) -> usize {
    (n_features as f64).sqrt().ceil() as usize
}

/// Trains a forest. Each tree gets its own RNG stream derived from `seed`,
/// a bootstrap resample of the rows (same size, with replacement), and
/// per-node feature subsampling.
pub fn train_forest(
    x: &Matrix,
    y: &[u32],
    n_classes: usize,
    params: &RfParams,
    seed: u64,
    options: &RfTrainOptions,
) -> ForestModel {
    let n = x.rows();
    let mtry = options.mtry.unwrap_or_else(|| default_mtry(x.cols())).clamp(1, x.cols());
    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let mut rng = rng_from_seed(derive_seed(seed, &[t as u64]));
        let mut idx: Vec<u32> = if options.bootstrap {
            (0..n).map(|_| rng.random_range(0..n) as u32).collect()
        } else {
            (0..n as u32).collect()
        };
        let root = grow_tree(x, y, &mut idx, n_classes, &params.tree, mtry, &mut Some(&mut rng));
        trees.push(TreeModel { root });
    }
    ForestModel { trees, n_classes }
}
