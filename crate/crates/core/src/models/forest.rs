//! Random forest: bootstrapped CART trees with per-split feature
//! subsampling, predictions averaged over per-tree class frequencies.

use super::cart::CartGrower;
use super::{TargetKind, Tree, TreeConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: u32,
    pub max_depth: u32,
    pub min_samples_split: usize,
    pub min_gain: f64,
    /// Candidate features per split; `None` means ceil(sqrt(p)).
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 10,
            min_samples_split: 5,
            min_gain: 1e-7,
            feature_subsample: None,
            bootstrap: true,
            seed: 4242,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub target: TargetKind,
    pub feature_subsample: usize,
    pub bootstrap_seed: u64,
    pub feature_names: Vec<String>,
}

impl ForestModel {
    /// Mean of per-tree class-frequency vectors; sums to 1 per row.
    pub fn probability(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (a, v) in acc.iter_mut().zip(tree.leaf_value(row)) {
                *a += v;
            }
        }
        let k = self.trees.len() as f64;
        for a in &mut acc {
            *a /= k;
        }
        acc
    }
}

fn tree_rng(seed: u64, tree_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((tree_index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Ascending-sorted random subset of feature indices.
fn sample_features(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Vec<usize> {
    if k >= p {
        return (0..p).collect();
    }
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..k {
        let j = rng.random_range(i..p);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

pub fn train_forest(
    matrix: &FeatureMatrix,
    target: TargetKind,
    config: &ForestConfig,
) -> Result<ForestModel> {
    if config.n_trees < 1 {
        return Err(Error::Config("n_trees must be >= 1".to_string()));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::Domain(
            "cannot train a forest on an empty matrix".to_string(),
        ));
    }
    let p = matrix.n_cols();
    let k = config
        .feature_subsample
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let labels = target.labels(matrix);
    let tree_config = TreeConfig {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        min_gain: config.min_gain,
    };
    let grower = CartGrower {
        matrix,
        labels,
        n_classes: target.n_classes(),
        config: &tree_config,
    };

    let n = matrix.n_rows();
    let mut trees = Vec::with_capacity(config.n_trees as usize);
    for t in 0..config.n_trees {
        let mut rng = tree_rng(config.seed, u64::from(t));
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let tree = grower.grow(rows, &mut || sample_features(&mut rng, p, k));
        trees.push(tree);
    }

    Ok(ForestModel {
        trees,
        n_classes: target.n_classes(),
        target,
        feature_subsample: k,
        bootstrap_seed: config.seed,
        feature_names: matrix.column_names.clone(),
    })
}
