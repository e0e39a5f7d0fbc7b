use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{train_tree, DecisionTree};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// One random forest in the pool recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub forests: Vec<ForestConfig>,
    /// Candidate features per node; `None` means `floor(sqrt(n_features))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

impl Default for PoolConfig {
    /// 25 trees of depth 10 followed by 20 trees of depth 5.
    fn default() -> Self {
        PoolConfig {
            forests: vec![
                ForestConfig {
                    n_trees: 25,
                    max_depth: 10,
                },
                ForestConfig {
                    n_trees: 20,
                    max_depth: 5,
                },
            ],
            max_features: None,
        }
    }
}

impl PoolConfig {
    pub fn pool_size(&self) -> usize {
        self.forests.iter().map(|f| f.n_trees).sum()
    }

    pub fn max_features_for(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
            .min(n_features)
    }
}

/// Ordered pool of trees. The position of a tree is its identity everywhere
/// downstream (selection, serialization).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierPool {
    trees: Vec<DecisionTree>,
    origins: Vec<usize>,
    seed: u64,
}

impl ClassifierPool {
    pub fn new(trees: Vec<DecisionTree>, origins: Vec<usize>, seed: u64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument(
                "pool must contain at least one tree".into(),
            ));
        }
        if origins.len() != trees.len() {
            return Err(Error::shape(trees.len(), origins.len()));
        }
        let (nf, nc) = (trees[0].n_features(), trees[0].n_classes());
        if trees
            .iter()
            .any(|t| t.n_features() != nf || t.n_classes() != nc)
        {
            return Err(Error::InvalidArgument(
                "all pool trees must share feature and class counts".into(),
            ));
        }
        Ok(ClassifierPool {
            trees,
            origins,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn tree(&self, i: usize) -> &DecisionTree {
        &self.trees[i]
    }

    /// Forest index each tree came from (0 for the first configured forest).
    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.trees[0].n_classes()
    }

    /// Prediction of every tree for `x`, written to `out`.
    pub fn predict_all_into(&self, x: &[f32], out: &mut [u16]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::shape(self.n_features(), x.len()));
        }
        if out.len() != self.len() {
            return Err(Error::shape(self.len(), out.len()));
        }
        for (o, t) in out.iter_mut().zip(&self.trees) {
            *o = t.predict_class(x);
        }
        Ok(())
    }

    pub fn predict_all(&self, x: &[f32]) -> Result<Vec<u16>> {
        let mut out = vec![0; self.len()];
        self.predict_all_into(x, &mut out)?;
        Ok(out)
    }

    /// CRC32 over the canonical node encoding of every tree, in pool order.
    pub fn fingerprint(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for t in &self.trees {
            h.update(&(t.node_count() as u32).to_le_bytes());
            for n in t.nodes() {
                h.update(&n.feature.to_le_bytes());
                h.update(&n.threshold.to_le_bytes());
                h.update(&n.right_jump.to_le_bytes());
            }
        }
        h.finalize()
    }
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Trains every configured forest on bootstrap resamples of `train`.
///
/// Tree `t` (global pool position) uses seed `seed ^ splitmix64(t)` for its
/// bootstrap draw and `splitmix64` of that for its feature draws, so the pool
/// does not depend on training order.
pub fn generate_pool(train: &Dataset, config: &PoolConfig, seed: u64) -> Result<ClassifierPool> {
    if config.pool_size() == 0 {
        return Err(Error::InvalidArgument(
            "pool configuration has no trees".into(),
        ));
    }
    let max_features = config.max_features_for(train.n_features());
    let n = train.n_samples();
    let mut trees = Vec::with_capacity(config.pool_size());
    let mut origins = Vec::with_capacity(config.pool_size());
    for (forest_idx, forest) in config.forests.iter().enumerate() {
        for _ in 0..forest.n_trees {
            let tree_seed = seed::derive(seed, trees.len() as u64);
            let sample = bootstrap_indices(n, tree_seed);
            let tree = train_tree(
                train,
                &sample,
                forest.max_depth,
                max_features,
                seed::splitmix64(tree_seed),
            )?;
            trees.push(tree);
            origins.push(forest_idx);
        }
    }
    ClassifierPool::new(trees, origins, seed)
}
