//! Greedy CART growth with Gini impurity and per-node random feature subsets.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DecisionTree, TreeNode};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Candidate features drawn (without replacement) at every node.
    pub max_features: usize,
}

/// Split quality `Σ l_c² / n_L + Σ r_c² / n_R`, kept as an exact fraction.
/// Larger is better: weighted child Gini equals `1 - score / n`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sum_left_sq: u64, n_left: u64, sum_right_sq: u64, n_right: u64) -> Self {
        Score {
            num: sum_left_sq as u128 * n_right as u128 + sum_right_sq as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f32,
    score: Score,
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [u16],
    n_classes: usize,
    params: TreeParams,
    rng: ChaCha8Rng,
    feature_perm: Vec<usize>,
    candidates: Vec<usize>,
    column: Vec<(f32, u16)>,
    left_counts: Vec<u64>,
    nodes: Vec<TreeNode>,
}

fn majority(counts: &[u64]) -> u16 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u16
}

/// Midpoint of two consecutive distinct values, guaranteed to satisfy
/// `lo <= t < hi` after rounding to `f32`.
fn midpoint(lo: f32, hi: f32) -> f32 {
    let mid = ((lo as f64 + hi as f64) * 0.5) as f32;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

impl Grower<'_> {
    fn grow(&mut self, samples: &mut [u32], depth: usize) -> Result<()> {
        let mut counts = vec![0u64; self.n_classes];
        for &s in samples.iter() {
            counts[self.y[s as usize] as usize] += 1;
        }
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&n| n > 0).count() <= 1;
        if depth >= self.params.max_depth || pure || samples.len() < 2 {
            self.nodes.push(TreeNode::leaf(label));
            return Ok(());
        }
        let Some(split) = self.best_split(samples, &counts) else {
            self.nodes.push(TreeNode::leaf(label));
            return Ok(());
        };

        let feature = split.feature;
        let mut boundary = 0;
        for i in 0..samples.len() {
            if self.x.get(samples[i] as usize, feature) <= split.threshold {
                samples.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left, right) = samples.split_at_mut(boundary);
        debug_assert!(!left.is_empty() && !right.is_empty());

        let at = self.nodes.len();
        self.nodes
            .push(TreeNode::split(feature as i16, split.threshold, 0));
        self.grow(left, depth + 1)?;
        let right_at = self.nodes.len();
        if right_at > u16::MAX as usize {
            return Err(Error::Capacity(format!(
                "tree exceeds {} nodes; lower max_depth",
                u16::MAX
            )));
        }
        self.nodes[at].right_jump = right_at as u16;
        self.grow(right, depth + 1)
    }

    fn draw_candidates(&mut self) {
        // partial Fisher-Yates over a persistent permutation
        let n = self.feature_perm.len();
        let k = self.params.max_features;
        for i in 0..k {
            let j = self.rng.random_range(i..n);
            self.feature_perm.swap(i, j);
        }
        self.candidates.clear();
        self.candidates.extend_from_slice(&self.feature_perm[..k]);
        self.candidates.sort_unstable();
    }

    /// Best impurity-reducing split among this node's candidate features.
    /// Ties go to the smaller feature index, then the smaller threshold.
    fn best_split(&mut self, samples: &[u32], counts: &[u64]) -> Option<Split> {
        self.draw_candidates();
        let n = samples.len() as u64;
        let total_sq: u64 = counts.iter().map(|c| c * c).sum();
        let mut best: Option<Split> = None;

        for ci in 0..self.candidates.len() {
            let feature = self.candidates[ci];
            self.column.clear();
            self.column.extend(
                samples
                    .iter()
                    .map(|&s| (self.x.get(s as usize, feature), self.y[s as usize])),
            );
            self.column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.column[0].0 == self.column[self.column.len() - 1].0 {
                continue;
            }
            self.left_counts.iter_mut().for_each(|c| *c = 0);
            let (mut left_sq, mut right_sq) = (0u64, total_sq);
            for i in 0..self.column.len() - 1 {
                let c = self.column[i].1 as usize;
                let l = self.left_counts[c];
                let r = counts[c] - l;
                left_sq += 2 * l + 1;
                right_sq -= 2 * r - 1;
                self.left_counts[c] = l + 1;

                let (lo, hi) = (self.column[i].0, self.column[i + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = i as u64 + 1;
                let score = Score::new(left_sq, n_left, right_sq, n - n_left);
                if best.is_none_or(|b| score.cmp(&b.score) == Ordering::Greater) {
                    best = Some(Split {
                        feature,
                        threshold: midpoint(lo, hi),
                        score,
                    });
                }
            }
        }
        // must strictly beat the parent: score / 1 > total_sq / n
        let parent = Score {
            num: total_sq as u128,
            den: n as u128,
        };
        best.filter(|b| b.score.cmp(&parent) == Ordering::Greater)
    }
}

/// Trains one CART tree on `data` restricted to `sample_indices` (repeats allowed,
/// as produced by bootstrap sampling).
///
/// Growth stops at `max_depth`, at a pure node, or when no candidate split
/// lowers the weighted Gini impurity. Leaves hold the majority class, ties to
/// the smallest class id.
pub fn train_tree(
    data: &Dataset,
    sample_indices: &[usize],
    max_depth: usize,
    max_features: usize,
    rng_seed: u64,
) -> Result<DecisionTree> {
    if sample_indices.is_empty() {
        return Err(Error::InvalidArgument(
            "train_tree needs at least one sample".into(),
        ));
    }
    let n_features = data.n_features();
    if max_features == 0 || max_features > n_features {
        return Err(Error::InvalidArgument(format!(
            "max_features must lie in 1..={n_features}, got {max_features}"
        )));
    }
    if n_features > i16::MAX as usize {
        return Err(Error::Capacity(format!(
            "{n_features} features exceed the node format limit of {}",
            i16::MAX
        )));
    }
    if let Some(&bad) = sample_indices.iter().find(|&&i| i >= data.n_samples()) {
        return Err(Error::InvalidArgument(format!(
            "sample index {bad} out of range"
        )));
    }
    if data.n_samples() > u32::MAX as usize {
        return Err(Error::Capacity("more than u32::MAX samples".into()));
    }
    let mut samples: Vec<u32> = sample_indices.iter().map(|&i| i as u32).collect();
    let mut grower = Grower {
        x: data.features(),
        y: data.labels(),
        n_classes: data.n_classes(),
        params: TreeParams {
            max_depth,
            max_features,
        },
        rng: seed::rng(rng_seed),
        feature_perm: (0..n_features).collect(),
        candidates: Vec::with_capacity(max_features),
        column: Vec::with_capacity(samples.len()),
        left_counts: vec![0; data.n_classes()],
        nodes: Vec::new(),
    };
    grower.grow(&mut samples, 0)?;
    DecisionTree::from_nodes(grower.nodes, n_features, data.n_classes())
}
