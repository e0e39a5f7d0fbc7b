//! Decision trees stored as flat preorder node arrays, CART training, and the
//! two-forest classifier pool.
//!
//! Node layout: the left child of an internal node `i` is `i + 1`; its right
//! child is `right_jump`, an index from the start of the tree. A leaf has
//! `feature == -1` and stores its class id in `right_jump`. The split rule is
//! `x[feature] <= threshold` goes left.

mod cart;
mod pool;

pub use cart::{train_tree, TreeParams};
pub use pool::{bootstrap_indices, generate_pool, ClassifierPool, ForestConfig, PoolConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub feature: i16,
    pub threshold: f32,
    pub right_jump: u16,
}

impl TreeNode {
    pub const LEAF: i16 = -1;

    pub fn leaf(class: u16) -> Self {
        TreeNode {
            feature: Self::LEAF,
            threshold: 0.0,
            right_jump: class,
        }
    }

    pub fn split(feature: i16, threshold: f32, right_jump: u16) -> Self {
        TreeNode {
            feature,
            threshold,
            right_jump,
        }
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

/// A trained tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    depth: usize,
    n_classes: usize,
    n_features: usize,
}

impl DecisionTree {
    /// Wraps a node array after full structural validation.
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize, n_classes: usize) -> Result<Self> {
        let depth = validate_nodes(&nodes, n_features, n_classes)?;
        Ok(DecisionTree {
            nodes,
            depth,
            n_classes,
            n_features,
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Walks the tree for `x`. Returns the leaf class and the number of nodes visited.
    pub fn predict(&self, x: &[f32]) -> Result<(u16, u32)> {
        if x.len() != self.n_features {
            return Err(Error::shape(self.n_features, x.len()));
        }
        walk(&self.nodes, x)
    }

    /// Class only; the tree is known to be valid and `x` long enough.
    #[inline]
    pub fn predict_class(&self, x: &[f32]) -> u16 {
        let mut i = 0usize;
        loop {
            let node = self.nodes[i];
            if node.is_leaf() {
                return node.right_jump;
            }
            i = if x[node.feature as usize] <= node.threshold {
                i + 1
            } else {
                node.right_jump as usize
            };
        }
    }
}

/// Walks a node array with bounds and progress checks.
#[inline]
pub(crate) fn walk(nodes: &[TreeNode], x: &[f32]) -> Result<(u16, u32)> {
    let mut i = 0usize;
    let mut visited = 0u32;
    loop {
        let node = nodes
            .get(i)
            .ok_or_else(|| Error::ModelCorrupt(format!("node index {i} out of range")))?;
        visited += 1;
        if node.is_leaf() {
            return Ok((node.right_jump, visited));
        }
        let v = *x
            .get(node.feature as usize)
            .ok_or_else(|| Error::ModelCorrupt(format!("feature {} out of range", node.feature)))?;
        let next = if v <= node.threshold {
            i + 1
        } else {
            node.right_jump as usize
        };
        if next <= i {
            return Err(Error::ModelCorrupt(format!(
                "node {i} jumps backwards to {next}"
            )));
        }
        i = next;
    }
}

/// Checks the preorder layout and returns the tree depth.
///
/// Every internal node must have its left subtree occupy exactly
/// `i + 1 .. right_jump`, and the root's subtree must cover the whole array,
/// so every node is reachable exactly once and every walk terminates.
pub(crate) fn validate_nodes(
    nodes: &[TreeNode],
    n_features: usize,
    n_classes: usize,
) -> Result<usize> {
    let len = nodes.len();
    if len == 0 {
        return Err(Error::ModelCorrupt("tree has no nodes".into()));
    }
    if len > u16::MAX as usize {
        return Err(Error::Capacity(format!(
            "tree has {len} nodes, limit is {}",
            u16::MAX
        )));
    }
    // subtree end (exclusive) per node, filled right to left
    let mut end = vec![0usize; len];
    for i in (0..len).rev() {
        let node = &nodes[i];
        if node.is_leaf() {
            if node.feature != TreeNode::LEAF {
                return Err(Error::ModelCorrupt(format!(
                    "node {i}: invalid feature {}",
                    node.feature
                )));
            }
            if node.right_jump as usize >= n_classes {
                return Err(Error::ModelCorrupt(format!(
                    "node {i}: leaf class {} >= {n_classes}",
                    node.right_jump
                )));
            }
            end[i] = i + 1;
            continue;
        }
        let rj = node.right_jump as usize;
        if node.feature as usize >= n_features {
            return Err(Error::ModelCorrupt(format!(
                "node {i}: feature {} >= {n_features}",
                node.feature
            )));
        }
        if !node.threshold.is_finite() {
            return Err(Error::ModelCorrupt(format!(
                "node {i}: non-finite threshold"
            )));
        }
        if i + 1 >= len || rj <= i + 1 || rj >= len {
            return Err(Error::ModelCorrupt(format!(
                "node {i}: right child {rj} outside ({}, {len})",
                i + 1
            )));
        }
        if end[i + 1] != rj {
            return Err(Error::ModelCorrupt(format!(
                "node {i}: left subtree ends at {}, right child starts at {rj}",
                end[i + 1]
            )));
        }
        end[i] = end[rj];
    }
    if end[0] != len {
        return Err(Error::ModelCorrupt(format!(
            "root subtree covers {} of {len} nodes",
            end[0]
        )));
    }
    let mut depth = vec![0usize; len];
    let mut max_depth = 0;
    for i in 0..len {
        max_depth = max_depth.max(depth[i]);
        let node = &nodes[i];
        if !node.is_leaf() {
            depth[i + 1] = depth[i] + 1;
            depth[node.right_jump as usize] = depth[i] + 1;
        }
    }
    Ok(max_depth)
}
