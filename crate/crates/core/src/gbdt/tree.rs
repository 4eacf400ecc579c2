use crate::error::{Error, Result};

/// One node of a tree in flat pre-order form. Leaves ignore the split
/// fields; internal nodes ignore `leaf_value`. An internal node's left
/// subtree starts right after it and its right subtree follows the left one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub split_feature: u32,
    pub split_threshold: f64,
    /// Side taken when the split feature is missing.
    pub default_left: bool,
    pub is_leaf: bool,
    pub leaf_value: f64,
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode {
            split_feature: 0,
            split_threshold: 0.0,
            default_left: false,
            is_leaf: true,
            leaf_value: value,
        }
    }

    pub fn split(feature: u32, threshold: f64, default_left: bool) -> Self {
        TreeNode {
            split_feature: feature,
            split_threshold: threshold,
            default_left,
            is_leaf: false,
            leaf_value: 0.0,
        }
    }
}

/// A regression tree. Inputs with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    right_child: Vec<u32>,
}

impl Tree {
    /// Validates a pre-order node list and indexes its right children.
    pub fn from_preorder(nodes: Vec<TreeNode>) -> Result<Self> {
        let mut right_child = vec![0u32; nodes.len()];
        let end = index_subtree(&nodes, 0, &mut right_child)?;
        if end != nodes.len() {
            return Err(Error::Malformed(format!(
                "tree encoding has {} trailing nodes",
                nodes.len() - end
            )));
        }
        for n in &nodes {
            if !n.is_leaf && !n.split_threshold.is_finite() {
                return Err(Error::Malformed("split threshold is not finite".into()));
            }
            if n.is_leaf && !n.leaf_value.is_finite() {
                return Err(Error::Malformed("leaf value is not finite".into()));
            }
        }
        Ok(Tree { nodes, right_child })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf).count()
    }

    pub fn max_feature(&self) -> Option<u32> {
        self.nodes.iter().filter(|n| !n.is_leaf).map(|n| n.split_feature).max()
    }

    pub fn predict(&self, x: &[Option<f64>]) -> f64 {
        let mut at = 0usize;
        loop {
            let n = &self.nodes[at];
            if n.is_leaf {
                return n.leaf_value;
            }
            let go_left = match x[n.split_feature as usize] {
                Some(v) => v <= n.split_threshold,
                None => n.default_left,
            };
            at = if go_left { at + 1 } else { self.right_child[at] as usize };
        }
    }
}

fn index_subtree(nodes: &[TreeNode], at: usize, right: &mut [u32]) -> Result<usize> {
    // explicit stack: trees from untrusted files may be deep
    let mut stack = vec![(at, false)];
    let mut next = at;
    while let Some((i, left_done)) = stack.pop() {
        if !left_done {
            let node = nodes.get(i).ok_or(Error::Truncated)?;
            next = i + 1;
            if !node.is_leaf {
                stack.push((i, true));
                stack.push((i + 1, false));
            }
        } else {
            right[i] = next as u32;
            stack.push((next, false));
        }
    }
    Ok(next)
}
