//! CART decision tree with Gini splits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dense::Matrix;

pub const DEFAULT_MAX_DEPTH: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("cannot fit a tree to an empty dataset")]
    EmptyDataset,
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("malformed tree: {0}")]
    Malformed(String),
}

/// Node of a tree stored in preorder. A split's left child follows it
/// directly; `right` indexes its right child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, right: usize },
    Leaf { label: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub max_depth: usize,
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

fn gini_sum(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

impl Builder<'_> {
    fn majority(&self, idx: &[usize]) -> (usize, Vec<usize>) {
        let mut counts = vec![0; self.n_classes];
        idx.iter().for_each(|&i| counts[self.y[i]] += 1);
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        (best, counts)
    }

    /// Best (feature, threshold) by weighted Gini; earlier features and
    /// lower thresholds win ties.
    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for f in 0..self.x.cols {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            left.fill(0);
            right.copy_from_slice(counts);
            for j in 0..n - 1 {
                let (v, y) = pairs[j];
                left[y] += 1;
                right[y] -= 1;
                let next = pairs[j + 1].0;
                if next <= v {
                    continue;
                }
                let score = gini_sum(&left, j + 1) + gini_sum(&right, n - j - 1);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut t = v + (next - v) / 2.0;
                    if t >= next || !t.is_finite() {
                        t = v;
                    }
                    best = Some((score, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) {
        let (label, counts) = self.majority(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.max_depth { None } else { self.best_split(&idx, &counts) };
        let Some((feature, threshold)) = split else {
            self.nodes.push(TreeNode::Leaf { label });
            return;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature, threshold, right: 0 });
        self.grow(l, depth + 1);
        let right_at = self.nodes.len();
        if let TreeNode::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(r, depth + 1);
    }
}

/// Fits a tree; `x` rows are samples. Leaves predict the majority label,
/// lowest label on ties.
pub fn dt_fit(x: &Matrix, y: &[usize], n_classes: usize, max_depth: usize) -> Result<TreeModel, TreeError> {
    if x.rows == 0 {
        return Err(TreeError::EmptyDataset);
    }
    if y.len() != x.rows {
        return Err(TreeError::LabelCount(y.len(), x.rows));
    }
    let n_classes = n_classes.max(y.iter().max().map_or(0, |m| m + 1));
    let mut b = Builder { x, y, n_classes, max_depth, nodes: Vec::new() };
    b.grow((0..x.rows).collect(), 0);
    Ok(TreeModel { max_depth, n_features: x.cols, nodes: b.nodes })
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { label } => return label,
                TreeNode::Split { feature, threshold, right } => {
                    at = if row[feature] <= threshold { at + 1 } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { right, .. } => 1 + walk(nodes, at + 1).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks that the node list is a well-formed preorder tree.
    pub fn validate(&self) -> Result<(), TreeError> {
        fn walk(t: &TreeModel, at: usize) -> Result<usize, TreeError> {
            match t.nodes.get(at) {
                None => Err(TreeError::Malformed(format!("node {at} missing"))),
                Some(TreeNode::Leaf { .. }) => Ok(at + 1),
                Some(&TreeNode::Split { feature, threshold, right }) => {
                    if feature >= t.n_features || !threshold.is_finite() {
                        return Err(TreeError::Malformed(format!("node {at}: feature {feature}, threshold {threshold}")));
                    }
                    let end = walk(t, at + 1)?;
                    if end != right {
                        return Err(TreeError::Malformed(format!("node {at}: right child {right}, expected {end}")));
                    }
                    walk(t, right)
                }
            }
        }
        if walk(self, 0)? != self.nodes.len() {
            return Err(TreeError::Malformed("unreachable nodes".into()));
        }
        Ok(())
    }
}

pub fn dt_predict(model: &TreeModel, x: &Matrix) -> Vec<usize> {
    (0..x.rows).map(|r| model.predict_row(x.row(r))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_is_a_leaf() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let t = dt_fit(&x, &[3, 3], 4, 12).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { label: 3 }]);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn separable_pair_takes_one_split() {
        let x = Matrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 5.0]]).unwrap();
        let t = dt_fit(&x, &[0, 1], 2, 12).unwrap();
        assert_eq!(t.nodes[0], TreeNode::Split { feature: 0, threshold: 0.5, right: 2 });
        assert_eq!(dt_predict(&t, &x), vec![0, 1]);
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let t = dt_fit(&x, &y, 2, 12).unwrap();
        assert_eq!(dt_predict(&t, &x), y);
        t.validate().unwrap();
        let stump = dt_fit(&x, &y, 2, 1).unwrap();
        assert_eq!(stump.depth(), 1);
    }

    #[test]
    fn json_round_trip() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let t = dt_fit(&x, &[0, 1, 2], 3, 12).unwrap();
        let back: TreeModel = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        back.validate().unwrap();
    }

    #[test]
    fn empty_dataset() {
        assert_eq!(dt_fit(&Matrix::zeros(0, 2), &[], 2, 12), Err(TreeError::EmptyDataset));
    }
}
