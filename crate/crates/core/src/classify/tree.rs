use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Rows with `x[feature] <= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Axis-aligned CART classifier grown on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t) * (c as f64 / t)).sum::<f64>()
}

struct Builder<'a> {
    rows: &'a [&'a [f64]],
    targets: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        idx.iter().for_each(|&i| c[self.targets[i]] += 1);
        c
    }

    /// Lowest weighted impurity; ties keep the lower feature, then the lower
    /// threshold.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let d = self.rows.first().map_or(0, |r| r.len());
        let total = self.counts(idx);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..d {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for pos in 0..n - 1 {
                left[self.targets[order[pos]]] += 1;
                let (lo, hi) = (self.rows[order[pos]][f], self.rows[order[pos + 1]][f]);
                let n_left = pos + 1;
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left)) / n as f64;
                if best.is_none_or(|b| score < b.2) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, score));
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], depth: usize) -> TreeNode {
        let counts = self.counts(idx);
        let n = idx.len();
        let impurity = gini(&counts, n);
        if depth >= self.max_depth || impurity == 0.0 || n < 2 * self.min_leaf {
            return TreeNode::Leaf { counts };
        }
        match self.best_split(idx) {
            Some((feature, threshold, score)) if score < impurity - 1e-12 => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.grow(&l, depth + 1)),
                    right: Box::new(self.grow(&r, depth + 1)),
                }
            }
            _ => TreeNode::Leaf { counts },
        }
    }
}

impl DecisionTree {
    pub fn fit(rows: &[&[f64]], targets: &[usize], n_classes: usize, max_depth: usize, min_samples_leaf: usize) -> Self {
        let min_leaf = min_samples_leaf.max(1);
        let b = Builder {
            rows,
            targets,
            n_classes,
            max_depth,
            min_leaf,
        };
        let idx: Vec<usize> = (0..rows.len()).collect();
        Self {
            root: b.grow(&idx, 0),
            max_depth,
            min_samples_leaf: min_leaf,
        }
    }

    fn leaf(&self, x: &[f64]) -> &[usize] {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Class frequencies of the leaf `x` falls into.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.leaf(x);
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    /// Sample count of the smallest leaf.
    pub fn min_leaf_size(&self) -> usize {
        fn min_leaf(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { counts } => counts.iter().sum(),
                TreeNode::Split { left, right, .. } => min_leaf(left).min(min_leaf(right)),
            }
        }
        min_leaf(&self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn splits_one_feature() {
        let rows: [&[f64]; 4] = [&[0.0, 5.0], &[1.0, 5.0], &[2.0, 5.0], &[3.0, 5.0]];
        let t = DecisionTree::fit(&rows, &[0, 0, 1, 1], 2, 5, 1);
        match &t.root {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict_proba(&[0.5, 0.0]), vec![1.0, 0.0]);
        assert_eq!(t.predict_proba(&[2.5, 0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn equal_gain_prefers_lower_feature() {
        // both features separate perfectly
        let rows: [&[f64]; 2] = [&[0.0, 0.0], &[1.0, 1.0]];
        let t = DecisionTree::fit(&rows, &[0, 1], 2, 3, 1);
        assert!(matches!(t.root, TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn depth_zero_is_a_leaf() {
        let rows: [&[f64]; 2] = [&[0.0], &[1.0]];
        let t = DecisionTree::fit(&rows, &[0, 1], 2, 0, 1);
        assert_eq!(t.predict_proba(&[0.0]), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn respects_depth_and_leaf_bounds(seed in 0u64..500, depth in 0usize..6, leaf in 1usize..8) {
            let mut r = rng::seeded(seed);
            let data: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| r.random_range(0.0..1.0)).collect()).collect();
            let targets: Vec<usize> = (0..60).map(|_| r.random_range(0..3)).collect();
            let rows: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
            let t = DecisionTree::fit(&rows, &targets, 3, depth, leaf);
            prop_assert!(t.depth() <= depth);
            prop_assert!(t.min_leaf_size() >= leaf.min(60));
            let p = t.predict_proba(&data[0]);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
