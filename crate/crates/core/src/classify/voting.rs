use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{DecisionTree, KnnModel, LinearSvm};
use crate::cluster::NOISE;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VotingConfig {
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_samples_leaf: usize,
    pub svm_epochs: usize,
    pub svm_learning_rate: f64,
    pub svm_lambda: f64,
    pub seed: u64,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self {
            knn_k: 5,
            tree_max_depth: 10,
            tree_min_samples_leaf: 1,
            svm_epochs: 30,
            svm_learning_rate: 0.1,
            svm_lambda: 1e-4,
            seed: 0,
        }
    }
}

/// Equal-weight soft vote over kNN, CART and linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingClassifier {
    /// Cluster label of each class index, ascending.
    pub classes: Vec<i32>,
    pub dims: usize,
    pub knn: KnnModel,
    pub tree: DecisionTree,
    pub svm: LinearSvm,
}

/// Trains all three base models on the non-noise rows of `x`.
pub fn fit_voting(x: &Matrix, labels: &[i32], config: &VotingConfig) -> Result<VotingClassifier> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    let mut classes: Vec<i32> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let row_ids: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] != NOISE).collect();
    let targets: Vec<usize> = row_ids
        .iter()
        .map(|&i| classes.binary_search(&labels[i]).unwrap())
        .collect();
    let rows: Vec<&[f64]> = row_ids.iter().map(|&i| x.row(i)).collect();
    let n_classes = classes.len();

    let tree = DecisionTree::fit(&rows, &targets, n_classes, config.tree_max_depth, config.tree_min_samples_leaf);
    let svm = LinearSvm::fit(
        &rows,
        &targets,
        n_classes,
        config.svm_epochs,
        config.svm_learning_rate,
        config.svm_lambda,
        config.seed,
    );
    let knn = KnnModel::fit(x.select_rows(&row_ids), row_ids, targets, config.knn_k);
    Ok(VotingClassifier {
        classes,
        dims: x.cols(),
        knn,
        tree,
        svm,
    })
}

impl VotingClassifier {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Per-base distributions `[knn, tree, svm]`.
    pub fn base_probas(&self, x: &[f64]) -> Result<[Vec<f64>; 3]> {
        self.check(x)?;
        Ok([
            self.knn.predict_proba(x, self.classes.len()),
            self.tree.predict_proba(x),
            self.svm.predict_proba(x),
        ])
    }

    /// Mean of the three base distributions, indexed like `classes`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let bases = self.base_probas(x)?;
        Ok(average(&bases))
    }

    /// Cluster label with the highest averaged probability; ties go to the
    /// lowest label.
    pub fn predict(&self, x: &[f64]) -> Result<i32> {
        Ok(self.classes[argmax(&self.predict_proba(x)?)])
    }
}

pub(crate) fn average(bases: &[Vec<f64>]) -> Vec<f64> {
    let n = bases[0].len();
    (0..n)
        .map(|c| bases.iter().map(|b| b[c]).sum::<f64>() / bases.len() as f64)
        .collect()
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}
