use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dimred::{knn_query, Metric};
use crate::Matrix;

/// Stores its training points. Serialized as row ids into the training
/// matrix; call [`KnnModel::attach`] after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub row_ids: Vec<usize>,
    pub targets: Vec<usize>,
    #[serde(skip)]
    points: Option<Matrix>,
}

impl KnnModel {
    pub fn fit(points: Matrix, row_ids: Vec<usize>, targets: Vec<usize>, k: usize) -> Self {
        Self {
            k,
            row_ids,
            targets,
            points: Some(points),
        }
    }

    /// Restores the stored points from the matrix `row_ids` index into.
    pub fn attach(&mut self, source: &Matrix) {
        self.points = Some(source.select_rows(&self.row_ids));
    }

    pub fn is_attached(&self) -> bool {
        self.points.is_some()
    }

    /// Class frequencies among the `k` nearest training points.
    pub fn predict_proba(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let points = self.points.as_ref().expect("kNN model has no training points attached");
        let k = self.k.min(points.rows()).max(1);
        let mut p = vec![0.0; n_classes];
        for nb in knn_query(points, x, k, Metric::Euclidean) {
            p[self.targets[nb.index]] += 1.0;
        }
        p.iter_mut().for_each(|v| *v /= k as f64);
        p
    }
}
