use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use super::Metric;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index))
}

/// Exact k-nearest-neighbor lists, each sorted by distance then row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGraph {
    pub k: usize,
    pub neighbors: Vec<Vec<Neighbor>>,
}

/// The `k` nearest entries of `candidates`, sorted.
fn k_smallest(mut candidates: Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_by(by_distance_then_index);
    candidates
}

/// Brute-force neighbor search over all pairs. A point is never its own
/// neighbor; equal distances go to the lower row index.
pub fn knn_graph(x: &Matrix, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::TooFewPoints {
            requested: k + 1,
            available: n,
        });
    }
    let neighbors = (0..n)
        .map(|i| {
            let xi = x.row(i);
            let candidates = (0..n)
                .filter(|&j| j != i)
                .map(|j| Neighbor {
                    index: j,
                    distance: metric.distance(xi, x.row(j)),
                })
                .collect();
            k_smallest(candidates, k)
        })
        .collect();
    Ok(KnnGraph { k, neighbors })
}

/// The `k` nearest rows of `x` to an outside point `q`.
pub fn knn_query(x: &Matrix, q: &[f64], k: usize, metric: Metric) -> Vec<Neighbor> {
    let candidates = (0..x.rows())
        .map(|j| Neighbor {
            index: j,
            distance: metric.distance(q, x.row(j)),
        })
        .collect();
    k_smallest(candidates, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ids(g: &KnnGraph) -> Vec<Vec<usize>> {
        g.neighbors.iter().map(|l| l.iter().map(|n| n.index).collect()).collect()
    }

    #[test]
    fn one_dimensional_nearest() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let g = knn_graph(&x, 1, Metric::Euclidean).unwrap();
        assert_eq!(ids(&g), vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn duplicates_tie_to_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0], [5.0]]).unwrap();
        let g = knn_graph(&x, 2, Metric::Euclidean).unwrap();
        assert_eq!(ids(&g), vec![vec![1, 2], vec![0, 2], vec![0, 1], vec![0, 1]]);
        assert_eq!(g.neighbors[0][0].distance, 0.0);
    }

    #[test]
    fn k_must_be_below_n() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(knn_graph(&x, 2, Metric::Euclidean).is_err());
        assert!(knn_graph(&x, 1, Metric::Manhattan).is_ok());
    }

    #[test]
    fn manhattan_metric() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.5]]).unwrap();
        let g = knn_graph(&x, 1, Metric::Manhattan).unwrap();
        // |(0,0)-(0,1.5)| = 1.5 < |(0,0)-(1,1)| = 2
        assert_eq!(g.neighbors[0][0].index, 2);
        assert_eq!(g.neighbors[0][0].distance, 1.5);
    }
}
