use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{params, ClusterAssignment, NOISE};
use crate::math::euclidean;
use crate::{Error, Matrix, Result};

/// Density-based clustering with a closed `eps` ball (the point itself
/// counts toward `min_pts`).
///
/// Core points reachable through chains of core neighbors share a cluster;
/// cluster ids follow the row index of each cluster's first core point. A
/// border point joins the cluster of its nearest core point, with equal
/// distances going to the core point with the lexicographically smallest
/// coordinates; the partition is therefore independent of row order.
/// Everything else is noise.
pub fn dbscan(x: &Matrix, eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::config("dbscan needs eps > 0 and min_pts >= 1"));
    }
    let n = x.rows();
    let neighbors = |i: usize| {
        let xi = x.row(i);
        (0..n).filter(move |&j| euclidean(xi, x.row(j)) <= eps)
    };
    let core: Vec<bool> = (0..n).map(|i| neighbors(i).count() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors(p) {
                if core[q] && labels[q] == NOISE {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }

    for p in 0..n {
        if core[p] {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for q in neighbors(p) {
            if core[q] {
                let d = euclidean(x.row(p), x.row(q));
                let closer = best.is_none_or(|(bd, bq)| d < bd || (d == bd && lex_less(x.row(q), x.row(bq))));
                if closer {
                    best = Some((d, q));
                }
            }
        }
        labels[p] = best.map_or(NOISE, |(_, q)| labels[q]);
    }

    ClusterAssignment::new(
        labels,
        "dbscan",
        params([("eps", alloc::format!("{eps}")), ("min_pts", alloc::format!("{min_pts}"))]),
    )
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_groups_no_noise() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [10.0], [10.1]]).unwrap();
        let a = dbscan(&x, 0.5, 2).unwrap();
        assert_eq!(a.labels, vec![0, 0, 0, 1, 1]);
        assert_eq!(a.n_clusters, 2);
    }

    #[test]
    fn isolated_point_is_noise() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [5.0]]).unwrap();
        let a = dbscan(&x, 0.5, 2).unwrap();
        assert_eq!(a.labels, vec![0, 0, -1]);
    }

    #[test]
    fn huge_eps_gives_one_cluster() {
        let x = Matrix::from_rows(&[[0.0], [3.0], [100.0]]).unwrap();
        let a = dbscan(&x, 1000.0, 2).unwrap();
        assert_eq!(a.labels, vec![0, 0, 0]);
    }

    #[test]
    fn closed_ball_boundary() {
        let x = Matrix::from_rows(&[[0.0], [0.5]]).unwrap();
        assert_eq!(dbscan(&x, 0.5, 2).unwrap().labels, vec![0, 0]);
    }

    #[test]
    fn border_point_joins_nearest_core() {
        // cores at 0.0 and 0.7; the border point 0.4 reaches both and is
        // closer to 0.7
        let x = Matrix::from_rows(&[[-0.4], [-0.2], [0.0], [0.4], [0.7], [0.9], [1.1]]).unwrap();
        let a = dbscan(&x, 0.45, 4).unwrap();
        assert_eq!(a.labels, vec![0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn invalid_config() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(dbscan(&x, 0.0, 2).is_err());
        assert!(dbscan(&x, 1.0, 0).is_err());
    }
}
