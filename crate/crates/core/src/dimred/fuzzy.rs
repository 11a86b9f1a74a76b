use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::KnnGraph;
use crate::math::{exp, log2};
use crate::{Error, Result};

const SEARCH_ITERATIONS: usize = 64;
const SEARCH_TOLERANCE: f64 = 1e-5;

/// Calibrates the local connectivity of one point from its sorted neighbor
/// distances.
///
/// Returns `(rho, sigma)` where `rho` is the smallest positive distance and
/// `sigma` solves `sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)` by
/// bisection. All-zero distances give `sigma = 1`.
pub fn smooth_knn(distances: &[f64], k: usize) -> (f64, f64) {
    let target = log2(k as f64);
    let Some(rho) = distances.iter().copied().find(|d| *d > 0.0) else {
        return (0.0, 1.0);
    };
    let (mut lo, mut hi, mut mid) = (0.0_f64, f64::INFINITY, 1.0_f64);
    for _ in 0..SEARCH_ITERATIONS {
        let psum: f64 = distances
            .iter()
            .map(|d| exp(-(d - rho).max(0.0) / mid))
            .sum();
        if (psum - target).abs() < SEARCH_TOLERANCE {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    (rho, mid)
}

/// Membership strength of a neighbor at distance `d`.
#[inline]
pub(crate) fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    exp(-(d - rho).max(0.0) / sigma)
}

/// Probabilistic t-conorm: `a + b - a*b`.
pub fn fuzzy_union(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { value: v });
        }
    }
    Ok(a + b - a * b)
}

/// Undirected edge `i < j` of the symmetrized graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyGraph {
    pub n: usize,
    pub neighbor_ids: Vec<Vec<usize>>,
    /// Directed memberships, aligned with `neighbor_ids`.
    pub directed: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Sorted by `(i, j)`.
    pub edges: Vec<Edge>,
}

pub fn build_fuzzy_graph(knn: &KnnGraph) -> FuzzyGraph {
    let n = knn.neighbors.len();
    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut directed: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut neighbor_ids: Vec<Vec<usize>> = Vec::with_capacity(n);
    for list in &knn.neighbors {
        let dists: Vec<f64> = list.iter().map(|nb| nb.distance).collect();
        let (r, s) = smooth_knn(&dists, knn.k);
        directed.push(dists.iter().map(|d| membership(*d, r, s)).collect());
        neighbor_ids.push(list.iter().map(|nb| nb.index).collect());
        rho.push(r);
        sigma.push(s);
    }

    // (lo, hi) -> (weight lo->hi, weight hi->lo)
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, (ids, ws)) in neighbor_ids.iter().zip(&directed).enumerate() {
        for (&j, &w) in ids.iter().zip(ws) {
            if i < j {
                pairs.entry((i, j)).or_default().0 = w;
            } else {
                pairs.entry((j, i)).or_default().1 = w;
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|((i, j), (a, b))| Edge {
            i,
            j,
            // memberships are exp(-x), x >= 0, so always in range
            weight: a + b - a * b,
        })
        .filter(|e| e.weight > 0.0)
        .collect();
    FuzzyGraph {
        n,
        neighbor_ids,
        directed,
        rho,
        sigma,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimred::{knn_graph, Metric};
    use crate::rng;
    use crate::Matrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn achieved(d: &[f64], rho: f64, sigma: f64) -> f64 {
        d.iter().map(|x| exp(-(x - rho).max(0.0) / sigma)).sum()
    }

    #[test]
    fn calibration_target_is_log2_k() {
        let d = [0.5, 1.0, 1.5, 2.0];
        let (rho, sigma) = smooth_knn(&d, 4);
        assert_eq!(rho, 0.5);
        assert!((achieved(&d, rho, sigma) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn all_distances_equal_rho_hits_search_bound() {
        let d = [0.7; 5];
        let (rho, sigma) = smooth_knn(&d, 5);
        assert_eq!(rho, 0.7);
        assert!(sigma > 0.0);
        assert!(sigma < 1e-15);
    }

    #[test]
    fn all_zero_distances_use_unit_sigma() {
        assert_eq!(smooth_knn(&[0.0, 0.0, 0.0], 3), (0.0, 1.0));
    }

    #[test]
    fn rho_skips_zero_distances() {
        let (rho, _) = smooth_knn(&[0.0, 0.3, 0.9], 3);
        assert_eq!(rho, 0.3);
    }

    #[test]
    fn union_examples() {
        assert_eq!(fuzzy_union(0.5, 0.5).unwrap(), 0.75);
        assert_eq!(fuzzy_union(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(fuzzy_union(1.0, 0.3).unwrap(), 1.0);
        assert!(fuzzy_union(1.2, 0.3).is_err());
        assert!(fuzzy_union(0.2, -0.1).is_err());
    }

    #[test]
    fn random_distance_sets_meet_target() {
        let mut r = rng::seeded(11);
        for _ in 0..200 {
            let k = r.random_range(2..40);
            let mut d: alloc::vec::Vec<f64> = (0..k).map(|_| r.random_range(0.0..5.0)).collect();
            d.sort_by(|a, b| a.total_cmp(b));
            let (rho, sigma) = smooth_knn(&d, k);
            assert!(sigma > 0.0 && rho >= 0.0);
            assert!((achieved(&d, rho, sigma) - log2(k as f64)).abs() < 1e-3);
        }
    }

    #[test]
    fn graph_is_symmetric_with_unit_range_weights() {
        let mut r = rng::seeded(3);
        let rows: alloc::vec::Vec<[f64; 3]> = (0..60)
            .map(|_| [r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let g = build_fuzzy_graph(&knn_graph(&x, 6, Metric::Euclidean).unwrap());
        for e in &g.edges {
            assert!(e.i < e.j);
            assert!(e.weight > 0.0 && e.weight <= 1.0);
        }
        assert!(g.sigma.iter().all(|s| *s > 0.0));
        assert!(g.rho.iter().all(|r| *r >= 0.0));
        for i in 0..g.n {
            let (rho, sigma) = (g.rho[i], g.sigma[i]);
            let d: alloc::vec::Vec<f64> = g.directed[i].iter().map(|w| rho - sigma * crate::math::ln(*w)).collect();
            assert!((achieved(&d, rho, sigma) - log2(6.0)).abs() < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn union_commutative_monotone_in_range(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
            let ab = fuzzy_union(a, b).unwrap();
            prop_assert_eq!(ab, fuzzy_union(b, a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            let (lo, hi) = if b <= c { (b, c) } else { (c, b) };
            prop_assert!(fuzzy_union(a, lo).unwrap() <= fuzzy_union(a, hi).unwrap() + 1e-15);
        }
    }
}
