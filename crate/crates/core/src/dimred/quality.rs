use alloc::vec;
use alloc::vec::Vec;

use crate::math::squared_euclidean;
use crate::{Error, Matrix, Result};

fn sorted_neighbors(x: &Matrix, i: usize) -> Vec<usize> {
    let xi = x.row(i);
    let mut d: Vec<(f64, usize)> = (0..x.rows())
        .filter(|&j| j != i)
        .map(|j| (squared_euclidean(xi, x.row(j)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, j)| j).collect()
}

/// Distance between the two group centroids divided by the mean pairwise
/// distance within groups. `groups` holds 0 or 1 per row.
pub fn separation_ratio(coords: &Matrix, groups: &[usize]) -> Result<f64> {
    if groups.len() != coords.rows() {
        return Err(Error::Dimension {
            expected: coords.rows(),
            actual: groups.len(),
        });
    }
    let members: [Vec<usize>; 2] = [0, 1].map(|g| (0..groups.len()).filter(|&i| groups[i] == g).collect());
    if members.iter().any(|m| m.len() < 2) {
        return Err(Error::precondition("each group needs at least two rows"));
    }
    let centroid = |m: &[usize]| coords.select_rows(m).column_means();
    let gap = crate::math::euclidean(&centroid(&members[0]), &centroid(&members[1]));
    let (mut total, mut pairs) = (0.0, 0usize);
    for m in &members {
        for (a, &i) in m.iter().enumerate() {
            for &j in &m[a + 1..] {
                total += crate::math::euclidean(coords.row(i), coords.row(j));
                pairs += 1;
            }
        }
    }
    Ok(gap / (total / pairs as f64))
}

/// Trustworthiness of an embedding: 1 minus a normalized penalty for every
/// point that enters an embedded k-neighborhood while ranking beyond `k` in
/// the input space. Euclidean distances on both sides.
pub fn trustworthiness(x: &Matrix, coords: &Matrix, k: usize) -> Result<f64> {
    let n = x.rows();
    if coords.rows() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: coords.rows(),
        });
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::precondition("trustworthiness needs 0 < k < n/2"));
    }
    let mut rank = vec![0usize; n];
    let mut penalty = 0.0;
    for i in 0..n {
        for (r, j) in sorted_neighbors(x, i).into_iter().enumerate() {
            rank[j] = r + 1;
        }
        for &j in sorted_neighbors(coords, i).iter().take(k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty)
}
