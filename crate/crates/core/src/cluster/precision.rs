use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Fraction of datapoints whose cluster maps to their reference class under
/// the best injective cluster-to-class mapping. Noise (`-1`) is always wrong.
///
/// The mapping is exact for up to 8 clusters and greedy by largest overlap
/// beyond that.
pub fn precision(labels: &[i32], reference: &[usize]) -> Result<f64> {
    if labels.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut clusters: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let classes = reference.iter().copied().max().map_or(0, |m| m + 1);
    let mut overlap = vec![vec![0usize; classes]; clusters.len()];
    for (&l, &r) in labels.iter().zip(reference) {
        if l >= 0 {
            let c = clusters.binary_search(&l).unwrap();
            overlap[c][r] += 1;
        }
    }
    let correct = if clusters.len() <= 8 {
        exact(&overlap, classes)
    } else {
        greedy(&overlap, classes)
    };
    Ok(correct as f64 / labels.len() as f64)
}

/// Each class takes at most one cluster; DP over subsets of used clusters.
fn exact(overlap: &[Vec<usize>], classes: usize) -> usize {
    let c = overlap.len();
    let full = 1usize << c;
    let mut best = vec![0usize; full];
    for class in 0..classes {
        let prev = best.clone();
        for mask in 0..full {
            for (cl, row) in overlap.iter().enumerate() {
                if mask & (1 << cl) == 0 {
                    let next = mask | (1 << cl);
                    best[next] = best[next].max(prev[mask] + row[class]);
                }
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

fn greedy(overlap: &[Vec<usize>], classes: usize) -> usize {
    let mut used_cluster = vec![false; overlap.len()];
    let mut used_class = vec![false; classes];
    let mut total = 0;
    loop {
        let mut pick: Option<(usize, usize, usize)> = None;
        for (cl, row) in overlap.iter().enumerate() {
            if used_cluster[cl] {
                continue;
            }
            for (class, &o) in row.iter().enumerate() {
                if !used_class[class] && o > 0 && pick.is_none_or(|p| o > p.2) {
                    pick = Some((cl, class, o));
                }
            }
        }
        let Some((cl, class, o)) = pick else {
            return total;
        };
        used_cluster[cl] = true;
        used_class[class] = true;
        total += o;
    }
}
