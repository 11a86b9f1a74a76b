//! Greedy agglomerative clustering.
//!
//! Every step merges the globally closest pair of active clusters. A cluster
//! lives in the slot of its smallest member row, so the merged cluster keeps
//! the lower slot; equal distances go to the lexicographically smallest
//! `(i, j)` slot pair. Each slot caches its nearest higher-numbered slot,
//! which keeps the search close to quadratic overall.
//!
//! Single, complete and average linkage keep a condensed distance matrix and
//! apply the Lance-Williams recurrences. Ward linkage tracks cluster sizes and
//! centroids instead: the Ward recurrence on squared distances is exactly the
//! merge cost `|A||B| / (|A| + |B|) * ||c_A - c_B||^2`, and the centroid form
//! needs no `n x n` storage.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use serde::{Deserialize, Serialize};

use super::{params, ClusterAssignment};
use crate::math::{euclidean, sqrt, squared_euclidean};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }
}

/// One merge of slots `a < b`; the result stays in slot `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Linkage distance; for Ward, `sqrt(2 * merge cost)`.
    pub height: f64,
    pub size: usize,
}

trait Dissimilarity {
    fn dist(&self, i: usize, j: usize) -> f64;
    fn merge(&mut self, a: usize, b: usize, active: &[bool]);
    fn height(&self, d: f64) -> f64 {
        d
    }
}

struct WardCentroids {
    centroids: Matrix,
    sizes: Vec<f64>,
}

impl Dissimilarity for WardCentroids {
    fn dist(&self, i: usize, j: usize) -> f64 {
        let (ni, nj) = (self.sizes[i], self.sizes[j]);
        ni * nj / (ni + nj) * squared_euclidean(self.centroids.row(i), self.centroids.row(j))
    }

    fn merge(&mut self, a: usize, b: usize, _active: &[bool]) {
        let (na, nb) = (self.sizes[a], self.sizes[b]);
        let total = na + nb;
        for c in 0..self.centroids.cols() {
            let v = (na * self.centroids.get(a, c) + nb * self.centroids.get(b, c)) / total;
            self.centroids.set(a, c, v);
        }
        self.sizes[a] = total;
    }

    fn height(&self, d: f64) -> f64 {
        sqrt(2.0 * d)
    }
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
    sizes: Vec<f64>,
    linkage: Linkage,
}

impl Condensed {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }
}

impl Dissimilarity for Condensed {
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    fn merge(&mut self, a: usize, b: usize, active: &[bool]) {
        let (na, nb) = (self.sizes[a], self.sizes[b]);
        for x in 0..self.n {
            if !active[x] || x == a || x == b {
                continue;
            }
            let (dxa, dxb) = (self.dist(x, a), self.dist(x, b));
            let merged = match self.linkage {
                Linkage::Single => dxa.min(dxb),
                Linkage::Complete => dxa.max(dxb),
                Linkage::Average => (na * dxa + nb * dxb) / (na + nb),
                Linkage::Ward => unreachable!("ward uses centroids"),
            };
            let idx = self.index(x, a);
            self.d[idx] = merged;
        }
        self.sizes[a] = na + nb;
    }
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn greedy<D: Dissimilarity>(diss: &mut D, n: usize, k: usize) -> Vec<Merge> {
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut nn: Vec<Option<usize>> = vec![None; n];
    let mut mind = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();

    let recompute = |x: usize, active: &[bool], diss: &D, nn: &mut [Option<usize>], mind: &mut [f64]| {
        let mut best = (None, f64::INFINITY);
        for y in x + 1..n {
            if active[y] {
                let d = diss.dist(x, y);
                if best.0.is_none() || d < best.1 {
                    best = (Some(y), d);
                }
            }
        }
        nn[x] = best.0;
        mind[x] = best.1;
    };

    for x in 0..n {
        recompute(x, &active, diss, &mut nn, &mut mind);
        if nn[x].is_some() {
            heap.push(Reverse(Key(mind[x], x)));
        }
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(k));
    while merges.len() + k < n {
        let Reverse(Key(d, i)) = heap.pop().expect("active pairs remain");
        if !active[i] || nn[i].is_none() || mind[i].to_bits() != d.to_bits() {
            continue;
        }
        let j = nn[i].unwrap();
        diss.merge(i, j, &active);
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            a: i,
            b: j,
            height: diss.height(d),
            size: size[i],
        });

        for x in 0..i {
            if !active[x] {
                continue;
            }
            if nn[x] == Some(i) || nn[x] == Some(j) {
                recompute(x, &active, diss, &mut nn, &mut mind);
                heap.push(Reverse(Key(mind[x], x)));
            } else {
                let dxi = diss.dist(x, i);
                let better = dxi < mind[x] || (dxi == mind[x] && nn[x].is_none_or(|c| i < c));
                if better {
                    nn[x] = Some(i);
                    mind[x] = dxi;
                    heap.push(Reverse(Key(dxi, x)));
                }
            }
        }
        recompute(i, &active, diss, &mut nn, &mut mind);
        if nn[i].is_some() {
            heap.push(Reverse(Key(mind[i], i)));
        }
        for x in i + 1..j {
            if active[x] && nn[x] == Some(j) {
                recompute(x, &active, diss, &mut nn, &mut mind);
                if nn[x].is_some() {
                    heap.push(Reverse(Key(mind[x], x)));
                }
            }
        }
    }
    merges
}

/// Runs the merge sequence until `k` clusters remain and returns both the
/// assignment and the merges performed.
pub fn agglomerative_with_merges(x: &Matrix, k: usize, linkage: Linkage) -> Result<(ClusterAssignment, Vec<Merge>)> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::TooFewPoints {
            requested: k,
            available: n,
        });
    }
    let merges = match linkage {
        Linkage::Ward => {
            let mut diss = WardCentroids {
                centroids: x.clone(),
                sizes: vec![1.0; n],
            };
            greedy(&mut diss, n, k)
        }
        _ => {
            let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    d.push(euclidean(x.row(i), x.row(j)));
                }
            }
            let mut diss = Condensed {
                n,
                d,
                sizes: vec![1.0; n],
                linkage,
            };
            greedy(&mut diss, n, k)
        }
    };

    let mut parent: Vec<usize> = (0..n).collect();
    for m in &merges {
        parent[m.b] = m.a;
    }
    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let roots: Vec<usize> = (0..n).map(root).collect();
    let mut slots = roots.clone();
    slots.sort_unstable();
    slots.dedup();
    let labels = roots
        .iter()
        .map(|r| slots.binary_search(r).unwrap() as i32)
        .collect();
    let assignment = ClusterAssignment::new(
        labels,
        "agglomerative",
        params([("k", alloc::format!("{k}")), ("linkage", linkage.name().into())]),
    )?;
    Ok((assignment, merges))
}

pub fn agglomerative(x: &Matrix, k: usize, linkage: Linkage) -> Result<ClusterAssignment> {
    agglomerative_with_merges(x, k, linkage).map(|(a, _)| a)
}
