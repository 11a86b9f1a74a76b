use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{params, ClusterAssignment};
use crate::math::squared_euclidean;
use crate::{rng, Error, Matrix, Result};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after each assignment step of the winning run.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    /// Index of the nearest centroid; ties go to the lower index.
    pub fn predict(&self, row: &[f64]) -> usize {
        nearest(&self.centroids, row).0
    }
}

fn nearest(centroids: &Matrix, row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_euclidean(row, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, rng: &mut rng::SeededRng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.iter_rows().map(|r| squared_euclidean(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, r) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(squared_euclidean(r, x.row(pick)));
        }
    }
    centroids
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, r) in x.iter_rows().enumerate() {
        let (c, d) = nearest(centroids, r);
        labels[i] = c;
        inertia += d;
    }
    inertia
}

/// Gives every empty cluster the point farthest from its own centroid.
fn repair_empty(x: &Matrix, centroids: &mut Matrix, labels: &mut [usize]) -> bool {
    let k = centroids.rows();
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repaired;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, r) in x.iter_rows().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = squared_euclidean(r, centroids.row(labels[i]));
            if d > far.1 {
                far = (i, d);
            }
        }
        if far.0 == usize::MAX {
            return repaired;
        }
        labels[far.0] = empty;
        centroids.row_mut(empty).copy_from_slice(x.row(far.0));
        repaired = true;
    }
}

fn inertia_of(x: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    x.iter_rows()
        .zip(labels)
        .map(|(r, &l)| squared_euclidean(r, centroids.row(l)))
        .sum()
}

fn update_centroids(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let d = x.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (r, &l) in x.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(r) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

fn check_monotone(prev: f64, next: f64) {
    assert!(
        next <= prev + 1e-9 * prev.max(1.0),
        "k-means inertia increased from {prev} to {next}"
    );
}

/// One k-means++ seeded run of Lloyd's algorithm.
pub fn kmeans_single(x: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<(KMeansModel, Vec<usize>)> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::TooFewPoints {
            requested: k,
            available: n,
        });
    }
    let mut rng = rng::seeded(seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut inertia = assign(x, &centroids, &mut labels);
    if repair_empty(x, &mut centroids, &mut labels) {
        inertia = inertia_of(x, &centroids, &labels);
    }
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut next = vec![0usize; n];
    while iterations < max_iter {
        iterations += 1;
        let updated = update_centroids(x, &labels, k);
        let mut next_inertia = assign(x, &updated, &mut next);
        let mut repaired_centroids = updated;
        if repair_empty(x, &mut repaired_centroids, &mut next) {
            next_inertia = inertia_of(x, &repaired_centroids, &next);
        }
        check_monotone(inertia, next_inertia);
        history.push(next_inertia);
        centroids = repaired_centroids;
        inertia = next_inertia;
        if next == labels {
            break;
        }
        core::mem::swap(&mut labels, &mut next);
    }
    Ok((
        KMeansModel {
            centroids,
            inertia,
            iterations,
            seed,
            inertia_history: history,
        },
        labels,
    ))
}

/// k-means with `restarts` independently seeded runs; the lowest inertia wins,
/// ties going to the earlier run.
pub fn kmeans(
    x: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<(KMeansModel, ClusterAssignment)> {
    let mut best: Option<(KMeansModel, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let (mut model, labels) = kmeans_single(x, k, rng::derive_seed_index(seed, r as u64), max_iter)?;
        model.seed = seed;
        if best.as_ref().is_none_or(|(b, _)| model.inertia < b.inertia) {
            best = Some((model, labels));
        }
    }
    let (model, labels) = best.expect("at least one restart");
    let assignment = ClusterAssignment::new(
        labels.iter().map(|&l| l as i32).collect(),
        "kmeans",
        params([
            ("k", alloc::format!("{k}")),
            ("seed", alloc::format!("{seed}")),
            ("max_iter", alloc::format!("{max_iter}")),
            ("restarts", alloc::format!("{restarts}")),
        ]),
    )?;
    Ok((model, assignment))
}
