use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{params, ClusterAssignment, NOISE};
use crate::math::{exp, squared_euclidean};
use crate::{rng, Error, Matrix, Result};

const LR_START: f64 = 0.5;
const LR_END: f64 = 0.01;
const RADIUS_END: f64 = 0.5;

/// A trained self-organizing map. Unit `u` sits at grid cell
/// `(u % width, u / width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub width: usize,
    pub height: usize,
    pub codebook: Matrix,
    pub epochs: usize,
    pub seed: u64,
    /// Cluster label of each unit; units that won no datapoint are `-1`.
    pub unit_labels: Vec<i32>,
}

impl SomGrid {
    /// Best-matching unit; ties go to the lower unit index.
    pub fn bmu(&self, row: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for u in 0..self.codebook.rows() {
            let d = squared_euclidean(row, self.codebook.row(u));
            if d < best.1 {
                best = (u, d);
            }
        }
        best.0
    }

    fn grid_dist2(&self, u: usize, v: usize) -> f64 {
        let (ux, uy) = ((u % self.width) as f64, (u / self.width) as f64);
        let (vx, vy) = ((v % self.width) as f64, (v / self.width) as f64);
        (ux - vx) * (ux - vx) + (uy - vy) * (uy - vy)
    }
}

/// Online SOM training with a Gaussian neighborhood.
///
/// The radius shrinks linearly from `max(w, h) / 2` to 0.5 and the learning
/// rate from 0.5 to 0.01 over all `epochs * n` updates. Labels are the BMU
/// indices, renumbered to skip units that won nothing.
pub fn som_fit(x: &Matrix, grid_w: usize, grid_h: usize, epochs: usize, seed: u64) -> Result<(SomGrid, ClusterAssignment)> {
    let units = grid_w * grid_h;
    if units == 0 || epochs == 0 {
        return Err(Error::config("SOM needs a non-empty grid and epochs >= 1"));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::precondition("SOM needs at least one datapoint"));
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let init: Vec<usize> = if units <= n {
        order.shuffle(&mut rng);
        order[..units].to_vec()
    } else {
        (0..units).map(|_| rng.random_range(0..n)).collect()
    };
    let mut som = SomGrid {
        width: grid_w,
        height: grid_h,
        codebook: x.select_rows(&init),
        epochs,
        seed,
        unit_labels: Vec::new(),
    };

    let radius_start = (grid_w.max(grid_h) as f64 / 2.0).max(RADIUS_END);
    let total = (epochs * n) as f64;
    let mut step = 0usize;
    order = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = step as f64 / total;
            let radius = radius_start + (RADIUS_END - radius_start) * t;
            let lr = LR_START + (LR_END - LR_START) * t;
            let row = x.row(i);
            let winner = som.bmu(row);
            for u in 0..units {
                let h = exp(-som.grid_dist2(winner, u) / (2.0 * radius * radius));
                let rate = lr * h;
                for (c, v) in som.codebook.row_mut(u).iter_mut().zip(row) {
                    *c += rate * (v - *c);
                }
            }
            step += 1;
        }
    }

    let bmus: Vec<i32> = x.iter_rows().map(|r| som.bmu(r) as i32).collect();
    let assignment = ClusterAssignment::compacted(
        &bmus,
        "som",
        params([
            ("grid_w", alloc::format!("{grid_w}")),
            ("grid_h", alloc::format!("{grid_h}")),
            ("epochs", alloc::format!("{epochs}")),
            ("seed", alloc::format!("{seed}")),
        ]),
    )?;
    som.unit_labels = alloc::vec![NOISE; units];
    for (b, l) in bmus.iter().zip(&assignment.labels) {
        som.unit_labels[*b as usize] = *l;
    }
    Ok((som, assignment))
}
