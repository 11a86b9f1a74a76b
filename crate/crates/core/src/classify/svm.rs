use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::math::{dot, sigmoid};
use crate::rng;

/// One-vs-rest linear SVMs trained by subgradient descent on the
/// L2-regularized hinge loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearSvm {
    pub fn fit(
        rows: &[&[f64]],
        targets: &[usize],
        n_classes: usize,
        epochs: usize,
        learning_rate: f64,
        lambda: f64,
        seed: u64,
    ) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let mut weights = Vec::with_capacity(n_classes);
        let mut bias = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            let mut rng = rng::seeded(rng::derive_seed_index(seed, class as u64));
            let mut w = vec![0.0; d];
            let mut b = 0.0;
            let mut order: Vec<usize> = (0..rows.len()).collect();
            for epoch in 0..epochs {
                order.shuffle(&mut rng);
                let eta = learning_rate / (1.0 + epoch as f64);
                for &i in &order {
                    let y = if targets[i] == class { 1.0 } else { -1.0 };
                    let margin = y * (dot(&w, rows[i]) + b);
                    for (wj, xj) in w.iter_mut().zip(rows[i]) {
                        let g = lambda * *wj - if margin < 1.0 { y * xj } else { 0.0 };
                        *wj -= eta * g;
                    }
                    if margin < 1.0 {
                        b += eta * y;
                    }
                }
            }
            weights.push(w);
            bias.push(b);
        }
        Self { weights, bias }
    }

    /// Raw margins `w_c . x + b_c`.
    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }

    /// Logistic of each margin, renormalized to sum to 1.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = self.decision(x).into_iter().map(sigmoid).collect();
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            let u = 1.0 / p.len() as f64;
            p.iter_mut().for_each(|v| *v = u);
        }
        p
    }
}
