use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::Workspace;
use super::{Loss, Mlp};
use crate::{rng, Error, Matrix, Result};

pub const MIN_TRAIN_ROWS: usize = 10;
const MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            epochs: 500,
            batch_size: 32,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation fraction must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// MAE after `epoch` passes; epoch 0 is the initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch]
    }
}

fn mean_mae(m: &Mlp, x: &Matrix, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows.iter().map(|&i| m.reconstruction_mae(x.row(i)).unwrap()).sum();
    total / rows.len() as f64
}

/// Minibatch SGD with momentum on the MAE reconstruction loss. The last
/// `validation_fraction` of the rows is held out; the returned model is the
/// snapshot with the lowest validation MAE (earliest on ties).
pub fn train(m: &Mlp, x: &Matrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = x.rows();
    if n < MIN_TRAIN_ROWS {
        return Err(Error::SubsetTooSmall(n));
    }
    if x.cols() != m.input_width() {
        return Err(Error::Dimension {
            expected: m.input_width(),
            actual: x.cols(),
        });
    }
    let n_val = (crate::math::round(n as f64 * cfg.validation_fraction) as usize).clamp(1, n - 1);
    let mut train_rows: Vec<usize> = (0..n - n_val).collect();
    let val_rows: Vec<usize> = (n - n_val..n).collect();

    let mut model = m.clone();
    let mut rng = rng::seeded(cfg.seed);
    let mut ws = Workspace::new(&model);
    let mut velocity = alloc::vec![0.0; model.n_params()];

    let record = |model: &Mlp, epoch: usize, rows: &[usize]| EpochRecord {
        epoch,
        train_mae: mean_mae(model, x, rows),
        val_mae: mean_mae(model, x, &val_rows),
    };
    let mut history = alloc::vec![record(&model, 0, &train_rows)];
    let mut best = model.clone();
    let mut best_epoch = 0;

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * (1.0 - epoch as f64 / cfg.epochs as f64);
        train_rows.shuffle(&mut rng);
        for batch in train_rows.chunks(cfg.batch_size) {
            ws.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                model.accumulate(x.row(i), x.row(i), Loss::Mae, scale, &mut ws);
            }
            let grads = &ws.grads;
            let mut k = 0;
            for (l, layer) in model.layers.iter_mut().enumerate() {
                for (p, g) in layer
                    .weights
                    .iter_mut()
                    .zip(&grads.weights[l])
                    .chain(layer.bias.iter_mut().zip(&grads.bias[l]))
                {
                    velocity[k] = MOMENTUM * velocity[k] - lr * g;
                    *p += velocity[k];
                    k += 1;
                }
            }
        }
        let rec = record(&model, epoch + 1, &train_rows);
        if rec.val_mae < history[best_epoch].val_mae {
            best = model.clone();
            best_epoch = epoch + 1;
        }
        history.push(rec);
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
    })
}
