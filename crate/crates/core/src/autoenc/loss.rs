use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Mean absolute error, trained with its sign subgradient.
    Mae,
    /// Mean squared error.
    Mse,
}

impl Loss {
    pub fn value(self, y: &[f64], yhat: &[f64]) -> f64 {
        let n = y.len().max(1) as f64;
        match self {
            Loss::Mae => y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
            Loss::Mse => y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        }
    }

    /// Derivative with respect to one output component.
    pub(crate) fn derivative(self, y: f64, yhat: f64, width: usize) -> f64 {
        let r = yhat - y;
        match self {
            Loss::Mae => {
                let s = if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                s / width as f64
            }
            Loss::Mse => 2.0 * r / width as f64,
        }
    }
}

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            actual: yhat.len(),
        });
    }
    Ok(())
}

/// Mean of `|y - yhat|` over components.
pub fn loss_mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(Loss::Mae.value(y, yhat))
}

/// Mean of `(y - yhat)^2` over components.
pub fn loss_mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(Loss::Mse.value(y, yhat))
}
