//! Loading-independent data preparation: the feature matrix, gap padding,
//! band filtering, min-max normalization, time splits and a seeded synthetic
//! regime generator.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

mod clean;
mod normalize;
mod split;
mod synth;

pub use clean::{apply_band_filter, band_filter, pad_missing};
pub use normalize::{normalize_apply, normalize_fit, NormalizationParams};
pub use split::{split_by_time, Split, SplitSpec, SplitWarning};
pub use synth::{hpp_fixture, synth_generate, two_blobs, Regime, SynthConfig, HPP_FIXTURE_SEED};

/// Seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

/// Name and (optional) engineering unit of one sensor signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl Signal {
    pub fn new(name: impl Into<String>, unit: Option<&str>) -> Self {
        Self {
            name: name.into(),
            unit: unit.map(String::from),
        }
    }
}

/// One sensor's samples on its own time axis. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub signal: Signal,
    pub timestamps: Vec<Timestamp>,
    pub values: Vec<Option<f64>>,
}

impl SignalSeries {
    pub fn new(signal: Signal, timestamps: Vec<Timestamp>, values: Vec<Option<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Dimension {
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        check_increasing(&timestamps)?;
        Ok(Self {
            signal,
            timestamps,
            values,
        })
    }
}

fn check_increasing(ts: &[Timestamp]) -> Result<()> {
    if let Some(i) = ts.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::precondition(alloc::format!(
            "timestamps not strictly increasing at row {}",
            i + 1
        )));
    }
    Ok(())
}

/// `n` timestamped datapoints by `d` named signals. Missing values are NaN
/// until [`pad_missing`] has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    signals: Vec<Signal>,
    timestamps: Vec<Timestamp>,
    data: Matrix,
}

impl FeatureMatrix {
    pub fn new(signals: Vec<Signal>, timestamps: Vec<Timestamp>, data: Matrix) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::config("feature matrix needs at least one signal"));
        }
        if data.cols() != signals.len() {
            return Err(Error::Dimension {
                expected: signals.len(),
                actual: data.cols(),
            });
        }
        if data.rows() != timestamps.len() {
            return Err(Error::Dimension {
                expected: timestamps.len(),
                actual: data.rows(),
            });
        }
        check_increasing(&timestamps)?;
        Ok(Self {
            signals,
            timestamps,
            data,
        })
    }

    /// Aligns several series sharing one time axis into a matrix.
    pub fn from_series(series: &[SignalSeries]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::config("no series given"))?;
        let n = first.timestamps.len();
        let d = series.len();
        let mut data = Matrix::zeros(n, d);
        for (j, s) in series.iter().enumerate() {
            if s.timestamps != first.timestamps {
                return Err(Error::precondition(alloc::format!(
                    "series `{}` is not on the shared time axis",
                    s.signal.name
                )));
            }
            for (i, v) in s.values.iter().enumerate() {
                data.set(i, j, v.unwrap_or(f64::NAN));
            }
        }
        Self::new(
            series.iter().map(|s| s.signal.clone()).collect(),
            first.timestamps.clone(),
            data,
        )
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn signal_names(&self) -> Vec<&str> {
        self.signals.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.data.rows()
    }

    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.data.get(i, j).is_nan()
    }

    pub fn has_missing(&self) -> bool {
        self.data.as_slice().iter().any(|v| v.is_nan())
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }

    /// Rows at the given indices, in order. Indices must be increasing so the
    /// time axis stays ordered.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.signals.clone(),
            idx.iter().map(|&i| self.timestamps[i]).collect(),
            self.data.select_rows(idx),
        )
    }

    pub(crate) fn with_data(&self, data: Matrix) -> Self {
        debug_assert_eq!(data.rows(), self.data.rows());
        debug_assert_eq!(data.cols(), self.data.cols());
        Self {
            signals: self.signals.clone(),
            timestamps: self.timestamps.clone(),
            data,
        }
    }
}
