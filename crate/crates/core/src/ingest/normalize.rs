use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

/// Per-signal min/max recorded by [`normalize_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub signals: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// `min == max`: the column maps to 0.
    pub degenerate: Vec<bool>,
}

impl NormalizationParams {
    fn scale(&self, j: usize, v: f64) -> f64 {
        if self.degenerate[j] {
            0.0
        } else {
            (v - self.min[j]) / (self.max[j] - self.min[j])
        }
    }

    /// Maps one raw row into normalized units.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.signals.len() {
            return Err(Error::Dimension {
                expected: self.signals.len(),
                actual: row.len(),
            });
        }
        Ok(row.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect())
    }
}

/// Min-max scales every column to `[0, 1]` and returns the parameters used.
pub fn normalize_fit(m: &FeatureMatrix) -> Result<(FeatureMatrix, NormalizationParams)> {
    if m.has_missing() {
        return Err(Error::precondition("normalization requires a matrix without missing values"));
    }
    if m.n_rows() == 0 {
        return Err(Error::precondition("normalization requires at least one row"));
    }
    let d = m.n_signals();
    let mut min = alloc::vec![f64::INFINITY; d];
    let mut max = alloc::vec![f64::NEG_INFINITY; d];
    for row in m.data().iter_rows() {
        for j in 0..d {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    let degenerate = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    let params = NormalizationParams {
        signals: m.signals().iter().map(|s| s.name.clone()).collect(),
        min,
        max,
        degenerate,
    };
    let out = normalize_apply(&params, m)?;
    Ok((out, params))
}

/// Applies stored parameters. Values beyond the fitted range are not clamped.
pub fn normalize_apply(p: &NormalizationParams, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let names: Vec<&str> = m.signal_names();
    if names.len() != p.signals.len() || names.iter().zip(&p.signals).any(|(a, b)| a != b) {
        let missing = p
            .signals
            .iter()
            .filter(|s| !names.contains(&s.as_str()))
            .cloned()
            .collect();
        let extra = names
            .iter()
            .filter(|s| !p.signals.iter().any(|p| p == *s))
            .map(|s| String::from(*s))
            .collect();
        return Err(Error::SignalMismatch { missing, extra });
    }
    let mut data = m.data().clone();
    let d = data.cols();
    for i in 0..data.rows() {
        let row = data.row_mut(i);
        for j in 0..d {
            row[j] = p.scale(j, row[j]);
        }
    }
    Ok(m.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Signal, Timestamp};
    use crate::Matrix;
    use alloc::vec;
    use proptest::prelude::*;

    fn matrix(names: &[&str], rows: &[&[f64]]) -> FeatureMatrix {
        let ts = (0..rows.len() as i64).map(Timestamp).collect();
        FeatureMatrix::new(
            names.iter().map(|n| Signal::new(*n, None)).collect(),
            ts,
            Matrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn direct_formula() {
        let (m, p) = normalize_fit(&matrix(&["a"], &[&[2.0], &[4.0], &[6.0]])).unwrap();
        assert_eq!(m.data().column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(p.min, vec![2.0]);
        assert_eq!(p.max, vec![6.0]);
        let (m, _) = normalize_fit(&matrix(&["a"], &[&[-1.0], &[1.0]])).unwrap();
        assert_eq!(m.data().column(0), vec![0.0, 1.0]);
    }

    #[test]
    fn degenerate_column() {
        let (m, p) = normalize_fit(&matrix(&["a"], &[&[7.0], &[7.0]])).unwrap();
        assert_eq!(m.data().column(0), vec![0.0, 0.0]);
        assert_eq!(p.degenerate, vec![true]);
        let other = normalize_apply(&p, &matrix(&["a"], &[&[123.0]])).unwrap();
        assert_eq!(other.data().get(0, 0), 0.0);
    }

    #[test]
    fn apply_extrapolates_unclamped() {
        let (_, p) = normalize_fit(&matrix(&["a"], &[&[2.0], &[4.0], &[6.0]])).unwrap();
        let out = normalize_apply(&p, &matrix(&["a"], &[&[8.0]])).unwrap();
        assert_eq!(out.data().get(0, 0), 1.5);
    }

    #[test]
    fn missing_values_rejected() {
        let r = normalize_fit(&matrix(&["a"], &[&[f64::NAN], &[1.0]]));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn signal_mismatch_lists_names() {
        let (_, p) = normalize_fit(&matrix(&["a", "b"], &[&[0.0, 1.0], &[1.0, 2.0]])).unwrap();
        let err = normalize_apply(&p, &matrix(&["a", "c"], &[&[0.0, 1.0]])).unwrap_err();
        assert_eq!(
            err,
            Error::SignalMismatch {
                missing: vec!["b".into()],
                extra: vec!["c".into()]
            }
        );
    }

    proptest! {
        #[test]
        fn fit_gives_exact_unit_range_and_apply_is_consistent(
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 2..30)
        ) {
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let m = matrix(&["a", "b", "c"], &refs);
            let (out, p) = normalize_fit(&m).unwrap();
            for j in 0..3 {
                if p.degenerate[j] { continue; }
                let col = out.data().column(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo.abs() <= 1e-12);
                prop_assert!((hi - 1.0).abs() <= 1e-12);
            }
            let again = normalize_apply(&p, &m).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
