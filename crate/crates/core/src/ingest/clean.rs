use alloc::vec::Vec;

use super::FeatureMatrix;
use crate::{Error, Result};

/// Fills gaps in every column: forward-fill from the last valid value, and
/// back-fill any leading gap from the first valid value.
pub fn pad_missing(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut data = m.data().clone();
    let n = data.rows();
    for j in 0..data.cols() {
        let first = (0..n).find(|&i| !data.get(i, j).is_nan());
        let Some(first) = first else {
            return Err(Error::EmptySignal(m.signals()[j].name.clone()));
        };
        let mut last = data.get(first, j);
        for i in 0..n {
            let v = data.get(i, j);
            if v.is_nan() {
                data.set(i, j, last);
            } else {
                last = v;
            }
        }
    }
    Ok(m.with_data(data))
}

/// Flags values outside the closed band `[low, high]`. NaN is not flagged.
pub fn band_filter(column: &[f64], low: f64, high: f64) -> Result<Vec<bool>> {
    if !(low < high) {
        return Err(Error::config(alloc::format!(
            "band filter needs low < high, got [{low}, {high}]"
        )));
    }
    Ok(column.iter().map(|&v| v < low || v > high).collect())
}

/// Marks out-of-band values of one signal as missing. Run [`pad_missing`]
/// afterwards to repair them. Returns the filtered matrix and the number of
/// flagged rows.
pub fn apply_band_filter(m: &FeatureMatrix, signal: &str, low: f64, high: f64) -> Result<(FeatureMatrix, usize)> {
    let j = m
        .signal_index(signal)
        .ok_or_else(|| Error::config(alloc::format!("band filter on unknown signal `{signal}`")))?;
    let mask = band_filter(&m.data().column(j), low, high)?;
    let mut data = m.data().clone();
    let mut flagged = 0;
    for (i, &bad) in mask.iter().enumerate() {
        if bad {
            data.set(i, j, f64::NAN);
            flagged += 1;
        }
    }
    Ok((m.with_data(data), flagged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Signal, Timestamp};
    use crate::Matrix;
    use alloc::vec;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> FeatureMatrix {
        let ts = (0..values.len() as i64).map(Timestamp).collect();
        let data = Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap();
        FeatureMatrix::new(vec![Signal::new("inj", Some("mm"))], ts, data).unwrap()
    }

    #[test]
    fn forward_fill() {
        let m = pad_missing(&column(&[1.0, f64::NAN, 3.0])).unwrap();
        assert_eq!(m.data().column(0), vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn leading_back_fill() {
        let m = pad_missing(&column(&[f64::NAN, 2.0, 2.0])).unwrap();
        assert_eq!(m.data().column(0), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn all_missing_column_names_signal() {
        let err = pad_missing(&column(&[f64::NAN, f64::NAN])).unwrap_err();
        assert_eq!(err, Error::EmptySignal("inj".into()));
        assert_eq!(alloc::format!("{err}"), "signal `inj` has no data");
    }

    #[test]
    fn band_mask() {
        assert_eq!(band_filter(&[5.0, 50.0, 7.0], 0.0, 10.0).unwrap(), vec![false, true, false]);
        assert_eq!(band_filter(&[1.0, 2.0], 0.0, 10.0).unwrap(), vec![false, false]);
        assert!(band_filter(&[1.0], 10.0, 10.0).is_err());
        assert!(band_filter(&[1.0], 11.0, 10.0).is_err());
    }

    #[test]
    fn band_then_pad() {
        let (m, flagged) = apply_band_filter(&column(&[5.0, 50.0, 7.0]), "inj", 0.0, 10.0).unwrap();
        assert_eq!(flagged, 1);
        let m = pad_missing(&m).unwrap();
        assert_eq!(m.data().column(0), vec![5.0, 5.0, 7.0]);
    }

    proptest! {
        #[test]
        fn pad_keeps_present_values(vals in proptest::collection::vec(proptest::option::of(-1e3f64..1e3), 1..40)) {
            prop_assume!(vals.iter().any(|v| v.is_some()));
            let raw: Vec<f64> = vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let padded = pad_missing(&column(&raw)).unwrap();
            let out = padded.data().column(0);
            prop_assert!(!padded.has_missing());
            for (o, v) in out.iter().zip(&vals) {
                if let Some(v) = v {
                    prop_assert_eq!(o, v);
                }
            }
        }
    }
}
