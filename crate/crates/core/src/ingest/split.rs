use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Timestamp};
use crate::Result;

/// Train = rows strictly before `boundary`; test = the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub boundary: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitWarning {
    EmptyTrain,
    EmptyTest,
}

pub struct Split {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    /// Row indices of `train`/`test` in the source matrix.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub warnings: Vec<SplitWarning>,
}

pub fn split_by_time(m: &FeatureMatrix, spec: SplitSpec) -> Result<Split> {
    let cut = m.timestamps().partition_point(|t| *t < spec.boundary);
    let train_rows: Vec<usize> = (0..cut).collect();
    let test_rows: Vec<usize> = (cut..m.n_rows()).collect();
    let mut warnings = Vec::new();
    if train_rows.is_empty() {
        warnings.push(SplitWarning::EmptyTrain);
    }
    if test_rows.is_empty() {
        warnings.push(SplitWarning::EmptyTest);
    }
    Ok(Split {
        train: m.select_rows(&train_rows)?,
        test: m.select_rows(&test_rows)?,
        train_rows,
        test_rows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Signal;
    use crate::Matrix;
    use alloc::vec;
    use proptest::prelude::*;

    fn rows_at(ts: &[i64]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec![Signal::new("a", None)],
            ts.iter().copied().map(Timestamp).collect(),
            Matrix::from_vec(ts.len(), 1, ts.iter().map(|&t| t as f64).collect()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn boundary_is_exclusive_for_train() {
        let s = split_by_time(&rows_at(&[1, 2, 3]), SplitSpec { boundary: Timestamp(3) }).unwrap();
        assert_eq!(s.train.data().column(0), vec![1.0, 2.0]);
        assert_eq!(s.test.data().column(0), vec![3.0]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn empty_sides_warn() {
        let s = split_by_time(&rows_at(&[1, 2, 3]), SplitSpec { boundary: Timestamp(0) }).unwrap();
        assert_eq!(s.train.n_rows(), 0);
        assert_eq!(s.warnings, vec![SplitWarning::EmptyTrain]);
        let s = split_by_time(&rows_at(&[1, 2, 3]), SplitSpec { boundary: Timestamp(10) }).unwrap();
        assert_eq!(s.test.n_rows(), 0);
        assert_eq!(s.warnings, vec![SplitWarning::EmptyTest]);
    }

    proptest! {
        #[test]
        fn partition_covers_all_rows(n in 1usize..50, boundary in -5i64..60) {
            let ts: Vec<i64> = (0..n as i64).collect();
            let s = split_by_time(&rows_at(&ts), SplitSpec { boundary: Timestamp(boundary) }).unwrap();
            prop_assert_eq!(s.train.n_rows() + s.test.n_rows(), n);
            let mut all = s.train_rows.clone();
            all.extend(&s.test_rows);
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
