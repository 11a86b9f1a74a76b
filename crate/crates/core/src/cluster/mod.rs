//! Partitioning of datapoints into candidate operating states.
//!
//! Several algorithms run on the same normalized inputs because each reacts
//! to a different aspect of the data's shape; the practitioner compares their
//! label arrays and validates one. [`precision`] scores a labeling against a
//! known reference under the best cluster-to-class mapping.

mod agglomerative;
mod dbscan;
mod kmeans;
mod precision;
mod som;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use agglomerative::{agglomerative, agglomerative_with_merges, Linkage, Merge};
pub use dbscan::dbscan;
pub use kmeans::{kmeans, kmeans_single, KMeansModel, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
pub use precision::precision;
pub use som::{som_fit, SomGrid};

pub const NOISE: i32 = -1;

/// One label per datapoint; `-1` marks noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
    pub algorithm: String,
    pub params: BTreeMap<String, String>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    /// Checks that labels are `-1` or `0..k` with every cluster non-empty.
    pub fn new(labels: Vec<i32>, algorithm: impl Into<String>, params: BTreeMap<String, String>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l < NOISE) {
            return Err(Error::precondition(alloc::format!("invalid cluster label {bad}")));
        }
        let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
        let mut seen = alloc::vec![false; k];
        for &l in &labels {
            if l >= 0 {
                seen[l as usize] = true;
            }
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::precondition(alloc::format!("cluster {empty} has no members")));
        }
        Ok(Self {
            labels,
            algorithm: algorithm.into(),
            params,
            n_clusters: k,
        })
    }

    /// Renumbers non-noise labels to `0..k` preserving their order.
    pub fn compacted(labels: &[i32], algorithm: impl Into<String>, params: BTreeMap<String, String>) -> Result<Self> {
        let mut used: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
        used.sort_unstable();
        used.dedup();
        let relabeled = labels
            .iter()
            .map(|&l| if l < 0 { NOISE } else { used.binary_search(&l).unwrap() as i32 })
            .collect();
        Self::new(relabeled, algorithm, params)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn members(&self, label: i32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

pub(crate) fn params<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (String::from(k), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_gaps_in_labels() {
        assert!(ClusterAssignment::new(vec![0, 2], "x", BTreeMap::new()).is_err());
        assert!(ClusterAssignment::new(vec![0, -2], "x", BTreeMap::new()).is_err());
        let a = ClusterAssignment::new(vec![1, 0, -1], "x", BTreeMap::new()).unwrap();
        assert_eq!(a.n_clusters, 2);
        assert_eq!(a.noise_count(), 1);
    }

    #[test]
    fn compaction_preserves_order() {
        let a = ClusterAssignment::compacted(&[5, 2, -1, 5], "x", BTreeMap::new()).unwrap();
        assert_eq!(a.labels, vec![1, 0, -1, 1]);
    }
}
