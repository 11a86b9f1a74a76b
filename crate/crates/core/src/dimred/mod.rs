//! Projection of normalized datapoints to two or three dimensions.
//!
//! The main route is a neighbor-graph embedding: an exact k-nearest-neighbor
//! graph is turned into fuzzy memberships, symmetrized by probabilistic union
//! and laid out by stochastic attraction/repulsion. PCA is kept as a linear
//! baseline. Both support placing never-seen datapoints without moving the
//! training layout.

mod curve;
mod embed;
mod fuzzy;
mod knn;
mod pca;
mod quality;

use serde::{Deserialize, Serialize};

pub use curve::fit_curve;
pub use embed::{embed, fit_embedding, spectral_init, transform_new, Embedding, EmbeddingConfig, InitMethod};
pub use fuzzy::{build_fuzzy_graph, fuzzy_union, smooth_knn, Edge, FuzzyGraph};
pub use knn::{knn_graph, knn_query, KnnGraph, Neighbor};
pub use pca::{pca_fit, PcaModel};
pub use quality::{separation_ratio, trustworthiness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => crate::math::euclidean(a, b),
            Metric::Manhattan => crate::math::manhattan(a, b),
        }
    }
}
