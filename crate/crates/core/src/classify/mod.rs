//! Soft-voting classifier that carries a clustering over to datapoints the
//! clustering never saw. Three base models (k-nearest neighbors, a CART
//! decision tree and one-vs-rest linear SVMs) each produce a class
//! distribution; the ensemble averages them.

mod knn;
mod svm;
mod tree;
mod voting;

pub use knn::KnnModel;
pub use svm::LinearSvm;
pub use tree::{DecisionTree, TreeNode};
pub use voting::{fit_voting, VotingClassifier, VotingConfig};
