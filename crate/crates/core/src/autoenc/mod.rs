//! Mirrored multilayer-perceptron autoencoders and the per-state model bank.
//!
//! A network's encoder narrows from the input width to a bottleneck, and the
//! decoder repeats the encoder widths in reverse back to the input width.
//! Reconstruction error is measured as mean absolute error (MAE).

mod bank;
mod gradcheck;
mod loss;
mod mlp;
mod search;
mod train;

pub use bank::{fit_bank, score, ModelBank, ScoreReport, StateModel, StateScore, TrainSummary};
pub use gradcheck::{grad_check, grad_check_with};
pub use loss::{loss_mae, loss_mse, Loss};
pub use mlp::{Activation, Gradients, Layer, Mlp, MlpSpec};
pub use search::{random_search, search_candidates, SearchResult, SearchSpace, Trial};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome, MIN_TRAIN_ROWS};
