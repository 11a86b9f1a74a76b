use alloc::vec::Vec;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{train, Activation, Mlp, MlpSpec, TrainConfig, TrainOutcome};
use crate::{rng, Error, Matrix, Result};

/// Candidate values the random search draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    /// Number of encoder hidden layers (the decoder mirrors them).
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub bottlenecks: Vec<usize>,
    pub activations: Vec<Activation>,
    pub budget: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            depths: alloc::vec![0, 1, 2],
            widths: alloc::vec![4, 6, 8],
            bottlenecks: alloc::vec![2, 3, 4],
            activations: alloc::vec![Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Identity],
            budget: 8,
            seed: 0,
        }
    }
}

impl SearchSpace {
    fn check(&self, d: usize) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("search budget must be at least 1"));
        }
        if self.depths.is_empty() || self.activations.is_empty() {
            return Err(Error::config("search space is empty"));
        }
        if self.depths.iter().any(|&k| k > 0) && self.widths.is_empty() {
            return Err(Error::config("search space has depths but no widths"));
        }
        if !self.bottlenecks.iter().any(|&b| b > 0 && b < d) {
            return Err(Error::config("search space has no bottleneck narrower than the input"));
        }
        Ok(())
    }

    /// Draws one spec; encoder widths are sorted to narrow toward the
    /// bottleneck.
    pub fn sample(&self, d: usize, rng: &mut rng::SeededRng) -> Result<MlpSpec> {
        self.check(d)?;
        let bottlenecks: Vec<usize> = self.bottlenecks.iter().copied().filter(|&b| b > 0 && b < d).collect();
        let depth = *self.depths.choose(rng).unwrap();
        let mut encoder: Vec<usize> = (0..depth).map(|_| *self.widths.choose(rng).unwrap()).collect();
        encoder.sort_unstable_by(|a, b| b.cmp(a));
        let spec = MlpSpec {
            input: d,
            encoder,
            bottleneck: *bottlenecks.choose(rng).unwrap(),
            encoder_activation: *self.activations.choose(rng).unwrap(),
            decoder_activation: *self.activations.choose(rng).unwrap(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub spec: MlpSpec,
    pub seed: u64,
    pub best_epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub spec: MlpSpec,
    pub outcome: TrainOutcome,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn model(&self) -> &Mlp {
        &self.outcome.model
    }
}

impl SearchSpace {
    /// The `budget` candidate specs for `d`-wide input, drawn from the space
    /// seed alone.
    pub fn candidates(&self, d: usize) -> Result<Vec<MlpSpec>> {
        self.check(d)?;
        let mut sampler = rng::seeded(rng::derive_seed(self.seed, "search"));
        (0..self.budget).map(|_| self.sample(d, &mut sampler)).collect()
    }
}

/// Trains `budget` sampled architectures and keeps the one with the lowest
/// validation MAE (earliest trial on ties).
pub fn random_search(x: &Matrix, space: &SearchSpace, cfg: &TrainConfig) -> Result<SearchResult> {
    search_candidates(x, &space.candidates(x.cols())?, space.seed, cfg)
}

/// Trains every candidate and keeps the one with the lowest validation MAE
/// (earliest on ties). Every trial uses `cfg` except for its seed, which is
/// derived from `seed` and the trial index.
pub fn search_candidates(x: &Matrix, candidates: &[MlpSpec], seed: u64, cfg: &TrainConfig) -> Result<SearchResult> {
    if candidates.is_empty() {
        return Err(Error::config("search budget must be at least 1"));
    }
    let mut trials = Vec::with_capacity(candidates.len());
    let mut best: Option<(MlpSpec, TrainOutcome)> = None;
    for (index, spec) in candidates.iter().enumerate() {
        if spec.input != x.cols() {
            return Err(Error::Dimension {
                expected: spec.input,
                actual: x.cols(),
            });
        }
        let trial_seed = rng::derive_seed_index(seed, index as u64);
        let init = Mlp::init(spec, trial_seed)?;
        let trial_cfg = TrainConfig {
            seed: rng::derive_seed(trial_seed, "shuffle"),
            ..cfg.clone()
        };
        let outcome = train(&init, x, &trial_cfg)?;
        let rec = *outcome.best();
        trials.push(Trial {
            index,
            spec: spec.clone(),
            seed: trial_seed,
            best_epoch: outcome.best_epoch,
            train_mae: rec.train_mae,
            val_mae: rec.val_mae,
        });
        if best.as_ref().is_none_or(|(_, b)| rec.val_mae < b.best().val_mae) {
            best = Some((spec.clone(), outcome));
        }
    }
    let (spec, outcome) = best.unwrap();
    Ok(SearchResult { spec, outcome, trials })
}
