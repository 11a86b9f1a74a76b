use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{search_candidates, Mlp, MlpSpec, SearchSpace, TrainConfig, Trial, MIN_TRAIN_ROWS};
use crate::cluster::NOISE;
use crate::math::percentile;
use crate::{rng, Error, Matrix, Result};

/// Distribution of per-row reconstruction MAE over a model's training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateModel {
    pub label: i32,
    pub n_rows: usize,
    pub spec: MlpSpec,
    pub model: Mlp,
    /// Deviation threshold: 95th percentile of per-row training MAE.
    pub tau: f64,
    pub summary: TrainSummary,
    pub trials: Vec<Trial>,
}

impl StateModel {
    fn fit(x: &Matrix, label: i32, candidates: &[MlpSpec], cfg: &TrainConfig, seed: u64) -> Result<Self> {
        let res = search_candidates(x, candidates, seed, cfg)?;
        let maes: Vec<f64> = x
            .iter_rows()
            .map(|r| res.model().reconstruction_mae(r))
            .collect::<Result<_>>()?;
        let summary = TrainSummary {
            mean: maes.iter().sum::<f64>() / maes.len() as f64,
            median: percentile(&maes, 50.0),
            p95: percentile(&maes, 95.0),
            max: maes.iter().copied().fold(0.0, f64::max),
        };
        Ok(Self {
            label,
            n_rows: x.rows(),
            spec: res.spec.clone(),
            model: res.outcome.model,
            tau: summary.p95,
            summary,
            trials: res.trials,
        })
    }

    /// `mae / tau`; 0 when both are 0, infinite when only `tau` is.
    pub fn deviation(&self, mae: f64) -> f64 {
        if self.tau > 0.0 {
            mae / self.tau
        } else if mae == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// One autoencoder per state plus a global model trained on every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBank {
    pub dims: usize,
    /// Sorted by label.
    pub states: Vec<StateModel>,
    pub global: StateModel,
    pub warnings: Vec<String>,
}

impl ModelBank {
    pub fn state(&self, label: i32) -> Option<&StateModel> {
        self.states.iter().find(|s| s.label == label)
    }
}

/// Fits one autoencoder per non-noise label of `labels` (states with fewer
/// than 10 rows are skipped with a warning) and a global model on all rows
/// of `x`. Every model searches the same candidate list drawn from `space`.
pub fn fit_bank(x: &Matrix, labels: &[i32], space: &SearchSpace, cfg: &TrainConfig) -> Result<ModelBank> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            groups.entry(l).or_default().push(i);
        }
    }
    let candidates = space.candidates(x.cols())?;
    let mut warnings = Vec::new();
    let mut states = Vec::new();
    for (label, rows) in groups {
        if rows.len() < MIN_TRAIN_ROWS {
            warnings.push(format!(
                "state {label} skipped: {} rows (minimum {MIN_TRAIN_ROWS})",
                rows.len()
            ));
            continue;
        }
        let seed = rng::derive_seed(space.seed, &format!("state-{label}"));
        states.push(StateModel::fit(&x.select_rows(&rows), label, &candidates, cfg, seed)?);
    }
    if states.is_empty() {
        return Err(Error::precondition(format!(
            "no state has at least {MIN_TRAIN_ROWS} rows to train on"
        )));
    }
    let global = StateModel::fit(x, NOISE, &candidates, cfg, rng::derive_seed(space.seed, "global"))?;
    Ok(ModelBank {
        dims: x.cols(),
        states,
        global,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateScore {
    pub label: i32,
    pub mae: f64,
    pub dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub states: Vec<StateScore>,
    pub global_mae: f64,
    /// State with the lowest MAE; ties go to the lowest label.
    pub nearest: i32,
}

/// Reconstruction MAE and deviation index of `x` under every state model.
pub fn score(bank: &ModelBank, x: &[f64]) -> Result<ScoreReport> {
    if bank.states.is_empty() {
        return Err(Error::precondition("model bank is empty"));
    }
    let mut states = Vec::with_capacity(bank.states.len());
    for s in &bank.states {
        let mae = s.model.reconstruction_mae(x)?;
        states.push(StateScore {
            label: s.label,
            mae,
            dev: s.deviation(mae),
        });
    }
    let nearest = states
        .iter()
        .fold(&states[0], |best, s| if s.mae < best.mae { s } else { best })
        .label;
    Ok(ScoreReport {
        states,
        global_mae: bank.global.model.reconstruction_mae(x)?,
        nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoenc::Activation;
    use alloc::vec;
    use alloc::vec::Vec;

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        }
    }

    fn space() -> SearchSpace {
        SearchSpace {
            budget: 2,
            ..SearchSpace::default()
        }
    }

    fn two_states() -> (Matrix, Vec<i32>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = (i % 10) as f64 / 10.0;
            if i < 20 {
                rows.push([0.1 + 0.05 * t, 0.2, 0.1, 0.1 * t]);
                labels.push(0);
            } else {
                rows.push([0.9 - 0.05 * t, 0.8, 0.9, 0.7 + 0.1 * t]);
                labels.push(1);
            }
        }
        rows.extend([[0.5; 4]; 3]);
        labels.extend([2, 2, 2]);
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn small_states_are_skipped_with_warning() {
        let (x, labels) = two_states();
        let bank = fit_bank(&x, &labels, &space(), &cfg()).unwrap();
        assert_eq!(bank.states.iter().map(|s| s.label).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(bank.warnings.len(), 1);
        assert!(bank.warnings[0].contains("state 2"));
        assert_eq!(bank.global.n_rows, 43);
        assert!(bank.states.iter().all(|s| s.tau >= 0.0 && s.model.input_width() == 4));
    }

    #[test]
    fn every_model_searches_the_same_candidates() {
        let (x, labels) = two_states();
        let bank = fit_bank(&x, &labels, &SearchSpace { budget: 3, ..space() }, &cfg()).unwrap();
        let specs = |s: &StateModel| s.trials.iter().map(|t| t.spec.clone()).collect::<Vec<_>>();
        let expected = SearchSpace { budget: 3, ..space() }.candidates(4).unwrap();
        assert_eq!(specs(&bank.global), expected);
        assert!(bank.states.iter().all(|s| specs(s) == expected));
        assert_ne!(bank.states[0].trials[0].seed, bank.global.trials[0].seed);
    }

    #[test]
    fn single_state_trains_on_all_rows() {
        let (x, _) = two_states();
        let bank = fit_bank(&x, &vec![0; x.rows()], &space(), &cfg()).unwrap();
        assert_eq!(bank.states.len(), 1);
        assert_eq!(bank.states[0].n_rows, bank.global.n_rows);
    }

    #[test]
    fn nothing_large_enough() {
        let (x, _) = two_states();
        let labels: Vec<i32> = (0..x.rows() as i32).collect();
        assert!(fit_bank(&x, &labels, &space(), &cfg()).is_err());
    }

    fn exact_state(label: i32, tau: f64) -> StateModel {
        let spec = MlpSpec {
            input: 2,
            encoder: vec![],
            bottleneck: 1,
            encoder_activation: Activation::Identity,
            decoder_activation: Activation::Identity,
        };
        let mut model = Mlp::init(&spec, 0).unwrap();
        // reconstructs every point on the line x0 == x1
        model.set_params(&[0.5, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0]);
        StateModel {
            label,
            n_rows: 10,
            spec,
            model,
            tau,
            summary: TrainSummary {
                mean: 0.0,
                median: 0.0,
                p95: tau,
                max: tau,
            },
            trials: vec![],
        }
    }

    #[test]
    fn exact_reconstruction_and_degenerate_tau() {
        let mut far = exact_state(1, 0.0);
        far.model.set_params(&[0.5, 0.5, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let bank = ModelBank {
            dims: 2,
            states: vec![exact_state(0, 0.0), far],
            global: exact_state(NOISE, 0.1),
            warnings: vec![],
        };
        let r = score(&bank, &[0.3, 0.3]).unwrap();
        assert_eq!(r.nearest, 0);
        assert_eq!((r.states[0].mae, r.states[0].dev), (0.0, 0.0));
        assert_eq!(r.states[1].dev, f64::INFINITY);
        assert_eq!(r.global_mae, 0.0);
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let bank = ModelBank {
            dims: 2,
            states: vec![exact_state(3, 0.1), exact_state(5, 0.1)],
            global: exact_state(NOISE, 0.1),
            warnings: vec![],
        };
        let r = score(&bank, &[0.1, 0.9]).unwrap();
        assert_eq!(r.nearest, 3);
        assert!((r.states[0].dev - r.states[0].mae / 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_bank_rejected() {
        let bank = ModelBank {
            dims: 2,
            states: vec![],
            global: exact_state(NOISE, 0.1),
            warnings: vec![],
        };
        assert!(score(&bank, &[0.0, 0.0]).is_err());
    }
}
