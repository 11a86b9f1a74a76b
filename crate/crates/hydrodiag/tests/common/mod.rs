#![allow(dead_code)]

use hydrodiag::config::PipelineConfig;
use hydrodiag::pipeline::Pipeline;
use hydrodiag_core::ingest::{hpp_fixture, synth_generate, FeatureMatrix, SynthConfig};

pub const SMALL_ROWS: usize = 600;

pub fn small_synth() -> SynthConfig {
    SynthConfig {
        n: SMALL_ROWS,
        ..hpp_fixture()
    }
}

pub fn small_data() -> (FeatureMatrix, Vec<usize>) {
    synth_generate(&small_synth()).unwrap()
}

/// Fast settings: short embedding and training, two search trials.
pub fn small_config(seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::new(seed);
    c.embedding.n_epochs = 60;
    c.voting.svm_epochs = 20;
    c.search.budget = 2;
    c.search.depths = vec![1];
    c.search.widths = vec![8];
    c.search.bottlenecks = vec![3];
    c.train.epochs = 15;
    c
}

pub fn small_config_json(seed: u64) -> String {
    serde_json::to_string_pretty(&small_config(seed)).unwrap()
}

pub fn completed_pipeline(seed: u64) -> Pipeline {
    let (data, _) = small_data();
    let mut p = Pipeline::new(small_config(seed), data, "small.csv").unwrap();
    p.run_until(hydrodiag::state::Stage::Score).unwrap();
    p
}
