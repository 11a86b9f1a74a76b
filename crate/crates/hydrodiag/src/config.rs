//! The pipeline configuration document.
//!
//! One JSON file drives a whole run. Only `master_seed` is required; every
//! other section falls back to its defaults. Seed fields inside the
//! sub-sections are ignored: each stage's seed is derived from the master
//! seed and the stage name.

use std::path::Path;

use hydrodiag_core::autoenc::{SearchSpace, TrainConfig};
use hydrodiag_core::classify::VotingConfig;
use hydrodiag_core::cluster::{Linkage, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use hydrodiag_core::dimred::EmbeddingConfig;
use hydrodiag_core::ingest::Timestamp;
use hydrodiag_core::rng::derive_seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::parse_timestamp;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub voting: VotingConfig,
    #[serde(default)]
    pub search: SearchSpace,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub band_filters: Vec<BandFilter>,
}

/// Values of `signal` outside `[low, high]` are treated as missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandFilter {
    pub signal: String,
    pub low: f64,
    pub high: f64,
}

/// Either an explicit boundary instant or the fraction of rows (in time
/// order) that go to training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            boundary: None,
            train_fraction: Some(0.7),
        }
    }
}

impl SplitConfig {
    /// Resolves the boundary against the data's time axis.
    pub fn boundary(&self, timestamps: &[Timestamp]) -> Result<Timestamp> {
        match (&self.boundary, self.train_fraction) {
            (Some(b), None) => parse_timestamp(b).ok_or_else(|| Error::Config(format!("split boundary `{b}` is not a timestamp"))),
            (None, Some(f)) => {
                let n = timestamps.len();
                let cut = ((n as f64) * f).round() as usize;
                Ok(match timestamps.get(cut) {
                    Some(&t) => t,
                    None => Timestamp(timestamps.last().map_or(0, |t| t.0 + 1)),
                })
            }
            _ => Err(Error::Config("split needs exactly one of `boundary` or `train_fraction`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgglomerativeConfig {
    pub k: usize,
    #[serde(default)]
    pub linkage: Linkage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SomConfig {
    pub width: usize,
    pub height: usize,
    pub epochs: usize,
}

/// Which algorithms run, and which assignment feeds the model bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub kmeans: Option<KMeansConfig>,
    pub agglomerative: Option<AgglomerativeConfig>,
    pub dbscan: Option<DbscanConfig>,
    pub som: Option<SomConfig>,
    /// Algorithm name of the assignment that becomes the states.
    pub active: String,
    /// Accept the active assignment as-is instead of pausing for labels.
    pub auto_accept: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            kmeans: Some(KMeansConfig {
                k: 2,
                restarts: DEFAULT_RESTARTS,
                max_iter: DEFAULT_MAX_ITER,
            }),
            agglomerative: Some(AgglomerativeConfig {
                k: 2,
                linkage: Linkage::Ward,
            }),
            dbscan: None,
            som: None,
            active: "kmeans".into(),
            auto_accept: true,
        }
    }
}

impl ClusteringConfig {
    /// Names of the enabled algorithms in run order.
    pub fn enabled(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.kmeans.is_some() {
            v.push("kmeans");
        }
        if self.agglomerative.is_some() {
            v.push("agglomerative");
        }
        if self.dbscan.is_some() {
            v.push("dbscan");
        }
        if self.som.is_some() {
            v.push("som");
        }
        v
    }
}

impl PipelineConfig {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            ingest: IngestConfig::default(),
            split: SplitConfig::default(),
            embedding: EmbeddingConfig::default(),
            clustering: ClusteringConfig::default(),
            voting: VotingConfig::default(),
            search: SearchSpace::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for b in &self.ingest.band_filters {
            if !(b.low < b.high) {
                return bad(format!("band filter on `{}` needs low < high", b.signal));
            }
        }
        match (&self.split.boundary, self.split.train_fraction) {
            (Some(_), None) => self.split.boundary(&[])?,
            (None, Some(f)) if f > 0.0 && f < 1.0 => Timestamp(0),
            (None, Some(f)) => return bad(format!("train_fraction must lie in (0, 1), got {f}")),
            _ => return bad("split needs exactly one of `boundary` or `train_fraction`".into()),
        };
        self.embedding.validate()?;
        self.train.validate()?;
        let c = &self.clustering;
        if c.kmeans.as_ref().is_some_and(|k| k.k == 0) || c.agglomerative.as_ref().is_some_and(|a| a.k == 0) {
            return bad("cluster count k must be at least 1".into());
        }
        if let Some(s) = &c.som {
            if s.width * s.height == 0 || s.epochs == 0 {
                return bad("som needs a non-empty grid and epochs >= 1".into());
            }
        }
        if !c.enabled().contains(&c.active.as_str()) {
            return bad(format!(
                "active assignment `{}` is not one of the enabled algorithms {:?}",
                c.active,
                c.enabled()
            ));
        }
        if self.search.budget == 0 {
            return bad("search budget must be at least 1".into());
        }
        Ok(())
    }

    /// Seed of a pipeline stage or algorithm.
    pub fn seed(&self, stage: &str) -> u64 {
        derive_seed(self.master_seed, stage)
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            seed: self.seed("embed"),
            ..self.embedding.clone()
        }
    }

    pub fn voting_config(&self) -> VotingConfig {
        VotingConfig {
            seed: self.seed("voting"),
            ..self.voting.clone()
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace {
            seed: self.seed("bank"),
            ..self.search.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed("train"),
            ..self.train.clone()
        }
    }
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn hash_json<T: Serialize + ?Sized>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("config values serialize");
    hex::encode(Sha256::digest(bytes))
}
