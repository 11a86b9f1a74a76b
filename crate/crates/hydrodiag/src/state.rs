//! Persisted project state.
//!
//! A project is one JSON document holding the cleaned dataset, every stage's
//! output and a manifest recording, per stage, its status, seed and the hash
//! of the configuration it ran with. Normalized and split matrices are not
//! stored; they are recomputed from the dataset and the stored parameters,
//! which is exact because both steps are deterministic.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use hydrodiag_core::autoenc::ModelBank;
use hydrodiag_core::classify::VotingClassifier;
use hydrodiag_core::cluster::{ClusterAssignment, KMeansModel, SomGrid, NOISE};
use hydrodiag_core::dimred::Embedding;
use hydrodiag_core::ingest::{normalize_apply, FeatureMatrix, NormalizationParams, Timestamp};
use hydrodiag_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::formats::ScoreRow;
use crate::{Error, Result};

pub const STATE_VERSION: u32 = 1;

/// Name of the no-clustering baseline model in score exports.
pub const GLOBAL_STATE: &str = "global";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Normalize,
    Split,
    Embed,
    Cluster,
    Voting,
    Bank,
    Score,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Normalize,
        Stage::Split,
        Stage::Embed,
        Stage::Cluster,
        Stage::Voting,
        Stage::Bank,
        Stage::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Normalize => "normalize",
            Stage::Split => "split",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Voting => "voting",
            Stage::Bank => "bank",
            Stage::Score => "score",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Stages that consume the practitioner's labels.
    pub fn after_labels(self) -> bool {
        self > Stage::Cluster
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Complete,
    Stale,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Hash of the configuration section this stage ran with.
    #[serde(default)]
    pub config_hash: String,
    /// Hash chaining this stage's configuration with everything upstream
    /// (including labels for the post-label stages).
    #[serde(default)]
    pub input_hash: String,
    /// Wall-clock fields; the only part of a state that varies between
    /// identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StageRecord {
    fn pending(stage: Stage) -> Self {
        Self {
            stage,
            status: StageStatus::Pending,
            seed: None,
            config_hash: String::new(),
            input_hash: String::new(),
            started_at: None,
            finished_at: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageRecord>,
    /// Clustering is done and the run waits for the practitioner's labels.
    pub awaiting_labels: bool,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            stages: Stage::ALL.iter().map(|&s| StageRecord::pending(s)).collect(),
            awaiting_labels: false,
        }
    }
}

impl Manifest {
    pub fn get(&self, stage: Stage) -> &StageRecord {
        &self.stages[stage.index()]
    }

    pub fn get_mut(&mut self, stage: Stage) -> &mut StageRecord {
        &mut self.stages[stage.index()]
    }

    pub fn is_complete(&self, stage: Stage) -> bool {
        self.get(stage).status == StageStatus::Complete
    }

    pub fn stale(&self) -> Vec<Stage> {
        self.stages
            .iter()
            .filter(|r| r.status == StageStatus::Stale)
            .map(|r| r.stage)
            .collect()
    }

    /// Flags every completed stage from `from` on as stale.
    pub fn mark_stale_from(&mut self, from: Stage) -> Vec<Stage> {
        let mut flipped = Vec::new();
        for r in &mut self.stages[from.index()..] {
            if r.status == StageStatus::Complete {
                r.status = StageStatus::Stale;
                flipped.push(r.stage);
            }
        }
        flipped
    }

    /// Resets `from` and everything after it to pending.
    pub fn reset_from(&mut self, from: Stage) {
        for r in &mut self.stages[from.index()..] {
            *r = StageRecord::pending(r.stage);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Healthy,
    Faulty,
    Transient,
    #[default]
    Unknown,
}

/// The practitioner's reading of one clustering: which clusters form which
/// named state. Clusters not mentioned stay states of their own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelOverrides {
    /// Algorithm whose assignment the states refer to; defaults to the
    /// current active assignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<String>,
    #[serde(default)]
    pub states: Vec<StateOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateOverride {
    pub name: String,
    #[serde(default)]
    pub tag: Tag,
    pub clusters: Vec<i32>,
}

/// A validated state: label `label` is given to rows of `clusters`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDef {
    pub label: i32,
    pub name: String,
    pub tag: Tag,
    pub clusters: Vec<i32>,
}

/// Turns overrides into the full state list for an assignment. Overridden
/// states come first in the given order, then every unmentioned cluster as
/// `cluster-<id>`. Labels are positions in that list.
pub fn resolve_states(assignment: &ClusterAssignment, overrides: &[StateOverride]) -> Result<Vec<StateDef>> {
    let k = assignment.n_clusters as i32;
    let mut owner: BTreeMap<i32, usize> = BTreeMap::new();
    let mut states = Vec::new();
    for (s, o) in overrides.iter().enumerate() {
        let name = o.name.trim();
        if name.is_empty() {
            return Err(Error::Labels("state names must not be empty".into()));
        }
        if name == GLOBAL_STATE {
            return Err(Error::Labels(format!("state name `{GLOBAL_STATE}` is reserved")));
        }
        if o.clusters.is_empty() {
            return Err(Error::Labels(format!("state `{name}` lists no clusters")));
        }
        for &c in &o.clusters {
            if c < 0 || c >= k {
                return Err(Error::Labels(format!(
                    "unknown cluster id {c}: assignment `{}` has {k} clusters",
                    assignment.algorithm
                )));
            }
            if let Some(prev) = owner.insert(c, s) {
                return Err(Error::Labels(format!(
                    "cluster {c} is claimed by both `{}` and `{name}`",
                    overrides[prev].name.trim()
                )));
            }
        }
        let mut clusters = o.clusters.clone();
        clusters.sort_unstable();
        states.push(StateDef {
            label: s as i32,
            name: name.to_string(),
            tag: o.tag,
            clusters,
        });
    }
    for c in (0..k).filter(|c| !owner.contains_key(c)) {
        states.push(StateDef {
            label: states.len() as i32,
            name: format!("cluster-{c}"),
            tag: Tag::Unknown,
            clusters: vec![c],
        });
    }
    for (i, s) in states.iter().enumerate() {
        if states[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::Labels(format!("duplicate state name `{}`", s.name)));
        }
    }
    Ok(states)
}

/// State label of every row of `assignment`; noise stays noise.
pub fn state_labels(assignment: &ClusterAssignment, states: &[StateDef]) -> Vec<i32> {
    let mut map = vec![NOISE; assignment.n_clusters];
    for s in states {
        for &c in &s.clusters {
            map[c as usize] = s.label;
        }
    }
    assignment
        .labels
        .iter()
        .map(|&l| if l == NOISE { NOISE } else { map[l as usize] })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    /// Values removed by each band filter.
    pub flagged: BTreeMap<String, usize>,
    /// Missing cells filled by padding, per signal.
    pub padded: BTreeMap<String, usize>,
    /// SHA-256 of the raw input, so later runs can tell whether it changed.
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub boundary: Timestamp,
    /// Training rows are `0..n_train`, test rows the rest.
    pub n_train: usize,
    pub n_test: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectState {
    pub version: u32,
    pub config: PipelineConfig,
    /// Where the data came from (a file path or `synthetic`).
    pub source: String,
    /// Cleaned, gap-free signals.
    pub dataset: Option<FeatureMatrix>,
    pub ingest: Option<IngestReport>,
    pub normalization: Option<NormalizationParams>,
    pub split: Option<SplitInfo>,
    pub embedding: Option<Embedding>,
    /// Test rows placed into the training layout.
    pub test_coords: Option<Matrix>,
    /// Training-row assignments keyed by algorithm name.
    pub assignments: BTreeMap<String, ClusterAssignment>,
    pub kmeans_model: Option<KMeansModel>,
    pub som_grid: Option<SomGrid>,
    /// Assignment the states refer to.
    pub active: Option<String>,
    pub overrides: Option<LabelOverrides>,
    pub states: Vec<StateDef>,
    pub voting: Option<VotingClassifier>,
    /// State of every test row, as predicted by the voting classifier.
    pub test_states: Vec<i32>,
    pub bank: Option<ModelBank>,
    pub scores: Vec<ScoreRow>,
    pub manifest: Manifest,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<serde_json::Value>,
}

impl ProjectState {
    pub fn new(config: PipelineConfig, source: impl Into<String>) -> Self {
        Self {
            version: STATE_VERSION,
            config,
            source: source.into(),
            dataset: None,
            ingest: None,
            normalization: None,
            split: None,
            embedding: None,
            test_coords: None,
            assignments: BTreeMap::new(),
            kmeans_model: None,
            som_grid: None,
            active: None,
            overrides: None,
            states: Vec::new(),
            voting: None,
            test_states: Vec::new(),
            bank: None,
            scores: Vec::new(),
            manifest: Manifest::default(),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    /// Parses a saved state. The version is checked before anything else, and
    /// a truncated or otherwise invalid document yields an error, never a
    /// partial state.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_slice(bytes)?;
        match probe.version {
            Some(serde_json::Value::Number(n)) if n.as_u64() == Some(u64::from(STATE_VERSION)) => {}
            other => {
                return Err(Error::Version {
                    found: other.map_or_else(|| "?".into(), |v| v.to_string().trim_matches('"').to_string()),
                    expected: STATE_VERSION,
                })
            }
        }
        let mut state: Self = serde_json::from_slice(bytes)?;
        state.attach()?;
        Ok(state)
    }

    /// Writes atomically: the file is replaced only once fully written.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let bytes = self.to_json()?;
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Restores references that are not serialized by value.
    pub(crate) fn attach(&mut self) -> Result<()> {
        if self.voting.is_some() {
            let x = self.train_x()?;
            if let Some(v) = &mut self.voting {
                v.knn.attach(&x);
            }
        }
        Ok(())
    }

    fn require<T>(v: Option<T>, what: &str) -> Result<T> {
        v.ok_or_else(|| Error::NotReady(format!("{what} is not available yet; run the pipeline first")))
    }

    pub fn dataset(&self) -> Result<&FeatureMatrix> {
        Self::require(self.dataset.as_ref(), "dataset")
    }

    pub fn split_info(&self) -> Result<&SplitInfo> {
        Self::require(self.split.as_ref(), "split")
    }

    /// The whole dataset in normalized units.
    pub fn normalized(&self) -> Result<FeatureMatrix> {
        let p = Self::require(self.normalization.as_ref(), "normalization")?;
        Ok(normalize_apply(p, self.dataset()?)?)
    }

    fn rows(&self, train: bool) -> Result<Matrix> {
        let n_train = self.split_info()?.n_train;
        let m = self.normalized()?;
        let idx: Vec<usize> = if train {
            (0..n_train).collect()
        } else {
            (n_train..m.n_rows()).collect()
        };
        Ok(m.data().select_rows(&idx))
    }

    pub fn train_x(&self) -> Result<Matrix> {
        self.rows(true)
    }

    pub fn test_x(&self) -> Result<Matrix> {
        self.rows(false)
    }

    pub fn active_assignment(&self) -> Result<&ClusterAssignment> {
        let name = self.active.as_deref().unwrap_or(&self.config.clustering.active);
        self.assignments
            .get(name)
            .ok_or_else(|| Error::NotReady(format!("assignment `{name}` is not available; run the cluster stage")))
    }

    pub fn state_name(&self, label: i32) -> String {
        self.states
            .iter()
            .find(|s| s.label == label)
            .map_or_else(|| format!("state-{label}"), |s| s.name.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(labels: Vec<i32>) -> ClusterAssignment {
        ClusterAssignment::new(labels, "kmeans", BTreeMap::new()).unwrap()
    }

    fn ov(name: &str, clusters: &[i32]) -> StateOverride {
        StateOverride {
            name: name.into(),
            tag: Tag::Healthy,
            clusters: clusters.to_vec(),
        }
    }

    #[test]
    fn merge_takes_the_union() {
        let a = assignment(vec![0, 1, 2, 2, -1]);
        let states = resolve_states(&a, &[ov("operating", &[2, 1])]).unwrap();
        assert_eq!(states.len(), 2);
        assert_eq!(states[0].clusters, vec![1, 2]);
        assert_eq!(states[1].name, "cluster-0");
        assert_eq!(state_labels(&a, &states), vec![1, 0, 0, 0, -1]);
    }

    #[test]
    fn rename_keeps_membership() {
        let a = assignment(vec![0, 1, 1]);
        let plain = resolve_states(&a, &[]).unwrap();
        let named = resolve_states(&a, &[ov("shutdown", &[0]), ov("operating", &[1])]).unwrap();
        assert_eq!(state_labels(&a, &plain), state_labels(&a, &named));
        assert_eq!(named[1].name, "operating");
    }

    #[test]
    fn unknown_cluster_rejected() {
        let a = assignment(vec![0, 1, 2]);
        let e = resolve_states(&a, &[ov("x", &[99])]).unwrap_err();
        assert!(e.to_string().contains("unknown cluster id 99"), "{e}");
    }

    #[test]
    fn conflicting_overrides_rejected() {
        let a = assignment(vec![0, 1, 2]);
        assert!(resolve_states(&a, &[ov("x", &[0]), ov("y", &[0])]).is_err());
        assert!(resolve_states(&a, &[ov("x", &[0]), ov("x", &[1])]).is_err());
        assert!(resolve_states(&a, &[ov("cluster-1", &[0])]).is_err());
        assert!(resolve_states(&a, &[ov("global", &[0])]).is_err());
        assert!(resolve_states(&a, &[ov("", &[0])]).is_err());
        assert!(resolve_states(&a, &[ov("x", &[])]).is_err());
    }

    #[test]
    fn manifest_staleness() {
        let mut m = Manifest::default();
        for s in Stage::ALL {
            m.get_mut(s).status = StageStatus::Complete;
        }
        assert_eq!(m.mark_stale_from(Stage::Voting), vec![Stage::Voting, Stage::Bank, Stage::Score]);
        assert_eq!(m.stale().len(), 3);
        m.reset_from(Stage::Bank);
        assert_eq!(m.get(Stage::Bank).status, StageStatus::Pending);
        assert_eq!(m.get(Stage::Voting).status, StageStatus::Stale);
    }

    #[test]
    fn version_errors_name_both_versions() {
        let e = ProjectState::from_json(br#"{"version": 7}"#).unwrap_err();
        assert_eq!(e.to_string(), "unsupported state version v7 (this build reads v1)");
        let e = ProjectState::from_json(br#"{"version": "2.0"}"#).unwrap_err();
        assert!(e.to_string().contains("v2.0"));
        assert!(matches!(ProjectState::from_json(b"{}"), Err(Error::Version { .. })));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let s = ProjectState::new(PipelineConfig::new(1), "x");
        let bytes = s.to_json().unwrap();
        assert_eq!(ProjectState::from_json(&bytes).unwrap(), s);
        for cut in [1, bytes.len() / 2, bytes.len() - 1] {
            assert!(ProjectState::from_json(&bytes[..cut]).is_err());
        }
    }
}
