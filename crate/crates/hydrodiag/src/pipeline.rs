//! Stage-by-stage pipeline execution over a [`ProjectState`].
//!
//! Stages run in a fixed order: ingest, normalize, split, embed, cluster,
//! (labels), voting, bank, score. A stage re-runs when it is not complete or
//! when the hash of its configuration chain no longer matches the one
//! recorded in the manifest. After every stage the state is written to the
//! checkpoint file, if one is set, so a failure leaves the completed stages
//! on disk.
//!
//! The normalization parameters are fitted on the rows before the split
//! boundary only, so the normalize stage resolves the boundary itself.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hydrodiag_core::autoenc::{fit_bank, score, ModelBank};
use hydrodiag_core::classify::fit_voting;
use hydrodiag_core::cluster::{agglomerative, dbscan, kmeans, som_fit, NOISE};
use hydrodiag_core::dimred::{fit_embedding, transform_new};
use hydrodiag_core::ingest::{
    apply_band_filter, normalize_apply, normalize_fit, pad_missing, split_by_time, FeatureMatrix, SplitSpec,
    SplitWarning,
};
use hydrodiag_core::Matrix;
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{hash_json, PipelineConfig};
use crate::formats::{format_timestamp, EmbeddedPoint, ScoreRow};
use crate::state::{
    resolve_states, state_labels, IngestReport, LabelOverrides, ProjectState, SplitInfo, Stage, StageStatus, GLOBAL_STATE,
};
use crate::{Error, Result};

/// How far a run got.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    /// Every requested stage is complete.
    Completed,
    /// Clustering is done; the run waits for labels.
    AwaitingLabels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LabelOutcome {
    Applied { stale: Vec<Stage> },
    AlreadyApplied,
}

/// Mean test-set reconstruction error of the model bank against the global
/// model. Each test row is scored by the model of the state the voting
/// classifier assigns it to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub rows: usize,
    pub per_state_mae: f64,
    pub global_mae: f64,
    /// `per_state_mae / global_mae`.
    pub ratio: f64,
    pub states: Vec<StateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub name: String,
    pub rows: usize,
    pub mae: f64,
    pub global_mae: f64,
}

pub struct Pipeline {
    pub state: ProjectState,
    /// Unprocessed data, needed only when the ingest stage has to run.
    raw: Option<FeatureMatrix>,
    raw_hash: Option<String>,
    checkpoint: Option<PathBuf>,
    /// Stop after clustering even when the configuration auto-accepts.
    pub pause_for_labels: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, raw: FeatureMatrix, source: impl Into<String>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: ProjectState::new(config, source),
            raw_hash: Some(hash_json(&raw)),
            raw: Some(raw),
            checkpoint: None,
            pause_for_labels: false,
        })
    }

    pub fn from_state(state: ProjectState) -> Self {
        Self {
            state,
            raw: None,
            raw_hash: None,
            checkpoint: None,
            pause_for_labels: false,
        }
    }

    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut p = Self::from_state(ProjectState::load(&path)?);
        p.checkpoint = Some(path);
        Ok(p)
    }

    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint = Some(path.into());
        self
    }

    /// Supplies fresh data; the ingest stage and everything after it re-run.
    pub fn set_data(&mut self, raw: FeatureMatrix, source: impl Into<String>) {
        self.raw_hash = Some(hash_json(&raw));
        self.raw = Some(raw);
        self.state.source = source.into();
        self.state.manifest.reset_from(Stage::Ingest);
    }

    /// Replaces the configuration; stages whose configuration chain changed
    /// re-run on the next [`Pipeline::run_until`].
    pub fn set_config(&mut self, config: PipelineConfig) -> Result<()> {
        config.validate()?;
        self.state.config = config;
        Ok(())
    }

    pub fn save(&self) -> Result<()> {
        if let Some(path) = &self.checkpoint {
            self.state.save(path)?;
        }
        Ok(())
    }

    fn chain_hash(&self, stage: Stage) -> String {
        chain_hash(&self.state, self.raw_hash.as_deref(), stage)
    }

    /// Complete and configured exactly as now.
    pub fn is_current(&self, stage: Stage) -> bool {
        is_current(&self.state, self.raw_hash.as_deref(), stage)
    }

    /// Runs every stage up to and including `target` that is not current.
    pub fn run_until(&mut self, target: Stage) -> Result<RunOutcome> {
        let mut upstream_ran = false;
        for stage in Stage::ALL.into_iter().take(target.index() + 1) {
            if stage == Stage::Voting && self.state.states.is_empty() {
                if self.state.config.clustering.auto_accept && !self.pause_for_labels {
                    self.accept(None)?;
                } else {
                    self.state.manifest.awaiting_labels = true;
                    self.save()?;
                    info!("clustering done; waiting for labels");
                    return Ok(RunOutcome::AwaitingLabels);
                }
            }
            if !upstream_ran && self.is_current(stage) {
                continue;
            }
            self.run_stage(stage)?;
            upstream_ran = true;
        }
        Ok(RunOutcome::Completed)
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        info!("stage {stage} started");
        {
            let r = self.state.manifest.get_mut(stage);
            r.started_at = Some(chrono::Utc::now().to_rfc3339());
            r.finished_at = None;
            r.error = None;
        }
        let config_hash = section_hash(&self.state, self.raw_hash.as_deref(), stage);
        let result = match stage {
            Stage::Ingest => self.stage_ingest(),
            Stage::Normalize => self.stage_normalize(),
            Stage::Split => self.stage_split(),
            Stage::Embed => self.stage_embed(),
            Stage::Cluster => self.stage_cluster(),
            Stage::Voting => self.stage_voting(),
            Stage::Bank => self.stage_bank(),
            Stage::Score => self.stage_score(),
        };
        match result {
            Ok(seed) => {
                // the ingest hash must be recorded before the chain hash reads it
                self.state.manifest.get_mut(stage).config_hash = config_hash;
                let input_hash = self.chain_hash(stage);
                let r = self.state.manifest.get_mut(stage);
                r.status = StageStatus::Complete;
                r.seed = seed;
                r.input_hash = input_hash;
                r.finished_at = Some(chrono::Utc::now().to_rfc3339());
                if stage == Stage::Cluster {
                    self.state.manifest.awaiting_labels = false;
                }
                info!("stage {stage} complete");
                self.save()
            }
            Err(e) => {
                let r = self.state.manifest.get_mut(stage);
                r.status = StageStatus::Failed;
                r.error = Some(e.to_string());
                self.save()?;
                Err(Error::Stage {
                    stage: stage.name(),
                    cause: Box::new(e),
                })
            }
        }
    }

    fn stage_ingest(&mut self) -> Result<Option<u64>> {
        let raw = self
            .raw
            .as_ref()
            .ok_or_else(|| Error::NotReady("the ingest stage needs the data file; pass it again".into()))?;
        let mut m = raw.clone();
        let mut report = IngestReport {
            rows: m.n_rows(),
            data_hash: self.raw_hash.clone().unwrap_or_default(),
            ..IngestReport::default()
        };
        for b in &self.state.config.ingest.band_filters {
            let (filtered, flagged) = apply_band_filter(&m, &b.signal, b.low, b.high)?;
            *report.flagged.entry(b.signal.clone()).or_default() += flagged;
            m = filtered;
        }
        for (j, s) in m.signals().iter().enumerate() {
            let missing = (0..m.n_rows()).filter(|&i| m.is_missing(i, j)).count();
            if missing > 0 {
                report.padded.insert(s.name.clone(), missing);
            }
        }
        self.state.dataset = Some(pad_missing(&m)?);
        self.state.ingest = Some(report);
        Ok(None)
    }

    fn stage_normalize(&mut self) -> Result<Option<u64>> {
        let data = self.state.dataset()?;
        let boundary = self.state.config.split.boundary(data.timestamps())?;
        let n_train = data.timestamps().partition_point(|t| *t < boundary);
        if n_train == 0 {
            return Err(Error::Config(format!(
                "no rows before the split boundary {}; normalization needs training rows",
                format_timestamp(boundary)
            )));
        }
        let idx: Vec<usize> = (0..n_train).collect();
        let (_, params) = normalize_fit(&data.select_rows(&idx)?)?;
        self.state.normalization = Some(params);
        Ok(None)
    }

    fn stage_split(&mut self) -> Result<Option<u64>> {
        let data = self.state.dataset()?;
        let boundary = self.state.config.split.boundary(data.timestamps())?;
        let s = split_by_time(data, SplitSpec { boundary })?;
        let warnings = s
            .warnings
            .iter()
            .map(|w| match w {
                SplitWarning::EmptyTrain => "training split is empty".to_string(),
                SplitWarning::EmptyTest => "test split is empty".to_string(),
            })
            .collect();
        self.state.split = Some(SplitInfo {
            boundary,
            n_train: s.train_rows.len(),
            n_test: s.test_rows.len(),
            warnings,
        });
        Ok(None)
    }

    fn stage_embed(&mut self) -> Result<Option<u64>> {
        let cfg = self.state.config.embedding_config();
        let train = self.state.train_x()?;
        let e = fit_embedding(&train, &cfg)?;
        if !e.spectral_converged {
            log::warn!("spectral initialization did not converge; used random initialization");
        }
        self.state.test_coords = Some(transform_new(&e, &self.state.test_x()?)?);
        self.state.embedding = Some(e);
        Ok(Some(cfg.seed))
    }

    fn stage_cluster(&mut self) -> Result<Option<u64>> {
        let x = self.state.train_x()?;
        let cfg = self.state.config.clone();
        let c = &cfg.clustering;
        let mut out = BTreeMap::new();
        self.state.kmeans_model = None;
        self.state.som_grid = None;
        if let Some(k) = &c.kmeans {
            let (model, a) = kmeans(&x, k.k, cfg.seed("kmeans"), k.max_iter, k.restarts)?;
            self.state.kmeans_model = Some(model);
            out.insert("kmeans".to_string(), a);
        }
        if let Some(a) = &c.agglomerative {
            out.insert("agglomerative".to_string(), agglomerative(&x, a.k, a.linkage)?);
        }
        if let Some(d) = &c.dbscan {
            out.insert("dbscan".to_string(), dbscan(&x, d.eps, d.min_pts)?);
        }
        if let Some(s) = &c.som {
            let (grid, a) = som_fit(&x, s.width, s.height, s.epochs, cfg.seed("som"))?;
            self.state.som_grid = Some(grid);
            out.insert("som".to_string(), a);
        }
        self.state.assignments = out;
        // earlier labels referred to the previous clustering
        self.state.active = None;
        self.state.overrides = None;
        self.state.states.clear();
        self.state.manifest.mark_stale_from(Stage::Voting);
        Ok(Some(cfg.seed("cluster")))
    }

    fn accept(&mut self, overrides: Option<&LabelOverrides>) -> Result<Vec<Stage>> {
        let name = overrides
            .and_then(|o| o.assignment.clone())
            .or_else(|| self.state.active.clone())
            .unwrap_or_else(|| self.state.config.clustering.active.clone());
        let assignment = self.state.assignments.get(&name).ok_or_else(|| {
            Error::Labels(format!(
                "unknown assignment `{name}`; available: {:?}",
                self.state.assignments.keys().collect::<Vec<_>>()
            ))
        })?;
        let states = resolve_states(assignment, overrides.map_or(&[][..], |o| &o.states))?;
        self.state.active = Some(name);
        self.state.overrides = overrides.cloned();
        self.state.states = states;
        self.state.manifest.awaiting_labels = false;
        Ok(self.state.manifest.mark_stale_from(Stage::Voting))
    }

    /// Applies the practitioner's states. Re-applying the current overrides
    /// changes nothing.
    pub fn apply_labels(&mut self, overrides: &LabelOverrides) -> Result<LabelOutcome> {
        if !self.state.manifest.is_complete(Stage::Cluster) {
            return Err(Error::NotReady("labels need a completed cluster stage".into()));
        }
        let target = overrides
            .assignment
            .clone()
            .or_else(|| self.state.active.clone())
            .unwrap_or_else(|| self.state.config.clustering.active.clone());
        let same_target = self.state.active.as_deref() == Some(target.as_str());
        let mut normalized = overrides.clone();
        normalized.assignment = Some(target);
        let current = self.state.overrides.clone().map(|mut o| {
            o.assignment = self.state.active.clone();
            o
        });
        if same_target && current.as_ref() == Some(&normalized) {
            return Ok(LabelOutcome::AlreadyApplied);
        }
        let stale = self.accept(Some(&normalized))?;
        self.save()?;
        Ok(LabelOutcome::Applied { stale })
    }

    fn stage_voting(&mut self) -> Result<Option<u64>> {
        let cfg = self.state.config.voting_config();
        let x = self.state.train_x()?;
        let labels = state_labels(self.state.active_assignment()?, &self.state.states);
        let test = self.state.test_x()?;
        let present: Vec<i32> = {
            let mut v: Vec<i32> = labels.iter().copied().filter(|&l| l != NOISE).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        match present.len() {
            0 => return Err(Error::Labels("every training row is noise; no state to learn".into())),
            1 => {
                self.state.voting = None;
                self.state.test_states = vec![present[0]; test.rows()];
            }
            _ => {
                let v = fit_voting(&x, &labels, &cfg)?;
                self.state.test_states = test.iter_rows().map(|r| v.predict(r)).collect::<hydrodiag_core::Result<_>>()?;
                self.state.voting = Some(v);
            }
        }
        Ok(Some(cfg.seed))
    }

    fn stage_bank(&mut self) -> Result<Option<u64>> {
        let cfg = &self.state.config;
        let (space, train) = (cfg.search_space(), cfg.train_config());
        let labels = state_labels(self.state.active_assignment()?, &self.state.states);
        let bank = fit_bank(&self.state.train_x()?, &labels, &space, &train)?;
        for w in &bank.warnings {
            log::warn!("{w}");
        }
        self.state.bank = Some(bank);
        Ok(Some(space.seed))
    }

    fn stage_score(&mut self) -> Result<Option<u64>> {
        let info = self.state.split_info()?;
        let ids: Vec<usize> = (info.n_train..info.n_train + info.n_test).collect();
        let timestamps = self.state.dataset()?.timestamps()[info.n_train..].to_vec();
        let rows = score_rows(&self.state, &self.state.test_x()?, &ids, &timestamps)?;
        self.state.scores = rows;
        Ok(None)
    }
}

fn section_hash(state: &ProjectState, raw_hash: Option<&str>, stage: Stage) -> String {
    let c = &state.config;
    match stage {
        Stage::Ingest => {
            let data = match (raw_hash, &state.ingest) {
                (Some(h), _) => h.to_string(),
                (None, Some(report)) => report.data_hash.clone(),
                (None, None) => String::new(),
            };
            hash_json(&(&c.ingest, data))
        }
        Stage::Normalize | Stage::Split => hash_json(&c.split),
        Stage::Embed => hash_json(&c.embedding_config()),
        Stage::Cluster => {
            let cl = &c.clustering;
            hash_json(&(c.master_seed, &cl.kmeans, &cl.agglomerative, &cl.dbscan, &cl.som))
        }
        Stage::Voting => hash_json(&(
            c.voting_config(),
            state.active.as_deref().unwrap_or(&c.clustering.active),
            &state.states,
        )),
        Stage::Bank => hash_json(&(c.search_space(), c.train_config())),
        Stage::Score => hash_json(&()),
    }
}

/// Hash of `stage`'s configuration chained with every upstream stage.
fn chain_hash(state: &ProjectState, raw_hash: Option<&str>, stage: Stage) -> String {
    let mut h = String::new();
    for s in Stage::ALL.iter().take(stage.index() + 1) {
        h = hash_json(&(h, section_hash(state, raw_hash, *s)));
    }
    h
}

fn is_current(state: &ProjectState, raw_hash: Option<&str>, stage: Stage) -> bool {
    let r = state.manifest.get(stage);
    r.status == StageStatus::Complete && r.input_hash == chain_hash(state, raw_hash, stage)
}

fn bank_of(state: &ProjectState) -> Result<&ModelBank> {
    state
        .bank
        .as_ref()
        .ok_or_else(|| Error::NotReady("no model bank; run `train` first".into()))
}

/// Refuses to use a bank trained under labels or settings that have since
/// changed.
pub fn ensure_bank_current(state: &ProjectState) -> Result<&ModelBank> {
    let bank = bank_of(state)?;
    for s in [Stage::Voting, Stage::Bank] {
        let r = state.manifest.get(s);
        if r.status == StageStatus::Stale || (r.status == StageStatus::Complete && !is_current(state, None, s)) {
            return Err(Error::Stale(
                "the model bank is stale (labels or settings changed since training); run `train` first".into(),
            ));
        }
        if r.status != StageStatus::Complete {
            return Err(Error::NotReady(format!("the {s} stage has not completed; run `train` first")));
        }
    }
    Ok(bank)
}

/// One row per state model plus one for the global model, for every row of
/// `x` (normalized).
pub fn score_rows(
    state: &ProjectState,
    x: &Matrix,
    row_ids: &[usize],
    timestamps: &[hydrodiag_core::ingest::Timestamp],
) -> Result<Vec<ScoreRow>> {
    let bank = ensure_bank_current(state)?;
    let mut out = Vec::with_capacity(x.rows() * (bank.states.len() + 1));
    for ((r, &id), &t) in x.iter_rows().zip(row_ids).zip(timestamps) {
        let rep = score(bank, r)?;
        let nearest = state.state_name(rep.nearest);
        for s in &rep.states {
            out.push(ScoreRow {
                row_id: id,
                timestamp: t,
                state: state.state_name(s.label),
                mae: s.mae,
                dev: s.dev,
                nearest_state: nearest.clone(),
            });
        }
        out.push(ScoreRow {
            row_id: id,
            timestamp: t,
            state: GLOBAL_STATE.into(),
            mae: rep.global_mae,
            dev: bank.global.deviation(rep.global_mae),
            nearest_state: nearest,
        });
    }
    Ok(out)
}

/// Scores never-seen data: cleaned with the ingest settings and normalized
/// with the training parameters.
pub fn score_new_data(state: &ProjectState, raw: &FeatureMatrix) -> Result<Vec<ScoreRow>> {
    ensure_bank_current(state)?;
    let mut m = raw.clone();
    for b in &state.config.ingest.band_filters {
        m = apply_band_filter(&m, &b.signal, b.low, b.high)?.0;
    }
    let m = pad_missing(&m)?;
    let params = state
        .normalization
        .as_ref()
        .ok_or_else(|| Error::NotReady("no normalization parameters".into()))?;
    let x = normalize_apply(params, &m)?;
    let ids: Vec<usize> = (0..m.n_rows()).collect();
    score_rows(state, x.data(), &ids, m.timestamps())
}

/// Training rows first, then test rows placed into the layout.
pub fn embedded_points(state: &ProjectState) -> Result<Vec<EmbeddedPoint>> {
    let e = state
        .embedding
        .as_ref()
        .ok_or_else(|| Error::NotReady("no embedding; run the embed stage".into()))?;
    let ts = state.dataset()?.timestamps();
    let mut out = Vec::with_capacity(ts.len());
    let coords = e.coords.iter_rows().chain(state.test_coords.iter().flat_map(|m| m.iter_rows()));
    for (i, c) in coords.enumerate() {
        out.push(EmbeddedPoint {
            row_id: i,
            timestamp: ts[i],
            coords: c.to_vec(),
        });
    }
    Ok(out)
}

/// Table-style comparison of the bank against the global model on the test
/// rows. A test row whose state has no model (too few training rows) is
/// scored by its nearest state model.
pub fn test_summary(state: &ProjectState) -> Result<TestSummary> {
    let bank = ensure_bank_current(state)?;
    let x = state.test_x()?;
    if x.rows() == 0 {
        return Err(Error::NotReady("the test split is empty".into()));
    }
    let mut per: BTreeMap<i32, (usize, f64, f64)> = BTreeMap::new();
    let (mut total, mut total_global) = (0.0, 0.0);
    for (r, &s) in x.iter_rows().zip(&state.test_states) {
        let rep = score(bank, r)?;
        let mae = match rep.states.iter().find(|e| e.label == s) {
            Some(e) => e.mae,
            None => rep.states.iter().find(|e| e.label == rep.nearest).map_or(f64::NAN, |e| e.mae),
        };
        total += mae;
        total_global += rep.global_mae;
        let e = per.entry(s).or_default();
        e.0 += 1;
        e.1 += mae;
        e.2 += rep.global_mae;
    }
    let n = x.rows() as f64;
    Ok(TestSummary {
        rows: x.rows(),
        per_state_mae: total / n,
        global_mae: total_global / n,
        ratio: total / total_global,
        states: per
            .into_iter()
            .map(|(label, (k, m, g))| StateSummary {
                name: state.state_name(label),
                rows: k,
                mae: m / k as f64,
                global_mae: g / k as f64,
            })
            .collect(),
    })
}
