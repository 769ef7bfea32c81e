//! The embedding pipeline and its run metadata.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use neca_core::kv::KeyValues;
use neca_core::training::{train, EpochLog, StopReason, TrainOutcome};
use neca_core::{Cad, HetNet};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::datasets::DatasetSource;

pub struct NecaRun {
    pub net: HetNet,
    pub outcome: TrainOutcome,
}

/// Builds both networks and trains, attributing failures to the stage that raised them.
pub fn run_neca(cad: &Cad, config: &RunConfig, observer: impl FnMut(&EpochLog)) -> Result<NecaRun> {
    let net = HetNet::build(cad, config.beta_connect, config.seed).context("building networks")?;
    let outcome =
        train(cad, &net, &config.model(), &config.train(), observer).context("training")?;
    Ok(NecaRun { net, outcome })
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub dataset: DatasetSource,
    /// Config values as text, so non-finite tolerances survive JSON.
    pub config: BTreeMap<String, String>,
    pub graph_seed: u64,
    pub init_seed: u64,
    pub n: usize,
    pub m: usize,
    pub nodes: usize,
    pub inter_edges: usize,
    pub intra_edges: usize,
    pub embedding_width: usize,
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub gamma_inter: f64,
    pub gamma_intra: f64,
    pub beta_inter: f64,
    pub beta_intra: f64,
    pub wall_time_secs: f64,
}

impl RunMetadata {
    pub fn new(source: &DatasetSource, cad: &Cad, config: &RunConfig, run: &NecaRun) -> Self {
        let report = &run.outcome.report;
        let emb = &run.outcome.embeddings;
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset: source.clone(),
            config: config
                .to_kv()
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            graph_seed: run.net.seed(),
            init_seed: config.seed,
            n: cad.n(),
            m: cad.m(),
            nodes: run.net.nodes().len(),
            inter_edges: run.net.inter().len(),
            intra_edges: run.net.intra().len(),
            embedding_width: emb.objects.ncols(),
            loss_history: report.loss_history.clone(),
            epochs_run: report.epochs_run,
            stop_reason: report.stop_reason,
            gamma_inter: emb.gamma_inter,
            gamma_intra: emb.gamma_intra,
            beta_inter: report.beta_inter,
            beta_intra: report.beta_intra,
            wall_time_secs: report.wall_time_secs,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let mut kv = KeyValues::default();
        for (k, v) in &self.config {
            kv.insert(k, v.clone());
        }
        let mut cfg = RunConfig::default();
        cfg.apply_kv(&kv)?;
        Ok(cfg)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
