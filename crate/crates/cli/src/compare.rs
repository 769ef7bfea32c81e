//! Multi-run comparison of encoders on one labelled dataset.

use anyhow::{anyhow, Context, Result};
use neca_core::encoders::{encode_frequency, encode_neca, encode_onehot, EncodedDataset, Method};
use neca_core::evaluation::{
    calinski_harabasz, silhouette, ComparisonRecord, ComparisonTable, LabeledEmbedding,
};
use neca_core::Cad;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::pipeline::run_neca;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunScore {
    pub method: Method,
    /// Seed of a stochastic run; `None` for deterministic encoders.
    pub seed: Option<u64>,
    /// `None` when the within-class scatter is zero.
    pub ch: Option<f64>,
    pub silhouette: f64,
    pub silhouette_micro: f64,
}

impl RunScore {
    fn ch_value(&self) -> f64 {
        self.ch.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub ch_best: f64,
    pub ch_median: f64,
    pub silhouette_best: f64,
    pub silhouette_median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub dataset: String,
    pub runs: Vec<RunScore>,
    pub summary: Vec<MethodSummary>,
    /// Ranked per-index best values.
    pub best: ComparisonTable,
    pub median: ComparisonTable,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

pub fn score(encoded: &EncodedDataset, labels: &[String], seed: Option<u64>) -> Result<RunScore> {
    let emb = LabeledEmbedding::new(encoded.vectors.clone(), labels.to_vec())?;
    let ch = calinski_harabasz(&emb)?;
    let s = silhouette(&emb)?;
    Ok(RunScore {
        method: encoded.method,
        seed,
        ch: (!ch.zero_within).then_some(ch.value),
        silhouette: s.macro_avg,
        silhouette_micro: s.micro_avg,
    })
}

/// Runs NECA `runs` times with seeds `seed0..seed0+runs` and the deterministic encoders once.
pub fn run_compare(
    cad: &Cad,
    dataset: &str,
    methods: &[Method],
    runs: usize,
    seed0: u64,
    config: &RunConfig,
) -> Result<CompareResult> {
    anyhow::ensure!(runs >= 1, "runs must be at least 1");
    anyhow::ensure!(!methods.is_empty(), "no methods selected");
    let labels = cad
        .labels()
        .ok_or_else(|| anyhow!("{dataset} has no label column; comparison needs class labels"))?;
    let mut all = Vec::new();
    let mut summary = Vec::new();
    for &method in methods {
        let scores: Vec<RunScore> = match method {
            Method::OneHot => vec![score(&encode_onehot(cad), labels, None)?],
            Method::Frequency => vec![score(&encode_frequency(cad), labels, None)?],
            Method::Neca => (0..runs as u64)
                .into_par_iter()
                .map(|r| {
                    let seed = seed0 + r;
                    let cfg = config.with_seed(seed);
                    let run =
                        run_neca(cad, &cfg, |_| {}).with_context(|| format!("seed {seed}"))?;
                    let encoded = encode_neca(cad, &run.outcome.embeddings, &cfg.model());
                    score(&encoded, labels, Some(seed))
                })
                .collect::<Result<_>>()?,
        };
        let ch: Vec<f64> = scores.iter().map(RunScore::ch_value).collect();
        let s: Vec<f64> = scores.iter().map(|r| r.silhouette).collect();
        summary.push(MethodSummary {
            method,
            runs: scores.len(),
            ch_best: ch.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ch_median: median(&ch),
            silhouette_best: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            silhouette_median: median(&s),
        });
        all.extend(scores);
    }
    let names: Vec<String> = summary
        .iter()
        .map(|m| m.method.short().to_string())
        .collect();
    let pick = |f: fn(&MethodSummary) -> f64| summary.iter().map(f).collect::<Vec<f64>>();
    let best = ComparisonTable::from_values(
        names.clone(),
        &pick(|m| m.ch_best),
        &pick(|m| m.silhouette_best),
    );
    let median = ComparisonTable::from_values(
        names,
        &pick(|m| m.ch_median),
        &pick(|m| m.silhouette_median),
    );
    Ok(CompareResult {
        dataset: dataset.to_string(),
        runs: all,
        summary,
        best,
        median,
    })
}

impl CompareResult {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn records(&self) -> Vec<ComparisonRecord> {
        self.best.records(&self.dataset)
    }

    pub fn to_text(&self) -> String {
        format!(
            "best per index\n{}\nmedian per index\n{}",
            self.best.to_text(&self.dataset),
            self.median.to_text(&self.dataset)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
