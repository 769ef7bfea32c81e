//! Internal cluster-validity indices against held-out class labels.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("no objects to evaluate")]
    Empty,
    #[error("CH undefined for {classes} classes over {n} objects")]
    ChUndefined { classes: usize, n: usize },
    #[error("silhouette undefined for a single class")]
    SilhouetteUndefined,
    #[error("method `{method}` was evaluated against a different label set")]
    InconsistentLabels { method: String },
    #[error("no methods to compare")]
    NoMethods,
}

/// Vectors partitioned by class label. Classes are ordered by first appearance.
#[derive(Debug, Clone)]
pub struct LabeledEmbedding {
    vectors: Array2<f64>,
    labels: Vec<String>,
    class_names: Vec<String>,
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl LabeledEmbedding {
    pub fn new(vectors: Array2<f64>, labels: Vec<String>) -> Result<Self, EvalError> {
        if vectors.nrows() != labels.len() {
            return Err(EvalError::LengthMismatch {
                vectors: vectors.nrows(),
                labels: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut class_names = Vec::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            let c = *index.entry(l.as_str()).or_insert_with(|| {
                class_names.push(l.clone());
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[c].push(i);
            class_of.push(c);
        }
        // standard layout keeps rows contiguous for the distance kernels
        let vectors = if vectors.is_standard_layout() {
            vectors
        } else {
            vectors.as_standard_layout().to_owned()
        };
        Ok(Self {
            vectors,
            labels,
            class_names,
            class_of,
            classes,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i).to_slice().expect("standard layout")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            let d = a[4 * c + k] - b[4 * c + k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChScore {
    pub value: f64,
    /// Set when the within-class scatter is zero and `value` is `+inf`.
    pub zero_within: bool,
}

pub fn calinski_harabasz(emb: &LabeledEmbedding) -> Result<ChScore, EvalError> {
    let (n, t) = (emb.n(), emb.num_classes());
    if t < 2 || n <= t {
        return Err(EvalError::ChUndefined { classes: t, n });
    }
    let center = emb.vectors.mean_axis(Axis(0)).expect("non-empty");
    let mut between = 0.0;
    let mut within = 0.0;
    for members in &emb.classes {
        let mut centroid = Array1::<f64>::zeros(emb.vectors.ncols());
        for &i in members {
            centroid += &emb.vectors.row(i);
        }
        centroid /= members.len() as f64;
        let c = centroid.as_slice().expect("owned");
        between += members.len() as f64 * sq_dist(c, center.as_slice().expect("owned"));
        within += members.iter().map(|&i| sq_dist(emb.row(i), c)).sum::<f64>();
    }
    if within == 0.0 {
        return Ok(ChScore {
            value: f64::INFINITY,
            zero_within: true,
        });
    }
    let value = (between / (t - 1) as f64) / (within / (n - t) as f64);
    Ok(ChScore {
        value,
        zero_within: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteScore {
    /// Mean over classes of the within-class mean.
    pub macro_avg: f64,
    /// Mean over all objects.
    pub micro_avg: f64,
    pub per_object: Vec<f64>,
}

fn silhouette_value(a: f64, b: f64) -> f64 {
    let denom = a.max(b);
    if denom == 0.0 {
        0.0
    } else {
        (b - a) / denom
    }
}

pub fn silhouette(emb: &LabeledEmbedding) -> Result<SilhouetteScore, EvalError> {
    let t = emb.num_classes();
    if t < 2 {
        return Err(EvalError::SilhouetteUndefined);
    }
    let sizes: Vec<usize> = emb.classes.iter().map(Vec::len).collect();
    let per_object: Vec<f64> = (0..emb.n())
        .into_par_iter()
        .map(|i| {
            let own = emb.class_of[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let x = emb.row(i);
            let mut sums = vec![0.0; t];
            for j in 0..emb.n() {
                if j != i {
                    sums[emb.class_of[j]] += sq_dist(x, emb.row(j)).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..t)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            silhouette_value(a, b)
        })
        .collect();
    let macro_avg = emb
        .classes
        .iter()
        .map(|members| members.iter().map(|&i| per_object[i]).sum::<f64>() / members.len() as f64)
        .sum::<f64>()
        / t as f64;
    let micro_avg = per_object.iter().sum::<f64>() / per_object.len() as f64;
    Ok(SilhouetteScore {
        macro_avg,
        micro_avg,
        per_object,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Index {
    #[serde(rename = "CH")]
    CalinskiHarabasz,
    #[serde(rename = "S")]
    Silhouette,
}

impl Index {
    pub fn short(&self) -> &'static str {
        match self {
            Index::CalinskiHarabasz => "CH",
            Index::Silhouette => "S",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Best,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub rank: Option<Rank>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub index: Index,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub method: String,
    pub dataset: String,
    pub index: Index,
    pub value: f64,
    /// 1 for best, 2 for second best, 0 otherwise.
    pub rank: u8,
}

/// Ranks by distinct value, so ties share a rank.
fn rank_cells(values: &[f64]) -> Vec<Cell> {
    let mut distinct: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    distinct.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    distinct.dedup();
    values
        .iter()
        .map(|&v| Cell {
            value: v,
            rank: match distinct.iter().position(|&d| d == v) {
                Some(0) => Some(Rank::Best),
                Some(1) => Some(Rank::Second),
                _ => None,
            },
        })
        .collect()
}

/// Scores every method on both indices and marks the top two per index.
pub fn evaluate_all(
    embeddings: &[(String, LabeledEmbedding)],
) -> Result<ComparisonTable, EvalError> {
    let (_, first) = embeddings.first().ok_or(EvalError::NoMethods)?;
    for (name, emb) in embeddings {
        if emb.labels != first.labels {
            return Err(EvalError::InconsistentLabels {
                method: name.clone(),
            });
        }
    }
    let mut ch = Vec::new();
    let mut sil = Vec::new();
    for (_, emb) in embeddings {
        ch.push(calinski_harabasz(emb)?.value);
        sil.push(silhouette(emb)?.macro_avg);
    }
    let methods = embeddings.iter().map(|(n, _)| n.clone()).collect();
    Ok(ComparisonTable::from_values(methods, &ch, &sil))
}

impl ComparisonTable {
    /// Builds a ranked table from per-method CH and S values.
    pub fn from_values(methods: Vec<String>, ch: &[f64], silhouette: &[f64]) -> Self {
        assert_eq!(methods.len(), ch.len());
        assert_eq!(methods.len(), silhouette.len());
        Self {
            methods,
            rows: vec![
                ComparisonRow {
                    index: Index::CalinskiHarabasz,
                    cells: rank_cells(ch),
                },
                ComparisonRow {
                    index: Index::Silhouette,
                    cells: rank_cells(silhouette),
                },
            ],
        }
    }

    pub fn value(&self, method: &str, index: Index) -> Option<f64> {
        let col = self.methods.iter().position(|m| m == method)?;
        let row = self.rows.iter().find(|r| r.index == index)?;
        Some(row.cells[col].value)
    }

    pub fn records(&self, dataset: &str) -> Vec<ComparisonRecord> {
        self.rows
            .iter()
            .flat_map(|row| {
                row.cells
                    .iter()
                    .zip(&self.methods)
                    .map(move |(cell, m)| ComparisonRecord {
                        method: m.clone(),
                        dataset: dataset.to_string(),
                        index: row.index,
                        value: cell.value,
                        rank: match cell.rank {
                            Some(Rank::Best) => 1,
                            Some(Rank::Second) => 2,
                            None => 0,
                        },
                    })
            })
            .collect()
    }

    /// Aligned text; `*` marks the best cell of a row and `+` the second best.
    pub fn to_text(&self, dataset: &str) -> String {
        let fmt_cell = |c: &Cell| {
            let mark = match c.rank {
                Some(Rank::Best) => "*",
                Some(Rank::Second) => "+",
                None => " ",
            };
            format!("{:.4}{mark}", c.value)
        };
        let mut widths: Vec<usize> = self.methods.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, c) in widths.iter_mut().zip(&row.cells) {
                *w = (*w).max(fmt_cell(c).len());
            }
        }
        let label_w = dataset.len().max(8);
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", dataset);
        for (m, w) in self.methods.iter().zip(&widths) {
            let _ = write!(out, "  {m:>w$}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<label_w$}", row.index.short());
            for (c, w) in row.cells.iter().zip(&widths) {
                let _ = write!(out, "  {:>w$}", fmt_cell(c));
            }
            out.push('\n');
        }
        out
    }
}
