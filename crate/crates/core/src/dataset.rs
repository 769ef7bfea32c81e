//! Categorical attribute datasets: loading, validation and preprocessing.
//!
//! A [`Cad`] stores each record as value indices into per-attribute domains.
//! Domains hold the observed tokens in first-appearance order, which fixes
//! the node indexing used everywhere downstream.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::kv::{KeyValues, KvError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no records")]
    Empty,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("column `{0}` not found")]
    UnknownColumn(String),
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("column `{0}` is assigned more than one role")]
    ConflictingRoles(String),
    #[error("attribute `{0}` has only missing values, no mode exists")]
    NoMode(String),
    #[error("record {row} has {found} entries, expected {expected}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{labels} labels for {records} records")]
    LabelCount { labels: usize, records: usize },
    #[error("discretization needs at least one bin")]
    ZeroBins,
    #[error("cannot discretize an empty column")]
    EmptyColumn,
    #[error("column `{column}`: `{value}` is not a finite number")]
    NotNumeric { column: String, value: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest {0}")]
    ManifestSyntax(#[from] KvError),
}

/// A categorical attribute dataset with optional evaluation labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cad {
    attribute_names: Vec<String>,
    domains: Vec<Vec<String>>,
    records: Vec<Vec<usize>>,
    labels: Option<Vec<String>>,
}

impl Cad {
    /// Builds a dataset from token rows. Domains come out in first-appearance order.
    pub fn from_token_rows(
        attribute_names: Vec<String>,
        rows: Vec<Vec<String>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let m = attribute_names.len();
        if m == 0 {
            return Err(DatasetError::NoFeatures);
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(DatasetError::LabelCount {
                    labels: l.len(),
                    records: rows.len(),
                });
            }
        }
        let mut domains: Vec<Vec<String>> = vec![Vec::new(); m];
        let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); m];
        let mut records = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(DatasetError::Arity {
                    row: i,
                    expected: m,
                    found: row.len(),
                });
            }
            let mut rec = Vec::with_capacity(m);
            for (j, token) in row.into_iter().enumerate() {
                let next = domains[j].len();
                let idx = *lookup[j].entry(token.clone()).or_insert_with(|| {
                    domains[j].push(token);
                    next
                });
                rec.push(idx);
            }
            records.push(rec);
        }
        Ok(Self {
            attribute_names,
            domains,
            records,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn m(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn domain(&self, attribute: usize) -> &[String] {
        &self.domains[attribute]
    }

    /// Value indices of record `i`, one per attribute.
    pub fn record(&self, i: usize) -> &[usize] {
        &self.records[i]
    }

    pub fn records(&self) -> &[Vec<usize>] {
        &self.records
    }

    pub fn token(&self, i: usize, attribute: usize) -> &str {
        &self.domains[attribute][self.records[i][attribute]]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn value_index(&self, attribute: usize, token: &str) -> Option<usize> {
        self.domains[attribute].iter().position(|t| t == token)
    }

    /// Per-attribute occurrence counts, aligned with [`Cad::domains`].
    pub fn value_counts(&self) -> Vec<Vec<usize>> {
        let mut counts: Vec<Vec<usize>> = self.domains.iter().map(|d| vec![0; d.len()]).collect();
        for rec in &self.records {
            for (j, &l) in rec.iter().enumerate() {
                counts[j][l] += 1;
            }
        }
        counts
    }

    pub fn to_token_rows(&self) -> Vec<Vec<String>> {
        (0..self.n())
            .map(|i| {
                (0..self.m())
                    .map(|j| self.token(i, j).to_string())
                    .collect()
            })
            .collect()
    }

    /// Writes a header row followed by the records; the label, when present, is the last column
    /// and is named `label_column`.
    pub fn write_csv<W: Write>(&self, writer: W, label_column: &str) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.attribute_names.iter().map(String::as_str).collect();
        if self.labels.is_some() {
            header.push(label_column);
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<&str> = (0..self.m()).map(|j| self.token(i, j)).collect();
            if let Some(labels) = &self.labels {
                row.push(&labels[i]);
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reference to a column, by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    pub fn parse(text: &str) -> Self {
        match text.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(text.trim().to_string()),
        }
    }

    /// Name lookup wins over position so numeric column names still resolve.
    fn resolve(&self, header: &[String]) -> Option<usize> {
        match self {
            ColumnRef::Name(name) => header.iter().position(|h| h == name),
            ColumnRef::Index(i) => {
                let as_name = i.to_string();
                header
                    .iter()
                    .position(|h| *h == as_name)
                    .or_else(|| (*i < header.len()).then_some(*i))
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            ColumnRef::Name(n) => n.clone(),
            ColumnRef::Index(i) => format!("#{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Feature,
    Label,
    Drop,
}

/// Describes where a dataset comes from and how its columns are used.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub source_url: String,
    /// Lowercase hex SHA-256 of the raw file, when pinned.
    pub checksum: Option<String>,
    pub file_name: String,
    pub has_header: bool,
    /// Column names for header-less files.
    pub columns: Vec<String>,
    pub label_column: Option<ColumnRef>,
    pub drop_columns: Vec<ColumnRef>,
    pub missing_token: String,
    pub discretize: Vec<(ColumnRef, usize)>,
    pub notes: String,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            name: "dataset".into(),
            source_url: String::new(),
            checksum: None,
            file_name: "data.csv".into(),
            has_header: true,
            columns: Vec::new(),
            label_column: None,
            drop_columns: Vec::new(),
            missing_token: "?".into(),
            discretize: Vec::new(),
            notes: String::new(),
        }
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let kv = KeyValues::parse(text)?;
        const KNOWN: &[&str] = &[
            "name",
            "source_url",
            "checksum",
            "file_name",
            "has_header",
            "columns",
            "label_column",
            "drop_columns",
            "missing_token",
            "discretize",
            "notes",
        ];
        if let Some(bad) = kv.keys().find(|k| !KNOWN.contains(k)) {
            return Err(DatasetError::Manifest(format!("unknown key `{bad}`")));
        }
        let mut m = DatasetManifest::default();
        if let Some(v) = kv.get("name") {
            m.name = v.to_string();
        }
        if let Some(v) = kv.get("source_url") {
            m.source_url = v.to_string();
        }
        m.checksum = kv
            .get("checksum")
            .filter(|v| !v.is_empty())
            .map(str::to_ascii_lowercase);
        if let Some(v) = kv.get("file_name") {
            m.file_name = v.to_string();
        } else if let Some(last) = m.source_url.rsplit('/').next().filter(|s| !s.is_empty()) {
            m.file_name = last.to_string();
        }
        if let Some(v) = kv.get("has_header") {
            m.has_header = match v {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                other => {
                    return Err(DatasetError::Manifest(format!(
                        "has_header: expected true/false, found `{other}`"
                    )))
                }
            };
        }
        if let Some(v) = kv.get("columns") {
            m.columns = split_list(v);
        }
        m.label_column = kv
            .get("label_column")
            .filter(|v| !v.is_empty())
            .map(ColumnRef::parse);
        if let Some(v) = kv.get("drop_columns") {
            m.drop_columns = split_list(v).iter().map(|s| ColumnRef::parse(s)).collect();
        }
        if let Some(v) = kv.get("missing_token") {
            m.missing_token = v.to_string();
        }
        if let Some(v) = kv.get("discretize") {
            for item in split_list(v) {
                let (col, bins) = item.rsplit_once(':').ok_or_else(|| {
                    DatasetError::Manifest(format!("discretize entry `{item}` must be column:bins"))
                })?;
                let bins: usize = bins
                    .trim()
                    .parse()
                    .map_err(|_| DatasetError::Manifest(format!("bad bin count in `{item}`")))?;
                m.discretize.push((ColumnRef::parse(col), bins));
            }
        }
        if let Some(v) = kv.get("notes") {
            m.notes = v.to_string();
        }
        if !m.has_header && m.columns.is_empty() {
            return Err(DatasetError::Manifest(
                "header-less files need a `columns` list".into(),
            ));
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let refs = |v: &[ColumnRef]| {
            v.iter()
                .map(|c| match c {
                    ColumnRef::Name(n) => n.clone(),
                    ColumnRef::Index(i) => i.to_string(),
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut kv = KeyValues::default();
        kv.insert("name", &self.name);
        kv.insert("source_url", &self.source_url);
        kv.insert("checksum", self.checksum.clone().unwrap_or_default());
        kv.insert("file_name", &self.file_name);
        kv.insert("has_header", self.has_header.to_string());
        kv.insert("columns", self.columns.join(","));
        kv.insert(
            "label_column",
            self.label_column
                .as_ref()
                .map(|c| refs(std::slice::from_ref(c)))
                .unwrap_or_default(),
        );
        kv.insert("drop_columns", refs(&self.drop_columns));
        kv.insert("missing_token", &self.missing_token);
        kv.insert(
            "discretize",
            self.discretize
                .iter()
                .map(|(c, b)| format!("{}:{b}", refs(std::slice::from_ref(c))))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.insert("notes", &self.notes);
        kv.to_string()
    }

    /// Assigns a role to every column of `header`.
    pub fn column_roles(&self, header: &[String]) -> Result<Vec<ColumnRole>, DatasetError> {
        let mut roles = vec![ColumnRole::Feature; header.len()];
        for c in &self.drop_columns {
            let idx = c
                .resolve(header)
                .ok_or_else(|| DatasetError::UnknownColumn(c.describe()))?;
            roles[idx] = ColumnRole::Drop;
        }
        if let Some(label) = &self.label_column {
            let idx = label
                .resolve(header)
                .ok_or_else(|| DatasetError::MissingLabelColumn(label.describe()))?;
            if roles[idx] != ColumnRole::Feature {
                return Err(DatasetError::ConflictingRoles(header[idx].clone()));
            }
            roles[idx] = ColumnRole::Label;
        }
        Ok(roles)
    }
}

pub fn load_csv(path: &Path, manifest: &DatasetManifest) -> Result<Cad, DatasetError> {
    let file = File::open(path)?;
    read_csv(file, manifest)
}

/// Parses RFC-4180 text according to `manifest`. Missing tokens are kept as-is;
/// run [`impute_modes`] afterwards to replace them.
pub fn read_csv<R: Read>(reader: R, manifest: &DatasetManifest) -> Result<Cad, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(manifest.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Vec<String> = if manifest.has_header {
        rdr.headers()?.iter().map(String::from).collect()
    } else {
        manifest.columns.clone()
    };
    let width = header.len();
    let roles = manifest.column_roles(&header)?;

    let mut columns: Vec<Vec<String>> = vec![Vec::new(); width];
    for result in rdr.records() {
        let record = result?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(DatasetError::Ragged {
                row,
                expected: width,
                found: record.len(),
            });
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }
    if columns.first().map_or(true, Vec::is_empty) {
        return Err(DatasetError::Empty);
    }

    for (col_ref, bins) in &manifest.discretize {
        let idx = col_ref
            .resolve(&header)
            .ok_or_else(|| DatasetError::UnknownColumn(col_ref.describe()))?;
        columns[idx] =
            discretize_tokens(&header[idx], &columns[idx], *bins, &manifest.missing_token)?;
    }

    let n = columns[0].len();
    let mut names = Vec::new();
    let mut feature_cols = Vec::new();
    let mut labels = None;
    for (idx, role) in roles.iter().enumerate() {
        match role {
            ColumnRole::Feature => {
                names.push(header[idx].clone());
                feature_cols.push(idx);
            }
            ColumnRole::Label => labels = Some(columns[idx].clone()),
            ColumnRole::Drop => {}
        }
    }
    let rows = (0..n)
        .map(|i| {
            feature_cols
                .iter()
                .map(|&c| columns[c][i].clone())
                .collect()
        })
        .collect();
    Cad::from_token_rows(names, rows, labels)
}

fn discretize_tokens(
    name: &str,
    column: &[String],
    bins: usize,
    missing: &str,
) -> Result<Vec<String>, DatasetError> {
    let mut values = Vec::new();
    for token in column.iter().filter(|t| t.as_str() != missing) {
        let v: f64 = token.parse().map_err(|_| DatasetError::NotNumeric {
            column: name.to_string(),
            value: token.clone(),
        })?;
        if !v.is_finite() {
            return Err(DatasetError::NotNumeric {
                column: name.to_string(),
                value: token.clone(),
            });
        }
        values.push(v);
    }
    let mut binned = discretize_numeric(&values, bins)?.into_iter();
    Ok(column
        .iter()
        .map(|t| {
            if t == missing {
                t.clone()
            } else {
                binned.next().expect("one bin per numeric value")
            }
        })
        .collect())
}

/// Replaces `missing_token` with the attribute mode. Ties go to the value seen first.
pub fn impute_modes(cad: &Cad, missing_token: &str) -> Result<Cad, DatasetError> {
    let counts = cad.value_counts();
    let mut replacement: Vec<Option<usize>> = Vec::with_capacity(cad.m());
    for (j, attr_counts) in counts.iter().enumerate() {
        let missing = cad.value_index(j, missing_token);
        if missing.is_none() {
            replacement.push(None);
            continue;
        }
        let mut best: Option<(usize, usize)> = None;
        // domain order is first-appearance order, so strict `>` keeps the earliest on ties
        for (l, &c) in attr_counts.iter().enumerate() {
            if Some(l) == missing {
                continue;
            }
            if best.map_or(true, |(_, bc)| c > bc) {
                best = Some((l, c));
            }
        }
        let (mode, _) = best.ok_or_else(|| DatasetError::NoMode(cad.attribute_names[j].clone()))?;
        replacement.push(Some(mode));
    }
    if replacement.iter().all(Option::is_none) {
        return Ok(cad.clone());
    }
    let rows = (0..cad.n())
        .map(|i| {
            (0..cad.m())
                .map(|j| {
                    let tok = cad.token(i, j);
                    match replacement[j] {
                        Some(mode) if tok == missing_token => cad.domains[j][mode].clone(),
                        _ => tok.to_string(),
                    }
                })
                .collect()
        })
        .collect();
    Cad::from_token_rows(cad.attribute_names.clone(), rows, cad.labels.clone())
}

/// Equal-width binning over `[min, max]`; the maximum falls in the last bin.
pub fn discretize_numeric(column: &[f64], bins: usize) -> Result<Vec<String>, DatasetError> {
    if bins == 0 {
        return Err(DatasetError::ZeroBins);
    }
    if column.is_empty() {
        return Err(DatasetError::EmptyColumn);
    }
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    Ok(column
        .iter()
        .map(|&x| {
            let bin = if range > 0.0 {
                (((x - min) / range) * bins as f64).floor() as usize
            } else {
                0
            };
            format!("bin_{}", bin.min(bins - 1))
        })
        .collect())
}
