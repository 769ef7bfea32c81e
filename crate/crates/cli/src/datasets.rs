//! Resolving a dataset argument to an imputed CAD.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::Args;
use neca_core::dataset::{impute_modes, load_csv, ColumnRef};
use neca_core::{Cad, DatasetManifest};
use serde::{Deserialize, Serialize};

use crate::fetch::{default_cache_dir, sha256_file, Fetcher};

const BUNDLED: &[(&str, &str)] = &[
    ("BC", include_str!("../manifests/BC.manifest")),
    ("CE", include_str!("../manifests/CE.manifest")),
    ("DE", include_str!("../manifests/DE.manifest")),
    ("LY", include_str!("../manifests/LY.manifest")),
    ("MA", include_str!("../manifests/MA.manifest")),
    ("MU", include_str!("../manifests/MU.manifest")),
    ("PT", include_str!("../manifests/PT.manifest")),
    ("SB", include_str!("../manifests/SB.manifest")),
    ("SH", include_str!("../manifests/SH.manifest")),
    ("WI", include_str!("../manifests/WI.manifest")),
    ("ZO", include_str!("../manifests/ZO.manifest")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_manifest(name: &str) -> Option<DatasetManifest> {
    BUNDLED
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, text)| DatasetManifest::parse(text).expect("bundled manifests parse"))
}

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// CSV file, or the name of a bundled dataset (BC, CE, DE, LY, MA, MU, PT, SB, SH, WI, ZO).
    #[arg(value_name = "DATASET")]
    pub dataset: Option<String>,
    /// Manifest describing the file's columns; its source is fetched when DATASET is not a file.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Label column (name or zero-based index).
    #[arg(long)]
    pub label: Option<String>,
    /// Columns to drop, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// Missing-value sentinel.
    #[arg(long)]
    pub missing: Option<String>,
    /// Download cache (defaults to $NECA_CACHE_DIR, then ./.neca-cache).
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Local directory searched for dataset files before downloading.
    #[arg(long, value_name = "DIR")]
    pub mirror: Option<PathBuf>,
}

/// Where a dataset came from, with enough detail to load it again identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
    pub manifest: String,
}

pub struct LoadedDataset {
    pub cad: Cad,
    pub source: DatasetSource,
}

impl DatasetArgs {
    pub fn fetcher(&self) -> Fetcher {
        Fetcher::new(
            self.cache_dir.clone().unwrap_or_else(default_cache_dir),
            self.mirror.clone(),
        )
    }

    /// The manifest to use and the local file it applies to.
    pub fn locate(&self) -> Result<(DatasetManifest, PathBuf)> {
        let arg = self
            .dataset
            .as_deref()
            .ok_or_else(|| anyhow!("no dataset given"))?;
        let as_path = Path::new(arg);
        let mut manifest = match &self.manifest {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading manifest {}", p.display()))?;
                DatasetManifest::parse(&text)
                    .with_context(|| format!("parsing manifest {}", p.display()))?
            }
            None if as_path.is_file() => DatasetManifest {
                name: as_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into()),
                file_name: as_path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                ..DatasetManifest::default()
            },
            None => bundled_manifest(arg).ok_or_else(|| {
                anyhow!(
                    "`{arg}` is neither a file nor a bundled dataset ({})",
                    bundled_names().collect::<Vec<_>>().join(", ")
                )
            })?,
        };
        if let Some(l) = &self.label {
            manifest.label_column = Some(ColumnRef::parse(l));
        }
        if !self.drop.is_empty() {
            manifest.drop_columns = self.drop.iter().map(|c| ColumnRef::parse(c)).collect();
        }
        if let Some(m) = &self.missing {
            manifest.missing_token = m.clone();
        }
        let path = if as_path.is_file() {
            as_path.to_path_buf()
        } else {
            self.fetcher()
                .fetch(&manifest)
                .with_context(|| format!("fetching {}", manifest.name))?
        };
        Ok((manifest, path))
    }

    pub fn load(&self) -> Result<LoadedDataset> {
        let (manifest, path) = self.locate()?;
        load_with_manifest(&manifest, &path)
    }
}

/// Loads `path` and replaces missing tokens with column modes.
pub fn load_with_manifest(manifest: &DatasetManifest, path: &Path) -> Result<LoadedDataset> {
    let raw = load_csv(path, manifest).with_context(|| format!("loading {}", path.display()))?;
    let cad = impute_modes(&raw, &manifest.missing_token)
        .with_context(|| format!("imputing {}", path.display()))?;
    let sha256 = sha256_file(path)?;
    Ok(LoadedDataset {
        cad,
        source: DatasetSource {
            name: manifest.name.clone(),
            path: path.to_path_buf(),
            sha256,
            manifest: manifest.to_text(),
        },
    })
}

/// Reloads a recorded source, refusing a file whose contents changed.
pub fn reload(source: &DatasetSource) -> Result<LoadedDataset> {
    let manifest = DatasetManifest::parse(&source.manifest).context("parsing recorded manifest")?;
    let loaded = load_with_manifest(&manifest, &source.path)?;
    if loaded.source.sha256 != source.sha256 {
        anyhow::bail!(
            "{} changed since it was recorded: expected sha256 {}, found {}",
            source.path.display(),
            source.sha256,
            loaded.source.sha256
        );
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_manifests_parse_and_name_themselves() {
        let names: Vec<&str> = bundled_names().collect();
        assert_eq!(names.len(), 11);
        for n in names {
            let m = bundled_manifest(n).unwrap();
            assert_eq!(m.name, n);
            assert!(m.label_column.is_some(), "{n}");
            assert!(
                m.source_url.starts_with("https://archive.ics.uci.edu/"),
                "{n}"
            );
            assert!(!m.has_header);
        }
        assert_eq!(bundled_manifest("zo").unwrap().columns.len(), 18);
        assert_eq!(bundled_manifest("SB").unwrap().columns.len(), 36);
        assert_eq!(bundled_manifest("SH").unwrap().columns.len(), 23);
    }

    #[test]
    fn plain_csv_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "id,a,b,y\n1,x,?,p\n2,x,u,q\n3,z,u,p\n").unwrap();
        let args = DatasetArgs {
            dataset: Some(path.to_string_lossy().into_owned()),
            label: Some("y".into()),
            drop: vec!["id".into()],
            ..DatasetArgs::default()
        };
        let loaded = args.load().unwrap();
        assert_eq!(loaded.cad.m(), 2);
        assert_eq!(loaded.cad.token(0, 1), "u");
        assert_eq!(loaded.source.name, "toy");
        let again = reload(&loaded.source).unwrap();
        assert_eq!(again.cad, loaded.cad);
        std::fs::write(&path, "id,a,b,y\n1,x,u,p\n").unwrap();
        assert!(reload(&loaded.source).is_err());
    }

    #[test]
    fn unknown_name_is_reported() {
        let args = DatasetArgs {
            dataset: Some("NOPE".into()),
            ..DatasetArgs::default()
        };
        let err = args.locate().unwrap_err().to_string();
        assert!(err.contains("bundled dataset"), "{err}");
    }
}
