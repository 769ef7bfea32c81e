//! Download-once dataset cache with SHA-256 verification.
//!
//! A pinned manifest checksum is authoritative. Without one, the digest of
//! the first download is stored in a `.sha256` sidecar and every later use
//! is checked against it.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use neca_core::DatasetManifest;
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "NECA_CACHE_DIR";
const DEFAULT_CACHE: &str = ".neca-cache";
const ATTEMPTS: u32 = 3;
const MAX_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug)]
pub enum FetchError {
    /// Transient; the same call may succeed later.
    Network {
        url: String,
        message: String,
    },
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    NoSource {
        name: String,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl FetchError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, FetchError::Network { .. })
    }
}

impl std::fmt::Display for FetchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FetchError::Network { url, message } => {
                write!(f, "download of {url} failed (retriable): {message}")
            }
            FetchError::ChecksumMismatch {
                path,
                expected,
                actual,
            } => write!(
                f,
                "checksum mismatch for {}: expected sha256 {expected}, found {actual}",
                path.display()
            ),
            FetchError::NoSource { name } => write!(f, "manifest `{name}` has no source_url"),
            FetchError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for FetchError {}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, FetchError> {
    let bytes = fs::read(path).map_err(|source| FetchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

/// `NECA_CACHE_DIR` when set, otherwise `.neca-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE))
}

#[derive(Debug, Clone)]
pub struct Fetcher {
    pub cache_dir: PathBuf,
    /// Directory searched for `<file_name>` or `<name>/<file_name>` before the network.
    pub mirror_dir: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Fetcher {
    pub fn new(cache_dir: PathBuf, mirror_dir: Option<PathBuf>) -> Self {
        Self {
            cache_dir,
            mirror_dir,
        }
    }

    pub fn cached_path(&self, manifest: &DatasetManifest) -> PathBuf {
        self.cache_dir
            .join(&manifest.name)
            .join(&manifest.file_name)
    }

    fn sidecar(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".sha256");
        PathBuf::from(s)
    }

    /// Verifies `path` against the pinned digest or its sidecar, writing the sidecar if absent.
    fn verify(&self, path: &Path, manifest: &DatasetManifest) -> Result<String, FetchError> {
        let actual = sha256_file(path)?;
        let sidecar = Self::sidecar(path);
        let expected = match &manifest.checksum {
            Some(pinned) => Some(pinned.clone()),
            None => match fs::read_to_string(&sidecar) {
                Ok(text) => Some(text.trim().to_string()),
                Err(_) => None,
            },
        };
        match expected {
            Some(exp) if exp != actual => Err(FetchError::ChecksumMismatch {
                path: path.to_path_buf(),
                expected: exp,
                actual,
            }),
            Some(_) => Ok(actual),
            None => {
                fs::write(&sidecar, format!("{actual}\n")).map_err(io_err(&sidecar))?;
                Ok(actual)
            }
        }
    }

    fn mirror_source(&self, manifest: &DatasetManifest) -> Option<PathBuf> {
        let dir = self.mirror_dir.as_ref()?;
        [
            dir.join(&manifest.file_name),
            dir.join(&manifest.name).join(&manifest.file_name),
        ]
        .into_iter()
        .find(|p| p.is_file())
    }

    fn store(
        &self,
        target: &Path,
        bytes: &[u8],
        manifest: &DatasetManifest,
    ) -> Result<(), FetchError> {
        if let Some(pinned) = &manifest.checksum {
            let actual = sha256_hex(bytes);
            if &actual != pinned {
                return Err(FetchError::ChecksumMismatch {
                    path: target.to_path_buf(),
                    expected: pinned.clone(),
                    actual,
                });
            }
        }
        let parent = target.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let tmp = target.with_extension("partial");
        fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, target).map_err(io_err(target))?;
        let sidecar = Self::sidecar(target);
        fs::write(&sidecar, format!("{}\n", sha256_hex(bytes))).map_err(io_err(&sidecar))
    }

    /// Local path of a verified copy, downloading or copying from the mirror on a cache miss.
    pub fn fetch(&self, manifest: &DatasetManifest) -> Result<PathBuf, FetchError> {
        let target = self.cached_path(manifest);
        if target.is_file() {
            self.verify(&target, manifest)?;
            return Ok(target);
        }
        let bytes = match self.mirror_source(manifest) {
            Some(src) => fs::read(&src).map_err(io_err(&src))?,
            None => {
                if manifest.source_url.is_empty() {
                    return Err(FetchError::NoSource {
                        name: manifest.name.clone(),
                    });
                }
                download(&manifest.source_url)?
            }
        };
        self.store(&target, &bytes, manifest)?;
        Ok(target)
    }
}

fn download_once(url: &str) -> Result<Vec<u8>, String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into();
    let mut response = agent.get(url).call().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    response
        .body_mut()
        .as_reader()
        .take(MAX_BYTES)
        .read_to_end(&mut bytes)
        .map_err(|e| e.to_string())?;
    Ok(bytes)
}

fn download(url: &str) -> Result<Vec<u8>, FetchError> {
    let mut last = String::new();
    for attempt in 0..ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(200 << attempt));
        }
        match download_once(url) {
            Ok(bytes) => return Ok(bytes),
            Err(e) => last = e,
        }
    }
    Err(FetchError::Network {
        url: url.to_string(),
        message: format!("{last} (after {ATTEMPTS} attempts)"),
    })
}
