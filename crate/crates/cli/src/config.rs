//! Run configuration: a JSON file, overridden by flags, overridden in turn by
//! `SEMAUG_BACKEND_URL`.

use std::path::{Path, PathBuf};

use semaug::{AugmentationConfig, BackendConfig, BackendKind, RequestTemplate};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("no config file given; pass --config")]
    NoConfig,
    #[error("input paths do not exist: {}", list(.0))]
    MissingPaths(Vec<PathBuf>),
    #[error("no output directory; set `out_dir` or pass --out")]
    MissingOutDir,
    #[error("no ratio; set `ratio` or pass --ratio")]
    MissingRatio,
    #[error("{0}")]
    Invalid(String),
}

fn list(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dataset: PathBuf,
    embeddings: PathBuf,
    out_dir: Option<PathBuf>,
    images_dir: Option<PathBuf>,
    ratio: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    augmentation: AugmentationConfig,
    #[serde(default)]
    backend: BackendConfig,
    #[serde(default)]
    request: RequestTemplate,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub backend: Option<BackendKind>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub embeddings: PathBuf,
    pub out_dir: PathBuf,
    /// Root of the original images; when set, manifests are checked against it.
    pub images_dir: Option<PathBuf>,
    pub ratio: f64,
    pub seed: u64,
    pub augmentation: AugmentationConfig,
    pub backend: BackendConfig,
    pub request: RequestTemplate,
}

impl RunConfig {
    /// Reads `path` and applies overrides. Relative paths in the file resolve
    /// against the file's directory; `--out` resolves against the working
    /// directory.
    pub fn load(
        path: &Path,
        overrides: &Overrides,
        backend_url: Option<String>,
    ) -> Result<Self, ConfigError> {
        let raw = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ConfigFile = serde_json::from_slice(&raw).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let mut backend = file.backend;
        if let Some(kind) = overrides.backend {
            backend.kind = kind;
        }
        let backend = backend.with_endpoint_override(backend_url);

        let cfg = RunConfig {
            dataset: resolve(file.dataset),
            embeddings: resolve(file.embeddings),
            out_dir: overrides
                .out
                .clone()
                .or(file.out_dir.map(resolve))
                .ok_or(ConfigError::MissingOutDir)?,
            images_dir: file.images_dir.map(resolve),
            ratio: overrides
                .ratio
                .or(file.ratio)
                .ok_or(ConfigError::MissingRatio)?,
            seed: overrides.seed.unwrap_or(file.seed),
            augmentation: file
                .augmentation
                .validated()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            backend,
            request: file.request,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let mut inputs = vec![&self.dataset, &self.embeddings];
        inputs.extend(self.images_dir.as_ref());
        let missing: Vec<PathBuf> = inputs
            .into_iter()
            .filter(|p| !p.exists())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::MissingPaths(missing));
        }
        if !(self.ratio.is_finite() && self.ratio >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "ratio must be a finite nonnegative number, got {}",
                self.ratio
            )));
        }
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.request
            .request("probe", 0)
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("request template: {e}")))?;
        Ok(())
    }
}
