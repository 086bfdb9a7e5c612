//! Self-describing model files and atomic output staging.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dilifilter_core::ensemble::EnsembleModel;
use dilifilter_core::featurize::VectorizerBinding;
use dilifilter_core::forest::FittedForest;
use dilifilter_core::linear::FittedLinearModel;
use dilifilter_core::vectorize::Vocabulary;
use dilifilter_core::PrepConfig;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::exit::DataError;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFileKind {
    Single,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub fit: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Lr(FittedLinearModel<f64>),
    Rf(FittedForest<f64>),
    Ensemble(EnsembleModel<f64>),
}

/// Everything needed to rebuild the feature space and score new records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: ModelFileKind,
    pub config_fingerprint: String,
    pub seeds: Seeds,
    /// The training configuration, output directory cleared.
    pub config: PipelineConfig,
    pub prep: PrepConfig,
    /// Present when some feature family is indexed by the vocabulary.
    pub vocabulary: Option<Vocabulary>,
    pub bindings: Vec<VectorizerBinding>,
    pub threshold: f64,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let read = || -> anyhow::Result<Self> {
            let text = fs::read_to_string(path)?;
            let head: serde_json::Value = serde_json::from_str(&text)?;
            let version = head.get("schema_version").and_then(|v| v.as_u64());
            if version != Some(u64::from(MODEL_SCHEMA_VERSION)) {
                bail!("unsupported model schema {version:?}, expected {MODEL_SCHEMA_VERSION}");
            }
            Ok(serde_json::from_value(head)?)
        };
        read()
            .with_context(|| format!("loading model {}", path.display()))
            .map_err(DataError::wrap)
    }

    pub fn to_json(&self) -> anyhow::Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Output files collected in memory and written together once a command
/// has finished, each through a temporary file and a rename.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn add_json<T: Serialize>(
        &mut self,
        path: impl Into<PathBuf>,
        value: &T,
    ) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(path, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> anyhow::Result<()> {
        for (path, bytes) in self.files {
            write_atomic(&path, &bytes)?;
        }
        Ok(())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
