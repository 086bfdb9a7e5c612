//! The pipeline configuration document.
//!
//! One JSON file describes an experiment. Every field has a default, so
//! `{}` is a valid configuration; command-line flags are applied on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dilifilter_core::corpus::SplitFractions;
use dilifilter_core::ensemble::{default_bank, default_meta_config, BaseLearnerSpec};
use dilifilter_core::fingerprint::sha256_hex;
use dilifilter_core::forest::RfConfig;
use dilifilter_core::tuning::GridSpec;
use dilifilter_core::{LrConfig, PrepConfig, VectorizerKind};
use serde::{Deserialize, Serialize};

use crate::exit::ConfigError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub prep: PrepConfig,
    /// Feature family of single (non-ensemble) models.
    pub vectorizer: VectorizerKind,
    pub resources: ResourcePaths,
    pub model: ModelSpec,
    pub split: SplitSpec,
    /// Grid for `tune`; a default grid for the model family when absent.
    pub grid: Option<GridSpec<f64>>,
    pub bootstrap: BootstrapSpec,
    /// Not part of the fingerprint.
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            prep: PrepConfig::default(),
            vectorizer: VectorizerKind::Tfidf,
            resources: ResourcePaths::default(),
            model: ModelSpec::Lr(LrConfig::default()),
            split: SplitSpec::default(),
            grid: None,
            bootstrap: BootstrapSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Embedding tables in word2vec text format and the sentence-vector sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    pub table1: Option<PathBuf>,
    pub table2: Option<PathBuf>,
    pub sentence_vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Lr(LrConfig<f64>),
    Rf(RfConfig),
    Ensemble(EnsembleSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Lr(_) => "lr",
            ModelSpec::Rf(_) => "rf",
            ModelSpec::Ensemble(_) => "ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub bank: Vec<BaseLearnerSpec<f64>>,
    pub meta: LrConfig<f64>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            bank: default_bank(),
            meta: default_meta_config(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// 80/0/20 for single models and 60/20/20 for ensembles when absent.
    pub fractions: Option<SplitFractions>,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: None,
            stratified: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSpec {
    pub resamples: usize,
    pub seed: u64,
    pub top_k: usize,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec {
            resamples: dilifilter_core::interpret::DEFAULT_BOOTSTRAPS,
            seed: 0,
            top_k: 10,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading configuration {}", path.display()))
            .map_err(ConfigError::wrap)?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing configuration {}", path.display()))
            .map_err(ConfigError::wrap)?;
        Ok(config)
    }

    pub fn fractions(&self) -> SplitFractions {
        self.split.fractions.unwrap_or(match self.model {
            ModelSpec::Ensemble(_) => SplitFractions::STACKING,
            _ => SplitFractions::HOLDOUT,
        })
    }

    /// Checks values and that every referenced file exists.
    pub fn validate(&self) -> anyhow::Result<()> {
        let check = || -> anyhow::Result<()> {
            if self.schema_version != CONFIG_SCHEMA_VERSION {
                bail!(
                    "configuration schema {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                    self.schema_version
                );
            }
            self.prep.validate()?;
            self.fractions().validate()?;
            match &self.model {
                ModelSpec::Lr(c) => c.validate()?,
                ModelSpec::Rf(c) => c.validate()?,
                ModelSpec::Ensemble(e) => {
                    if e.bank.is_empty() {
                        bail!("ensemble bank is empty");
                    }
                    for s in &e.bank {
                        s.lr_config.validate()?;
                    }
                    e.meta.validate()?;
                    if self.fractions().meta <= 0.0 {
                        bail!("ensemble training needs a positive meta fraction");
                    }
                }
            }
            if let Some(g) = &self.grid {
                g.validate()?;
            }
            if self.bootstrap.resamples == 0 {
                bail!("bootstrap.resamples must be at least 1");
            }
            Ok(())
        };
        check().map_err(ConfigError::wrap)?;
        let r = &self.resources;
        for (name, p) in [
            ("table1", &r.table1),
            ("table2", &r.table2),
            ("sentence_vectors", &r.sentence_vectors),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::wrap(anyhow::anyhow!(
                        "resources.{name}: {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON form without the output directory.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(
            serde_json::to_string(&c)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        c.validate().unwrap();
        assert_eq!(c.fractions(), SplitFractions::HOLDOUT);
    }

    #[test]
    fn partial_model_sections_fill_defaults() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"model": {"kind": "lr", "penalty_strength": 10.0}}"#).unwrap();
        let ModelSpec::Lr(lr) = c.model else { panic!() };
        assert_eq!(lr.penalty_strength, 10.0);
        assert_eq!(lr.max_iterations, LrConfig::<f64>::default().max_iterations);

        let e: PipelineConfig = serde_json::from_str(r#"{"model": {"kind": "ensemble"}}"#).unwrap();
        assert_eq!(e.fractions(), SplitFractions::STACKING);
        let ModelSpec::Ensemble(spec) = &e.model else {
            panic!()
        };
        assert_eq!(spec.bank.len(), 12);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sead": 3}"#).is_err());
    }

    #[test]
    fn fingerprint_ignores_the_output_directory() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.split.seed = 7;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn missing_resource_is_a_config_error() {
        let mut c = PipelineConfig::default();
        c.resources.table1 = Some(PathBuf::from("/nonexistent/table.txt"));
        let err = c.validate().unwrap_err();
        assert_eq!(crate::exit::exit_code(&err), 1);
    }
}
