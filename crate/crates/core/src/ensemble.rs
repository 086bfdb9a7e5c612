//! Stacked generalization: a bank of logistic-regression base learners fit
//! on the training slice, and a logistic meta-learner fit on their predicted
//! probabilities over a separate meta slice.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{labels_of, CorpusSplit, DocumentRecord};
use crate::error::{Error, Result};
use crate::features::{DenseVector, FeatureVec};
use crate::featurize::{FeatureContext, VectorizerBinding, VectorizerKind};
use crate::fingerprint::Fingerprinter;
use crate::float::{sigmoid, Float};
use crate::linear::{fit_lr, ClassWeight, FittedLinearModel, LrConfig};

pub const ENSEMBLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BaseLearnerSpec<F: Float> {
    pub vectorizer: VectorizerKind,
    pub class_weight: ClassWeight<F>,
    pub lr_config: LrConfig<F>,
}

impl<F: Float> BaseLearnerSpec<F> {
    pub fn name(&self) -> String {
        format!("{}_w{}", self.vectorizer, self.class_weight)
    }
}

/// Positive:negative weights {1:1, 2:1, 4:1}.
pub fn default_class_weights<F: Float>() -> Vec<ClassWeight<F>> {
    [1.0, 2.0, 4.0]
        .map(|p| ClassWeight::new(F::of(p), F::one()))
        .to_vec()
}

/// C = 1 for sentence vectors, 0.1 for every other family.
pub fn default_penalty<F: Float>(kind: VectorizerKind) -> F {
    match kind {
        VectorizerKind::SentVectors => F::one(),
        _ => F::of(0.1),
    }
}

/// C = 10, weight 1:1.
pub fn default_meta_config<F: Float>() -> LrConfig<F> {
    LrConfig::with_c(F::of(10.0))
}

/// Vectorizer-major cross product with per-family default penalties.
pub fn enumerate_specs<F: Float>(
    vectorizers: &[VectorizerKind],
    class_weights: &[ClassWeight<F>],
) -> Vec<BaseLearnerSpec<F>> {
    vectorizers
        .iter()
        .flat_map(|&v| {
            class_weights.iter().map(move |&w| BaseLearnerSpec {
                vectorizer: v,
                class_weight: w,
                lr_config: LrConfig::with_c(default_penalty(v)).class_weight(w),
            })
        })
        .collect()
}

/// The default 12-learner bank.
pub fn default_bank<F: Float>() -> Vec<BaseLearnerSpec<F>> {
    enumerate_specs(&VectorizerKind::BANK, &default_class_weights())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BaseLearner<F: Float> {
    pub spec: BaseLearnerSpec<F>,
    pub binding: VectorizerBinding,
    pub model: FittedLinearModel<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMetadata {
    pub split_seed: u64,
    /// Sentence-vector learners averaged embedding table 2 instead of a sidecar.
    pub sentence_fallback: bool,
    pub train_ids: String,
    pub meta_ids: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnsembleModel<F: Float> {
    /// Order fixes the meta-feature positions.
    pub base: Vec<BaseLearner<F>>,
    pub meta: FittedLinearModel<F>,
    pub metadata: EnsembleMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct EnsembleDocument<F: Float> {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    model: EnsembleModel<F>,
}

fn ids_fingerprint(records: &[DocumentRecord]) -> String {
    let mut h = Fingerprinter::new();
    for r in records {
        h.bytes(r.id.as_bytes());
    }
    h.finish()
}

/// Keeps meta features strictly inside (0, 1) where the sigmoid saturates.
fn open_unit<F: Float>(p: F) -> F {
    p.max(F::epsilon()).min(F::one() - F::epsilon())
}

fn kinds<'a>(kinds: impl Iterator<Item = &'a VectorizerKind>) -> Vec<VectorizerKind> {
    let mut v: Vec<VectorizerKind> = kinds.copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn vectorize_kinds<F: Float>(
    ctx: &FeatureContext<F>,
    kinds: &[VectorizerKind],
    records: &[DocumentRecord],
) -> Result<BTreeMap<VectorizerKind, Vec<FeatureVec<F>>>> {
    kinds
        .iter()
        .map(|&k| ctx.vectorize_all(k, records).map(|x| (k, x)))
        .collect()
}

/// Fits the bank on `split.train` and the meta-learner on `split.meta_train`.
/// `ctx` must carry a vocabulary fit on `split.train` alone.
pub fn fit_ensemble<F: Float>(
    split: &CorpusSplit,
    specs: &[BaseLearnerSpec<F>],
    meta_config: &LrConfig<F>,
    ctx: &FeatureContext<F>,
) -> Result<EnsembleModel<F>> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "ensemble needs at least one base learner".into(),
        ));
    }
    if split.train.is_empty() || split.meta_train.is_empty() {
        return Err(Error::InvalidData(
            "ensemble needs non-empty train and meta-train slices".into(),
        ));
    }
    split.check_disjoint()?;
    if let Some(v) = ctx.vocabulary() {
        if v.n_docs() != split.train.len() {
            return Err(Error::InvalidData(format!(
                "vocabulary was fit on {} documents, train slice has {}",
                v.n_docs(),
                split.train.len()
            )));
        }
    }
    meta_config.validate()?;

    let needed = kinds(specs.iter().map(|s| &s.vectorizer));
    let bindings: BTreeMap<VectorizerKind, VectorizerBinding> = needed
        .iter()
        .map(|&k| ctx.binding(k).map(|b| (k, b)))
        .collect::<Result<_>>()?;
    let train_y = labels_of(&split.train)?;
    let train_x = vectorize_kinds(ctx, &needed, &split.train)?;

    let base = specs
        .par_iter()
        .map(|spec| {
            let binding = bindings[&spec.vectorizer].clone();
            let model = fit_lr(
                &train_x[&spec.vectorizer],
                &train_y,
                &spec.lr_config,
                split.seed,
            )
            .map_err(|e| e.context(format!("base learner {}", spec.name())))?
            .bound_to(binding.feature_space_id());
            Ok(BaseLearner {
                spec: *spec,
                binding,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut model = EnsembleModel {
        meta: FittedLinearModel {
            weights: Vec::new(),
            bias: F::zero(),
            config: *meta_config,
            feature_space_id: String::new(),
            training_fingerprint: String::new(),
            seed: split.seed,
            iterations: 0,
            converged: false,
            final_loss: F::zero(),
        },
        base,
        metadata: EnsembleMetadata {
            split_seed: split.seed,
            sentence_fallback: bindings.values().any(|b| b.fallback),
            train_ids: ids_fingerprint(&split.train),
            meta_ids: ids_fingerprint(&split.meta_train),
        },
    };
    let meta_x = model.meta_features(&split.meta_train, ctx)?;
    let meta_y = labels_of(&split.meta_train)?;
    model.meta = fit_lr(&meta_x, &meta_y, meta_config, split.seed)
        .map_err(|e| e.context("meta-learner"))?
        .bound_to(format!("meta:{}", model.base.len()));
    Ok(model)
}

impl<F: Float> EnsembleModel<F> {
    pub fn learner_names(&self) -> Vec<String> {
        self.base.iter().map(|b| b.spec.name()).collect()
    }

    pub fn check_context(&self, ctx: &FeatureContext<F>) -> Result<()> {
        for b in &self.base {
            ctx.check_binding(&b.binding)
                .map_err(|e| e.context(format!("base learner {}", b.spec.name())))?;
        }
        Ok(())
    }

    /// Base-learner probabilities per record, in base order, clamped into (0, 1).
    pub fn meta_features(
        &self,
        records: &[DocumentRecord],
        ctx: &FeatureContext<F>,
    ) -> Result<Vec<DenseVector<F>>> {
        self.check_context(ctx)?;
        let needed = kinds(self.base.iter().map(|b| &b.spec.vectorizer));
        let xs = vectorize_kinds(ctx, &needed, records)?;
        let per_learner: Vec<Vec<F>> = self
            .base
            .iter()
            .map(|b| b.model.predict_proba_batch(&xs[&b.spec.vectorizer]))
            .collect::<Result<_>>()?;
        Ok((0..records.len())
            .map(|i| DenseVector::new(per_learner.iter().map(|p| open_unit(p[i])).collect()))
            .collect())
    }

    pub fn predict_proba_batch(
        &self,
        records: &[DocumentRecord],
        ctx: &FeatureContext<F>,
    ) -> Result<Vec<F>> {
        let meta_x = self.meta_features(records, ctx)?;
        self.meta.predict_proba_batch(&meta_x)
    }

    pub fn predict_proba(&self, record: &DocumentRecord, ctx: &FeatureContext<F>) -> Result<F> {
        Ok(self.predict_proba_batch(std::slice::from_ref(record), ctx)?[0])
    }

    /// Meta probability from already computed base probabilities.
    pub fn combine(&self, base_probabilities: &[F]) -> Result<F> {
        if base_probabilities.len() != self.base.len() {
            return Err(Error::DimensionMismatch {
                expected: self.base.len(),
                found: base_probabilities.len(),
            });
        }
        let z = self
            .meta
            .weights
            .iter()
            .zip(base_probabilities)
            .fold(self.meta.bias, |acc, (&w, &p)| acc + w * open_unit(p));
        Ok(sigmoid(z))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = EnsembleDocument {
            schema_version: ENSEMBLE_SCHEMA_VERSION,
            kind: "ensemble".to_string(),
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: EnsembleDocument<F> = serde_json::from_str(json)?;
        if doc.kind != "ensemble" || doc.schema_version != ENSEMBLE_SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "expected ensemble schema {ENSEMBLE_SCHEMA_VERSION}, found {} schema {}",
                doc.kind, doc.schema_version
            )));
        }
        if doc.model.meta.weights.len() != doc.model.base.len() {
            return Err(Error::InvalidData(format!(
                "meta-learner has {} weights for {} base learners",
                doc.model.meta.weights.len(),
                doc.model.base.len()
            )));
        }
        Ok(doc.model)
    }
}
