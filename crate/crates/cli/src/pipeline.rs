//! Shared steps: loading inputs, rebuilding feature spaces, scoring.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use dilifilter_core::corpus::{
    load_corpus, split_corpus, CorpusFormat, CorpusSplit, DocumentRecord,
};
use dilifilter_core::embeddings::{load_document_vectors, load_embedding_table};
use dilifilter_core::features::FeatureRow;
use dilifilter_core::featurize::{FeatureContext, Resources, VectorizerBinding};

use crate::artifact::{ModelFile, TrainedModel};
use crate::config::{PipelineConfig, ResourcePaths};
use crate::exit::DataError;

pub fn read_corpus(path: &Path) -> anyhow::Result<Vec<DocumentRecord>> {
    let records = load_corpus(path, CorpusFormat::from_path(path))
        .with_context(|| format!("loading corpus {}", path.display()))?;
    if records.is_empty() {
        return Err(DataError::wrap(anyhow!(
            "corpus {} has no records",
            path.display()
        )));
    }
    log::info!("loaded {} records from {}", records.len(), path.display());
    Ok(records)
}

pub fn load_resources(paths: &ResourcePaths) -> anyhow::Result<Resources<f64>> {
    let table = |p: &Option<std::path::PathBuf>, name: &str| -> anyhow::Result<_> {
        p.as_ref()
            .map(|p| {
                load_embedding_table(p, name)
                    .with_context(|| format!("loading {name} from {}", p.display()))
            })
            .transpose()
    };
    let sentence_vectors = paths
        .sentence_vectors
        .as_ref()
        .map(|p| {
            load_document_vectors(p)
                .with_context(|| format!("loading sentence vectors from {}", p.display()))
        })
        .transpose()?;
    Ok(Resources {
        table1: table(&paths.table1, "table1")?,
        table2: table(&paths.table2, "table2")?,
        sentence_vectors,
    })
}

pub fn split(config: &PipelineConfig, corpus: &[DocumentRecord]) -> anyhow::Result<CorpusSplit> {
    let s = &config.split;
    split_corpus(corpus, config.fractions(), s.stratified, s.seed).context("splitting corpus")
}

/// Rebuilds the training feature space of `model` over the given resources
/// and checks every binding against it.
pub fn model_context(
    model: &ModelFile,
    resources: Resources<f64>,
) -> anyhow::Result<FeatureContext<f64>> {
    let ctx = FeatureContext::new(model.prep.clone(), model.vocabulary.clone(), resources)?;
    for b in &model.bindings {
        ctx.check_binding(b)?;
    }
    Ok(ctx)
}

/// Single-model binding.
pub fn single_binding(model: &ModelFile) -> anyhow::Result<&VectorizerBinding> {
    match model.bindings.as_slice() {
        [b] => Ok(b),
        other => Err(DataError::wrap(anyhow!(
            "single model file has {} bindings, expected 1",
            other.len()
        ))),
    }
}

/// Probability of the positive class for each record.
pub fn score(
    model: &ModelFile,
    ctx: &FeatureContext<f64>,
    records: &[DocumentRecord],
) -> anyhow::Result<Vec<f64>> {
    let probs = match &model.model {
        TrainedModel::Lr(m) => {
            let x = ctx.vectorize_all(single_binding(model)?.kind, records)?;
            m.predict_proba_batch(&x)?
        }
        TrainedModel::Rf(f) => {
            let x = ctx.vectorize_all(single_binding(model)?.kind, records)?;
            x.iter()
                .map(|row| f.predict_proba(row))
                .collect::<Result<Vec<_>, _>>()?
        }
        TrainedModel::Ensemble(e) => e.predict_proba_batch(records, ctx)?,
    };
    Ok(probs)
}

pub fn dense_columns<X: FeatureRow<f64>>(x: &X) -> Vec<f64> {
    let mut out = vec![0.0; x.dim()];
    x.for_each_nonzero(|j, v| out[j] = v);
    out
}

/// Joins scores to truth labels by id. Every id on either side must match.
pub fn join_by_id(
    predictions: &[(String, f64)],
    truth: &[DocumentRecord],
) -> anyhow::Result<(Vec<String>, Vec<f64>, Vec<u8>)> {
    let labels: BTreeMap<&str, Option<u8>> =
        truth.iter().map(|r| (r.id.as_str(), r.label)).collect();
    let predicted: BTreeMap<&str, f64> = predictions
        .iter()
        .map(|(id, p)| (id.as_str(), *p))
        .collect();
    let missing_truth: Vec<&str> = predicted
        .keys()
        .filter(|id| !labels.contains_key(*id))
        .copied()
        .collect();
    let missing_pred: Vec<&str> = labels
        .keys()
        .filter(|id| !predicted.contains_key(*id))
        .copied()
        .collect();
    if predicted.keys().all(|id| !labels.contains_key(id)) {
        return Err(DataError::wrap(anyhow!(
            "predictions and truth share no ids"
        )));
    }
    if !missing_truth.is_empty() || !missing_pred.is_empty() {
        return Err(DataError::wrap(anyhow!(
            "unmatched ids; without truth: [{}]; without prediction: [{}]",
            missing_truth.join(", "),
            missing_pred.join(", ")
        )));
    }
    let mut ids = Vec::with_capacity(predicted.len());
    let mut scores = Vec::with_capacity(predicted.len());
    let mut y = Vec::with_capacity(predicted.len());
    for (id, p) in predicted {
        let Some(label) = labels[id] else {
            bail!("truth record {id} has no label");
        };
        ids.push(id.to_string());
        scores.push(p);
        y.push(label);
    }
    Ok((ids, scores, y))
}
