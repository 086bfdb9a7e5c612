//! Turns records into feature vectors for each vectorizer family, and
//! records which feature space a model was trained in.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::embeddings::{average_embedding, DocumentVectors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::features::FeatureVec;
use crate::float::Float;
use crate::textprep::{PrepConfig, Preprocessor, TokenSeq};
use crate::vectorize::{bow_vector, fit_vocabulary, tfidf_vector, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorizerKind {
    Bow,
    Tfidf,
    W2vTable1,
    W2vTable2,
    SentVectors,
}

impl VectorizerKind {
    /// The four families of the stacking bank, in bank order.
    pub const BANK: [VectorizerKind; 4] = [
        VectorizerKind::Tfidf,
        VectorizerKind::W2vTable1,
        VectorizerKind::W2vTable2,
        VectorizerKind::SentVectors,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VectorizerKind::Bow => "bow",
            VectorizerKind::Tfidf => "tfidf",
            VectorizerKind::W2vTable1 => "w2v_table_1",
            VectorizerKind::W2vTable2 => "w2v_table_2",
            VectorizerKind::SentVectors => "sent_vectors",
        }
    }

    pub fn uses_vocabulary(&self) -> bool {
        matches!(self, VectorizerKind::Bow | VectorizerKind::Tfidf)
    }
}

impl fmt::Display for VectorizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VectorizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            VectorizerKind::Bow,
            VectorizerKind::Tfidf,
            VectorizerKind::W2vTable1,
            VectorizerKind::W2vTable2,
            VectorizerKind::SentVectors,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown vectorizer `{s}`")))
    }
}

/// The feature space a model's weights are indexed by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorizerBinding {
    pub kind: VectorizerKind,
    /// Vocabulary or embedding-table fingerprint; for sentence vectors the
    /// sidecar dimension.
    pub fingerprint: String,
    pub dim: usize,
    /// Sentence vectors were replaced by averaging over embedding table 2.
    #[serde(default)]
    pub fallback: bool,
}

impl VectorizerBinding {
    pub fn feature_space_id(&self) -> String {
        format!("{}:{}", self.kind, self.fingerprint)
    }
}

/// External vector sources; any may be absent when unused.
#[derive(Debug, Clone, Default)]
pub struct Resources<F: Float> {
    pub table1: Option<EmbeddingTable<F>>,
    pub table2: Option<EmbeddingTable<F>>,
    pub sentence_vectors: Option<DocumentVectors<F>>,
}

/// Preprocessing, the frozen vocabulary and the external vector sources.
#[derive(Debug, Clone)]
pub struct FeatureContext<F: Float> {
    preprocessor: Preprocessor,
    vocabulary: Option<Vocabulary>,
    resources: Resources<F>,
}

impl<F: Float> FeatureContext<F> {
    pub fn new(
        prep: PrepConfig,
        vocabulary: Option<Vocabulary>,
        resources: Resources<F>,
    ) -> Result<Self> {
        Ok(FeatureContext {
            preprocessor: Preprocessor::new(prep)?,
            vocabulary,
            resources,
        })
    }

    /// Builds the context with a vocabulary fit on `train` only.
    pub fn fit(
        prep: PrepConfig,
        resources: Resources<F>,
        train: &[DocumentRecord],
    ) -> Result<Self> {
        let mut ctx = FeatureContext::new(prep, None, resources)?;
        let tokens: Vec<TokenSeq> = train.par_iter().map(|r| ctx.tokens(r)).collect();
        ctx.vocabulary =
            Some(fit_vocabulary(&tokens).map_err(|e| e.context("fitting vocabulary"))?);
        Ok(ctx)
    }

    pub fn prep(&self) -> &PrepConfig {
        self.preprocessor.config()
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocabulary.as_ref()
    }

    pub fn resources(&self) -> &Resources<F> {
        &self.resources
    }

    pub fn tokens(&self, record: &DocumentRecord) -> TokenSeq {
        self.preprocessor.preprocess(&record.text())
    }

    fn vocab(&self) -> Result<&Vocabulary> {
        self.vocabulary
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no vocabulary available".into()))
    }

    fn table(&self, kind: VectorizerKind) -> Result<&EmbeddingTable<F>> {
        let (table, which) = match kind {
            VectorizerKind::W2vTable1 => (&self.resources.table1, 1),
            _ => (&self.resources.table2, 2),
        };
        table.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("embedding table {which} is not configured"))
        })
    }

    /// Sentence vectors come from the sidecar when one is loaded.
    fn sentence_fallback(&self) -> bool {
        self.resources.sentence_vectors.is_none()
    }

    /// Binding of `kind` as this context would produce it.
    pub fn binding(&self, kind: VectorizerKind) -> Result<VectorizerBinding> {
        let (fingerprint, dim, fallback) = match kind {
            VectorizerKind::Bow | VectorizerKind::Tfidf => {
                let v = self.vocab()?;
                (v.fingerprint(), v.len(), false)
            }
            VectorizerKind::W2vTable1 | VectorizerKind::W2vTable2 => {
                let t = self.table(kind)?;
                (t.fingerprint(), t.dim(), false)
            }
            VectorizerKind::SentVectors => match &self.resources.sentence_vectors {
                Some(s) => (format!("sidecar-{}", s.dim()), s.dim(), false),
                None => {
                    let t = self.table(VectorizerKind::W2vTable2).map_err(|_| {
                        Error::InvalidConfig(
                            "sentence vectors need a sidecar file or embedding table 2".into(),
                        )
                    })?;
                    (t.fingerprint(), t.dim(), true)
                }
            },
        };
        Ok(VectorizerBinding {
            kind,
            fingerprint,
            dim,
            fallback,
        })
    }

    /// Fails unless this context reproduces the feature space of `binding`.
    pub fn check_binding(&self, binding: &VectorizerBinding) -> Result<()> {
        let here = self
            .binding(binding.kind)
            .map_err(|e| Error::FeatureSpace(format!("{}: {e}", binding.kind)))?;
        if &here != binding {
            return Err(Error::FeatureSpace(format!(
                "model expects {} (dim {}{}), inputs provide {} (dim {}{})",
                binding.feature_space_id(),
                binding.dim,
                if binding.fallback { ", fallback" } else { "" },
                here.feature_space_id(),
                here.dim,
                if here.fallback { ", fallback" } else { "" },
            )));
        }
        Ok(())
    }

    pub fn vectorize(
        &self,
        kind: VectorizerKind,
        record: &DocumentRecord,
    ) -> Result<FeatureVec<F>> {
        if kind == VectorizerKind::SentVectors && !self.sentence_fallback() {
            let sidecar = self
                .resources
                .sentence_vectors
                .as_ref()
                .expect("checked above");
            return sidecar
                .get(&record.id)
                .cloned()
                .map(FeatureVec::Dense)
                .ok_or_else(|| {
                    Error::InvalidData(format!("no sentence vector for record {}", record.id))
                });
        }
        let tokens = self.tokens(record);
        Ok(match kind {
            VectorizerKind::Bow => bow_vector(&tokens, self.vocab()?).into(),
            VectorizerKind::Tfidf => tfidf_vector(&tokens, self.vocab()?).into(),
            VectorizerKind::W2vTable1 | VectorizerKind::W2vTable2 | VectorizerKind::SentVectors => {
                let table = self.table(kind)?;
                average_embedding(&tokens, table).vector.into()
            }
        })
    }

    pub fn vectorize_all(
        &self,
        kind: VectorizerKind,
        records: &[DocumentRecord],
    ) -> Result<Vec<FeatureVec<F>>> {
        records
            .par_iter()
            .map(|r| self.vectorize(kind, r))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.context(format!("vectorizing with {kind}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{DenseVector, FeatureRow};

    fn records() -> Vec<DocumentRecord> {
        vec![
            DocumentRecord::new("a", Some(1), "Liver injury", "hepatotoxicity of drugs"),
            DocumentRecord::new("b", Some(0), "Kidney function", "renal clearance"),
        ]
    }

    fn table(name: &str) -> EmbeddingTable<f64> {
        EmbeddingTable::from_entries(
            name,
            2,
            [
                ("liver".to_string(), vec![1.0, 0.0]),
                ("renal".to_string(), vec![0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn kinds_round_trip_through_names() {
        for k in VectorizerKind::BANK {
            assert_eq!(k.as_str().parse::<VectorizerKind>().unwrap(), k);
        }
        assert!("glove".parse::<VectorizerKind>().is_err());
    }

    #[test]
    fn sentence_fallback_uses_table_two() {
        let res = Resources {
            table1: None,
            table2: Some(table("t2")),
            sentence_vectors: None,
        };
        let ctx = FeatureContext::fit(PrepConfig::default(), res, &records()).unwrap();
        let b = ctx.binding(VectorizerKind::SentVectors).unwrap();
        assert!(b.fallback);
        assert_eq!(b.dim, 2);
        let v = ctx
            .vectorize(VectorizerKind::SentVectors, &records()[0])
            .unwrap();
        assert_eq!(v.value(0), 1.0);
        assert!(ctx.binding(VectorizerKind::W2vTable1).is_err());
    }

    #[test]
    fn sidecar_lookup_and_binding_mismatch() {
        let mut s = DocumentVectors::new(3);
        s.insert("a", DenseVector::new(vec![1.0, 2.0, 3.0]))
            .unwrap();
        let res = Resources {
            table1: Some(table("t1")),
            table2: Some(table("t2")),
            sentence_vectors: Some(s),
        };
        let ctx = FeatureContext::fit(PrepConfig::default(), res, &records()).unwrap();
        let v = ctx
            .vectorize(VectorizerKind::SentVectors, &records()[0])
            .unwrap();
        assert_eq!(v.value(2), 3.0);
        assert!(ctx
            .vectorize(VectorizerKind::SentVectors, &records()[1])
            .is_err());

        let b = ctx.binding(VectorizerKind::SentVectors).unwrap();
        let no_sidecar = FeatureContext::new(
            PrepConfig::default(),
            ctx.vocabulary().cloned(),
            Resources {
                table2: Some(table("t2")),
                ..Resources::default()
            },
        )
        .unwrap();
        assert!(matches!(
            no_sidecar.check_binding(&b),
            Err(Error::FeatureSpace(_))
        ));
        ctx.check_binding(&ctx.binding(VectorizerKind::Tfidf).unwrap())
            .unwrap();
    }
}
