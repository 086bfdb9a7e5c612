//! Frozen vocabulary plus bag-of-words and TF-IDF document vectors.
//!
//! TF-IDF uses raw counts times the smoothed inverse document frequency
//! `ln((1 + N) / (1 + df)) + 1`, then scales each document to unit
//! Euclidean norm. Terms unseen at fit time are dropped.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::fingerprint::sha256_hex;
use crate::float::Float;
use crate::textprep::TokenSeq;

/// Optional document-frequency pruning. The default keeps every term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabConfig {
    /// Drop terms seen in fewer documents.
    pub min_df: usize,
    /// Drop terms seen in more than this fraction of documents.
    pub max_df_fraction: f64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_df: 1,
            max_df_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(file: VocabularyFile) -> Result<Self> {
        Vocabulary::from_parts(file.terms, file.df, file.n_docs)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            terms: v.terms,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its serialized columns, checking invariants.
    pub fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Result<Self> {
        if terms.len() != df.len() {
            return Err(Error::InvalidData(format!(
                "vocabulary has {} terms but {} document frequencies",
                terms.len(),
                df.len()
            )));
        }
        if let Some((t, d)) = terms.iter().zip(&df).find(|(_, &d)| d == 0 || d > n_docs) {
            return Err(Error::InvalidData(format!(
                "document frequency {d} of `{t}` outside 1..={n_docs}"
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidData(format!(
                    "duplicate vocabulary term `{t}`"
                )));
            }
        }
        Ok(Vocabulary {
            terms,
            df,
            n_docs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.df[i])
    }

    pub fn df_at(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Smoothed inverse document frequency of the term at `index`.
    pub fn idf_at<F: Float>(&self, index: usize) -> F {
        let n = F::of_usize(self.n_docs);
        let df = F::of_usize(self.df[index]);
        ((F::one() + n) / (F::one() + df)).ln() + F::one()
    }

    pub fn idf<F: Float>(&self, term: &str) -> Option<F> {
        self.index_of(term).map(|i| self.idf_at(i))
    }

    /// SHA-256 of the serialized form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("vocabulary serializes");
        sha256_hex(&json)
    }
}

pub fn fit_vocabulary(docs: &[TokenSeq]) -> Result<Vocabulary> {
    fit_vocabulary_with(docs, VocabConfig::default())
}

/// Indexes every term of the training documents in lexicographic order.
pub fn fit_vocabulary_with(docs: &[TokenSeq], config: VocabConfig) -> Result<Vocabulary> {
    if docs.iter().all(TokenSeq::is_empty) {
        return Err(Error::InvalidData(
            "cannot fit a vocabulary: all documents are empty".into(),
        ));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *counts.entry(t).or_default() += 1;
        }
    }
    let n_docs = docs.len();
    let max_df = (config.max_df_fraction * n_docs as f64).floor() as usize;
    let (terms, df): (Vec<String>, Vec<usize>) = counts
        .into_iter()
        .filter(|&(_, d)| d >= config.min_df && d <= max_df.max(1))
        .map(|(t, d)| (t.to_string(), d))
        .unzip();
    if terms.is_empty() {
        return Err(Error::InvalidConfig(
            "document-frequency pruning removed every term".into(),
        ));
    }
    Vocabulary::from_parts(terms, df, n_docs)
}

/// Raw in-vocabulary term counts.
pub fn bow_vector<F: Float>(doc: &TokenSeq, vocab: &Vocabulary) -> SparseVector<F> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in doc.iter() {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let pairs = counts
        .into_iter()
        .map(|(i, c)| (i, F::of_usize(c)))
        .collect();
    SparseVector::from_pairs(vocab.len(), pairs).expect("indices come from the vocabulary")
}

/// Unit-norm TF-IDF vector; the zero vector when no token is in the vocabulary.
pub fn tfidf_vector<F: Float>(doc: &TokenSeq, vocab: &Vocabulary) -> SparseVector<F> {
    let bow = bow_vector::<F>(doc, vocab);
    let pairs: Vec<(usize, F)> = bow
        .iter()
        .map(|(i, c)| (i, c * vocab.idf_at::<F>(i)))
        .collect();
    let mut v = SparseVector::from_pairs(vocab.len(), pairs).expect("same indices as bow");
    let norm = v.norm();
    if norm > F::zero() {
        v.scale(F::one() / norm);
    }
    v
}
