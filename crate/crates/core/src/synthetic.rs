//! Seeded synthetic corpora and vector sources for benchmarks and tests.
//!
//! Two topic vocabularies overlap in a configurable fraction of their
//! terms. Each document draws tokens from its class topic, with some
//! tokens taken from the other topic and some stopwords mixed in.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::embeddings::{DocumentVectors, EmbeddingTable};
use crate::error::Result;
use crate::features::DenseVector;
use crate::float::Float;
use crate::textprep::{stem, PrepConfig, Preprocessor};

/// Real terms placed in the positive-only vocabulary.
pub const PLANTED_POSITIVE: &[&str] = &["hepatotoxicity", "liver", "safety", "injury", "hepatic"];
/// Real terms placed in the negative-only vocabulary.
pub const PLANTED_NEGATIVE: &[&str] = &["kidney", "cardiac", "tumor", "genome", "bacterial"];

const FILLER: &[&str] = &["the", "of", "and", "in", "with", "was", "for"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    pub positive_fraction: f64,
    /// Terms per topic, shared ones included.
    pub topic_size: usize,
    /// Fraction of each topic's terms that also belong to the other topic.
    pub shared_fraction: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Probability that a token is drawn from the other class's topic.
    pub cross_topic: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_docs: 2000,
            positive_fraction: 0.5,
            topic_size: 300,
            shared_fraction: 0.3,
            min_tokens: 20,
            max_tokens: 60,
            cross_topic: 0.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<DocumentRecord>,
    pub positive_only: Vec<String>,
    pub negative_only: Vec<String>,
    pub shared: Vec<String>,
}

impl SyntheticCorpus {
    pub fn positive_topic(&self) -> Vec<String> {
        self.positive_only
            .iter()
            .chain(&self.shared)
            .cloned()
            .collect()
    }

    pub fn negative_topic(&self) -> Vec<String> {
        self.negative_only
            .iter()
            .chain(&self.shared)
            .cloned()
            .collect()
    }

    /// Every vocabulary word in preprocessed (stemmed) form.
    pub fn stems(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .positive_only
            .iter()
            .chain(&self.negative_only)
            .chain(&self.shared)
            .map(|w| stem(w))
            .collect();
        set.into_iter().collect()
    }
}

/// Pronounceable lowercase words that are their own Porter stem and not
/// stopwords, so preprocessing keeps them intact and distinct.
fn invent_words(rng: &mut ChaCha8Rng, count: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
    ];
    const VOWELS: &[&str] = &["a", "o", "u", "i"];
    const CODAS: &[&str] = &["k", "m", "n", "p", "r", "t", "x", "d"];
    let prep = Preprocessor::new(PrepConfig::default()).expect("default config is valid");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        w.push_str(CODAS.choose(rng).expect("non-empty"));
        let kept = prep.preprocess(&w);
        if kept.len() == 1 && kept.iter().next() == Some(w.as_str()) && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Zipf-like pick: earlier terms are more frequent.
fn pick<'a>(rng: &mut ChaCha8Rng, terms: &'a [String], cumulative: &[f64]) -> &'a str {
    let u = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
    let i = cumulative.partition_point(|&c| c < u).min(terms.len() - 1);
    &terms[i]
}

fn cumulative_weights(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|r| {
            acc += 1.0 / ((r + 1) as f64).powf(0.8);
            acc
        })
        .collect()
}

pub fn generate_corpus(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_shared = (config.topic_size as f64 * config.shared_fraction).round() as usize;
    let n_own = config.topic_size - n_shared;

    let mut taken: BTreeSet<String> = PLANTED_POSITIVE
        .iter()
        .chain(PLANTED_NEGATIVE)
        .map(|s| s.to_string())
        .collect();
    let mut positive_only: Vec<String> = PLANTED_POSITIVE.iter().map(|s| s.to_string()).collect();
    positive_only.extend(invent_words(
        &mut rng,
        n_own.saturating_sub(PLANTED_POSITIVE.len()),
        &mut taken,
    ));
    let mut negative_only: Vec<String> = PLANTED_NEGATIVE.iter().map(|s| s.to_string()).collect();
    negative_only.extend(invent_words(
        &mut rng,
        n_own.saturating_sub(PLANTED_NEGATIVE.len()),
        &mut taken,
    ));
    let shared = invent_words(&mut rng, n_shared, &mut taken);

    let mut corpus = SyntheticCorpus {
        records: Vec::with_capacity(config.n_docs),
        positive_only,
        negative_only,
        shared,
    };
    let topics = [corpus.negative_topic(), corpus.positive_topic()];
    // Shuffle each topic once so shared terms are spread over the frequency
    // ranks, then move the planted terms to the most frequent ranks.
    let topics: Vec<Vec<String>> = topics
        .into_iter()
        .map(|mut t| {
            t.shuffle(&mut rng);
            let (mut planted, rest): (Vec<String>, Vec<String>) = t.into_iter().partition(|w| {
                PLANTED_POSITIVE.contains(&w.as_str()) || PLANTED_NEGATIVE.contains(&w.as_str())
            });
            planted.extend(rest);
            planted
        })
        .collect();
    let weights: Vec<Vec<f64>> = topics.iter().map(|t| cumulative_weights(t.len())).collect();

    let n_pos = (config.n_docs as f64 * config.positive_fraction).round() as usize;
    let width = config.n_docs.to_string().len();
    for i in 0..config.n_docs {
        let label = u8::from(i < n_pos);
        let len = rng.gen_range(config.min_tokens..=config.max_tokens);
        let mut words: Vec<&str> = Vec::with_capacity(len * 2);
        for _ in 0..len {
            let topic = if rng.gen::<f64>() < config.cross_topic {
                1 - label as usize
            } else {
                label as usize
            };
            if rng.gen::<f64>() < 0.2 {
                words.push(FILLER.choose(&mut rng).expect("non-empty"));
            }
            words.push(pick(&mut rng, &topics[topic], &weights[topic]));
        }
        let title_len = (words.len() / 4).max(1);
        let title = capitalize(&words[..title_len].join(" "));
        let abstract_text = capitalize(&words[title_len..].join(" ")) + ".";
        corpus.records.push(DocumentRecord::new(
            format!("syn{:0width$}", i, width = width),
            Some(label),
            title,
            abstract_text,
        ));
    }
    corpus.records.shuffle(&mut rng);
    corpus
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Embedding table over the corpus stems. Positive-only terms lean one way
/// along a random direction, negative-only terms the other, shared terms sit
/// near the origin. `coverage` is the fraction of stems included.
pub fn embedding_table<F: Float>(
    corpus: &SyntheticCorpus,
    name: &str,
    dim: usize,
    coverage: f64,
    seed: u64,
) -> Result<EmbeddingTable<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pos: BTreeSet<String> = corpus.positive_only.iter().map(|w| stem(w)).collect();
    let neg: BTreeSet<String> = corpus.negative_only.iter().map(|w| stem(w)).collect();
    let mut entries = Vec::new();
    for term in corpus.stems() {
        if rng.gen::<f64>() >= coverage {
            continue;
        }
        let lean = if pos.contains(&term) {
            1.0
        } else if neg.contains(&term) {
            -1.0
        } else {
            0.0
        };
        let v: Vec<F> = direction
            .iter()
            .map(|&d| F::of(0.6 * lean * d + rng.gen_range(-1.0..1.0)))
            .collect();
        entries.push((term, v));
    }
    EmbeddingTable::from_entries(name, dim, entries)
}

/// Per-document vectors standing in for a sentence encoder: the mean of a
/// private term table over the document's tokens, plus per-document noise.
pub fn sentence_vectors<F: Float>(
    corpus: &SyntheticCorpus,
    dim: usize,
    seed: u64,
) -> Result<DocumentVectors<F>> {
    let table = embedding_table::<F>(corpus, "sentence", dim, 1.0, seed)?;
    let prep = Preprocessor::new(PrepConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = DocumentVectors::new(dim);
    let mut records: Vec<&DocumentRecord> = corpus.records.iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    for r in records {
        let avg = crate::embeddings::average_embedding(&prep.preprocess(&r.text()), &table);
        let v: Vec<F> = avg
            .vector
            .values
            .iter()
            .map(|&x| x + F::of(rng.gen_range(-0.2..0.2)))
            .collect();
        out.insert(r.id.clone(), DenseVector::new(v))?;
    }
    Ok(out)
}
