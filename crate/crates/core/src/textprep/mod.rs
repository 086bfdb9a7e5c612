//! Text normalization: lowercase, strip everything but ASCII letters,
//! tokenize on whitespace, drop short tokens and stopwords, optionally stem.

mod porter;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::stem;

/// Stopword lists shipped with the crate, addressed by version id.
const PINNED_STOPWORDS: &[(&str, &str)] =
    &[("v1", include_str!("../../data/stopwords/v1/english.txt"))];

pub const DEFAULT_STOPWORDS: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub stemming: bool,
    pub stopword_list_version: String,
    pub min_token_length: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            stemming: true,
            stopword_list_version: DEFAULT_STOPWORDS.to_string(),
            min_token_length: 2,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_length == 0 {
            return Err(Error::InvalidConfig(
                "min_token_length must be at least 1".into(),
            ));
        }
        StopwordList::pinned(&self.stopword_list_version).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct StopwordList {
    version: String,
    words: HashSet<String>,
}

impl StopwordList {
    pub fn pinned(version: &str) -> Result<StopwordList> {
        let (_, body) = PINNED_STOPWORDS
            .iter()
            .find(|(v, _)| *v == version)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown stopword list `{version}`")))?;
        Ok(StopwordList::parse(version, body))
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn from_file(version: &str, path: impl AsRef<Path>) -> Result<StopwordList> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopwordList::parse(version, &body))
    }

    fn parse(version: &str, body: &str) -> StopwordList {
        let words = body
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopwordList {
            version: version.to_string(),
            words,
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Token sequence: lowercase, purely alphabetic, no stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Preprocessor bound to a resolved stopword list.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PrepConfig,
    stopwords: StopwordList,
}

impl Preprocessor {
    pub fn new(config: PrepConfig) -> Result<Preprocessor> {
        config.validate()?;
        let stopwords = StopwordList::pinned(&config.stopword_list_version)?;
        Ok(Preprocessor { config, stopwords })
    }

    pub fn with_stopwords(config: PrepConfig, stopwords: StopwordList) -> Result<Preprocessor> {
        if config.min_token_length == 0 {
            return Err(Error::InvalidConfig(
                "min_token_length must be at least 1".into(),
            ));
        }
        Ok(Preprocessor { config, stopwords })
    }

    pub fn config(&self) -> &PrepConfig {
        &self.config
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    /// lowercase → non-letters to spaces → split → length filter →
    /// stopword filter → stem. A stem that falls below the minimum length
    /// or lands on a stopword is dropped as well.
    pub fn preprocess(&self, raw: &str) -> TokenSeq {
        let normalized: String = raw
            .to_lowercase()
            .chars()
            .map(|c| if c.is_ascii_lowercase() { c } else { ' ' })
            .collect();
        let min = self.config.min_token_length;
        normalized
            .split_whitespace()
            .filter(|t| t.len() >= min && !self.stopwords.contains(t))
            .filter_map(|t| {
                if !self.config.stemming {
                    return Some(t.to_string());
                }
                let s = stem(t);
                (s.len() >= min && !self.stopwords.contains(&s)).then_some(s)
            })
            .collect()
    }
}

/// One-shot convenience around [`Preprocessor`].
pub fn preprocess(raw: &str, config: &PrepConfig) -> Result<TokenSeq> {
    Ok(Preprocessor::new(config.clone())?.preprocess(raw))
}
