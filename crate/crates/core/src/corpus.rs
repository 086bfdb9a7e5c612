//! Publication records: loading from TSV/JSONL, writing, and seeded splits.
//!
//! A record carries an id, an optional binary label, a title and an abstract.
//! Splits are computed on the corpus sorted by id, so the row order of the
//! source file never influences which records end up in which part.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
}

impl DocumentRecord {
    pub fn new(
        id: impl Into<String>,
        label: Option<u8>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
    ) -> Self {
        DocumentRecord {
            id: id.into(),
            label,
            title: title.into(),
            abstract_text: abstract_text.into(),
        }
    }

    /// Title and abstract joined by a single space.
    pub fn text(&self) -> String {
        match (self.title.is_empty(), self.abstract_text.is_empty()) {
            (false, false) => format!("{} {}", self.title, self.abstract_text),
            (false, true) => self.title.clone(),
            _ => self.abstract_text.clone(),
        }
    }

    /// Checks the per-record invariants, returning a human-readable reason.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".to_string());
        }
        if self.title.trim().is_empty() && self.abstract_text.trim().is_empty() {
            return Err(format!("empty document {}", self.id));
        }
        if let Some(l) = self.label {
            if l > 1 {
                return Err(format!("label {} of {} is not 0 or 1", l, self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from the file extension; anything that is not
    /// `.jsonl`/`.ndjson`/`.json` is read as TSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

/// Validates a whole corpus: record invariants and id uniqueness.
pub fn validate_corpus(records: &[DocumentRecord]) -> Result<()> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if let Err(reason) = r.check() {
            let empty_text = r.title.trim().is_empty() && r.abstract_text.trim().is_empty();
            return Err(if empty_text && !r.id.trim().is_empty() {
                Error::EmptyDocument(r.id.clone())
            } else {
                Error::InvalidData(reason)
            });
        }
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<DocumentRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let records = match format {
        CorpusFormat::Tsv => read_tsv(path, reader)?,
        CorpusFormat::Jsonl => read_jsonl(path, reader)?,
    };
    log::debug!("loaded {} records from {}", records.len(), path.display());
    Ok(records)
}

struct Columns {
    id: usize,
    label: Option<usize>,
    title: usize,
    abstract_text: usize,
    width: usize,
}

fn read_tsv(path: &Path, reader: impl BufRead) -> Result<Vec<DocumentRecord>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let names: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let find = |name: &str| names.iter().position(|n| n.trim() == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::parse(path, 1, format!("header lacks column `{name}`")))
    };
    let cols = Columns {
        id: required("id")?,
        label: find("label"),
        title: required("title")?,
        abstract_text: required("abstract")?,
        width: names.len(),
    };

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.width {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} fields, found {}", cols.width, fields.len()),
            ));
        }
        let label = match cols.label.map(|c| fields[c].trim()) {
            None | Some("") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            Some(other) => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        let record = DocumentRecord::new(
            fields[cols.id].trim(),
            label,
            fields[cols.title],
            fields[cols.abstract_text],
        );
        accept(path, lineno, record, &mut seen, &mut out)?;
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonRow {
    id: String,
    #[serde(default)]
    label: Option<serde_json::Value>,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_text: String,
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<DocumentRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let label = match row.label {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => match v.as_u64() {
                Some(l @ (0 | 1)) => Some(l as u8),
                _ => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("label `{v}` is not 0 or 1"),
                    ))
                }
            },
        };
        let record = DocumentRecord::new(row.id, label, row.title, row.abstract_text);
        accept(path, lineno, record, &mut seen, &mut out)?;
    }
    Ok(out)
}

fn accept(
    path: &Path,
    lineno: usize,
    record: DocumentRecord,
    seen: &mut HashSet<String>,
    out: &mut Vec<DocumentRecord>,
) -> Result<()> {
    record
        .check()
        .map_err(|reason| Error::parse(path, lineno, reason))?;
    if !seen.insert(record.id.clone()) {
        return Err(Error::parse(
            path,
            lineno,
            format!("duplicate id {}", record.id),
        ));
    }
    out.push(record);
    Ok(())
}

/// Writes records in the given format. The TSV label column is emitted
/// only when at least one record is labelled.
pub fn write_corpus(
    path: impl AsRef<Path>,
    records: &[DocumentRecord],
    format: CorpusFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus_to(&mut w, records, format).map_err(|e| match e {
        WriteError::Io(e) => Error::io(path, e),
        WriteError::Data(e) => e,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialized form of `records` as [`write_corpus`] would write it.
pub fn corpus_bytes(records: &[DocumentRecord], format: CorpusFormat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_corpus_to(&mut out, records, format).map_err(|e| match e {
        WriteError::Io(e) => Error::InvalidData(e.to_string()),
        WriteError::Data(e) => e,
    })?;
    Ok(out)
}

enum WriteError {
    Io(std::io::Error),
    Data(Error),
}

impl From<std::io::Error> for WriteError {
    fn from(e: std::io::Error) -> Self {
        WriteError::Io(e)
    }
}

fn write_corpus_to(
    w: &mut impl Write,
    records: &[DocumentRecord],
    format: CorpusFormat,
) -> std::result::Result<(), WriteError> {
    match format {
        CorpusFormat::Jsonl => {
            for r in records {
                let line = serde_json::to_string(r).map_err(|e| WriteError::Data(e.into()))?;
                writeln!(w, "{line}")?;
            }
        }
        CorpusFormat::Tsv => {
            let labelled = records.iter().any(|r| r.label.is_some());
            if labelled {
                writeln!(w, "id\tlabel\ttitle\tabstract")?;
            } else {
                writeln!(w, "id\ttitle\tabstract")?;
            }
            for r in records {
                for field in [&r.id, &r.title, &r.abstract_text] {
                    if field.contains(['\t', '\n', '\r']) {
                        return Err(WriteError::Data(Error::InvalidData(format!(
                            "record {} contains a tab or line break and cannot be written as TSV",
                            r.id
                        ))));
                    }
                }
                if labelled {
                    let label = r.label.map(|l| l.to_string()).unwrap_or_default();
                    writeln!(w, "{}\t{}\t{}\t{}", r.id, label, r.title, r.abstract_text)?;
                } else {
                    writeln!(w, "{}\t{}\t{}", r.id, r.title, r.abstract_text)?;
                }
            }
        }
    }
    Ok(())
}

/// Requested part sizes as fractions of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub meta: f64,
    pub validation: f64,
}

impl SplitFractions {
    /// 80% train, 20% validation.
    pub const HOLDOUT: SplitFractions = SplitFractions {
        train: 0.8,
        meta: 0.0,
        validation: 0.2,
    };
    /// 60% base learners, 20% meta-learner, 20% validation.
    pub const STACKING: SplitFractions = SplitFractions {
        train: 0.6,
        meta: 0.2,
        validation: 0.2,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.meta, self.validation];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be non-negative: {self:?}"
            )));
        }
        if self.train <= 0.0 {
            return Err(Error::InvalidConfig(
                "train fraction must be positive".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<DocumentRecord>,
    pub meta_train: Vec<DocumentRecord>,
    pub validation: Vec<DocumentRecord>,
    pub seed: u64,
}

impl CorpusSplit {
    /// Fails if any id occurs in more than one part.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (part, records) in [
            ("train", &self.train),
            ("meta_train", &self.meta_train),
            ("validation", &self.validation),
        ] {
            for r in records.iter() {
                if !seen.insert(r.id.as_str()) {
                    return Err(Error::InvalidData(format!(
                        "record {} leaks into {part} from another split part",
                        r.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Partitions a labelled corpus into train / meta / validation parts.
///
/// Stratified splits apply the fractions within each class, so every part
/// matches the requested size within one record per class.
pub fn split_corpus(
    corpus: &[DocumentRecord],
    fractions: SplitFractions,
    stratified: bool,
    seed: u64,
) -> Result<CorpusSplit> {
    fractions.validate()?;
    if let Some(r) = corpus.iter().find(|r| r.label.is_none()) {
        return Err(Error::InvalidData(format!("record {} is unlabelled", r.id)));
    }
    validate_corpus(corpus)?;

    let mut sorted: Vec<&DocumentRecord> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let groups: Vec<Vec<&DocumentRecord>> = if stratified {
        (0..=1u8)
            .map(|c| {
                sorted
                    .iter()
                    .copied()
                    .filter(|r| r.label == Some(c))
                    .collect()
            })
            .collect()
    } else {
        vec![sorted]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = CorpusSplit {
        train: Vec::new(),
        meta_train: Vec::new(),
        validation: Vec::new(),
        seed,
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        let n = group.len();
        let n_val = ((n as f64) * fractions.validation).round() as usize;
        let n_val = n_val.min(n);
        let n_meta = (((n as f64) * fractions.meta).round() as usize).min(n - n_val);
        split
            .validation
            .extend(group[..n_val].iter().map(|r| (*r).clone()));
        split
            .meta_train
            .extend(group[n_val..n_val + n_meta].iter().map(|r| (*r).clone()));
        split
            .train
            .extend(group[n_val + n_meta..].iter().map(|r| (*r).clone()));
    }
    for part in [
        &mut split.train,
        &mut split.meta_train,
        &mut split.validation,
    ] {
        part.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(split)
}

/// Labels of a fully labelled record slice.
pub fn labels_of(records: &[DocumentRecord]) -> Result<Vec<u8>> {
    records
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| Error::InvalidData(format!("record {} is unlabelled", r.id)))
        })
        .collect()
}
