//! Pre-trained word-embedding tables (word2vec text format), document
//! averaging, and precomputed per-document vectors.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::DenseVector;
use crate::fingerprint::Fingerprinter;
use crate::float::Float;
use crate::textprep::TokenSeq;

/// Term vectors of one fixed dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<F: Float> {
    name: String,
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<F>,
}

impl<F: Float> EmbeddingTable<F> {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        EmbeddingTable {
            name: name.into(),
            dim,
            terms: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn from_entries(
        name: impl Into<String>,
        dim: usize,
        entries: impl IntoIterator<Item = (String, Vec<F>)>,
    ) -> Result<Self> {
        let mut table = EmbeddingTable::new(name, dim);
        for (term, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding of `{term}`")));
            }
            table.insert(term, &v);
        }
        Ok(table)
    }

    /// Inserts or overwrites; returns true when the term already existed.
    fn insert(&mut self, term: String, v: &[F]) -> bool {
        match self.index.entry(term) {
            Entry::Occupied(e) => {
                let row = *e.get();
                self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(v);
                true
            }
            Entry::Vacant(e) => {
                self.terms.push(e.key().clone());
                e.insert(self.terms.len() - 1);
                self.data.extend_from_slice(v);
                false
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&[F]> {
        self.index
            .get(term)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Content hash over dimension, terms and exact component bits.
    /// The table name does not participate.
    pub fn fingerprint(&self) -> String {
        let mut h = Fingerprinter::new();
        h.u64(self.dim as u64);
        for (row, term) in self.terms.iter().enumerate() {
            h.bytes(term.as_bytes());
            for &x in &self.data[row * self.dim..(row + 1) * self.dim] {
                h.u64(x.fingerprint_bits());
            }
        }
        h.finish()
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (row, term) in self.terms.iter().enumerate() {
            write!(w, "{term}").map_err(io)?;
            for x in &self.data[row * self.dim..(row + 1) * self.dim] {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads a word2vec text file: a `count dimension` header, then one
/// `term v1 .. vd` row per line. Rows are parsed one at a time; only the
/// parsed components are kept.
pub fn load_embedding_table<F: Float>(
    path: impl AsRef<Path>,
    name: impl Into<String>,
) -> Result<EmbeddingTable<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embedding_table(path, BufReader::new(file), name.into())
}

fn read_embedding_table<F: Float>(
    path: &Path,
    mut reader: impl BufRead,
    name: String,
) -> Result<EmbeddingTable<F>> {
    let mut line = String::new();
    let read = reader
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    if read == 0 {
        return Err(Error::parse(path, 1, "empty embedding file"));
    }
    let header: Vec<&str> = line.split_whitespace().collect();
    let (declared, dim) = match header.as_slice() {
        [count, dim] => match (count.parse::<usize>(), dim.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("bad header `{}`", line.trim()),
                ))
            }
        },
        _ => return Err(Error::parse(path, 1, "header must be `count dimension`")),
    };

    let mut table = EmbeddingTable::new(name, dim);
    table.data.reserve(declared.min(1 << 20) * dim);
    let mut row = Vec::with_capacity(dim);
    let mut lineno = 1;
    let mut rows = 0usize;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        lineno += 1;
        let mut fields = line.split_whitespace();
        let Some(term) = fields.next() else { continue };
        row.clear();
        for field in fields {
            let x: F = field.parse().map_err(|_| {
                Error::parse(path, lineno, format!("non-numeric component `{field}`"))
            })?;
            if !x.is_finite() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("non-finite component `{field}`"),
                ));
            }
            row.push(x);
        }
        if row.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {dim} components, found {}", row.len()),
            ));
        }
        rows += 1;
        if table.insert(term.to_string(), &row) {
            log::warn!(
                "{}:{lineno}: duplicate term `{term}`, keeping the last occurrence",
                path.display()
            );
        }
    }
    if rows != declared {
        log::warn!(
            "{}: header declares {declared} rows, file has {rows}",
            path.display()
        );
    }
    Ok(table)
}

/// Mean of token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Averaged<F: Float> {
    pub vector: DenseVector<F>,
    /// Tokens found in the table, with multiplicity.
    pub covered: usize,
}

impl<F: Float> Averaged<F> {
    /// True when no token was found and the vector is the zero fallback.
    pub fn is_fallback(&self) -> bool {
        self.covered == 0
    }
}

/// Arithmetic mean over the in-table tokens (with multiplicity).
///
/// Accumulation runs in table-row order, so the result does not depend on
/// token order. Documents without any known token get the zero vector.
pub fn average_embedding<F: Float>(doc: &TokenSeq, table: &EmbeddingTable<F>) -> Averaged<F> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in doc.iter() {
        if let Some(&row) = table.index.get(t) {
            *counts.entry(row).or_default() += 1;
        }
    }
    let covered: usize = counts.values().sum();
    let mut sum = vec![F::zero(); table.dim];
    for (row, count) in counts {
        let c = F::of_usize(count);
        let v = &table.data[row * table.dim..(row + 1) * table.dim];
        for (s, &x) in sum.iter_mut().zip(v) {
            *s = *s + c * x;
        }
    }
    if covered > 0 {
        let n = F::of_usize(covered);
        for s in &mut sum {
            *s = *s / n;
        }
    }
    Averaged {
        vector: DenseVector::new(sum),
        covered,
    }
}

/// Precomputed per-document vectors keyed by record id.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVectors<F: Float> {
    dim: usize,
    vectors: BTreeMap<String, DenseVector<F>>,
}

impl<F: Float> DocumentVectors<F> {
    pub fn new(dim: usize) -> Self {
        DocumentVectors {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    /// Dimension of the stored vectors; zero when empty.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DenseVector<F>> {
        self.vectors.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, v: DenseVector<F>) -> Result<()> {
        let id = id.into();
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = v.len();
        }
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseVector<F>)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Fingerprinter::new();
        h.u64(self.dim as u64);
        for (id, v) in &self.vectors {
            h.bytes(id.as_bytes());
            for &x in &v.values {
                h.u64(x.fingerprint_bits());
            }
        }
        h.finish()
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for (id, v) in &self.vectors {
            write!(w, "{id}").map_err(io)?;
            for x in &v.values {
                write!(w, "\t{x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads a headerless TSV of `id v1 .. vd` rows with constant `d`.
pub fn load_document_vectors<F: Float>(path: impl AsRef<Path>) -> Result<DocumentVectors<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = DocumentVectors::new(0);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_string();
        if id.is_empty() {
            return Err(Error::parse(path, lineno, "missing id"));
        }
        let values = fields
            .map(|f| {
                let x: F = f.trim().parse().map_err(|_| {
                    Error::parse(path, lineno, format!("non-numeric component `{f}`"))
                })?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::parse(
                        path,
                        lineno,
                        format!("non-finite component `{f}`"),
                    ))
                }
            })
            .collect::<Result<Vec<F>>>()?;
        if values.is_empty() {
            return Err(Error::parse(path, lineno, "row has no components"));
        }
        out.insert(id.clone(), DenseVector::new(values))
            .map_err(|e| match e {
                Error::DuplicateId(id) => Error::parse(path, lineno, format!("duplicate id {id}")),
                Error::DimensionMismatch { expected, found } => Error::parse(
                    path,
                    lineno,
                    format!("inconsistent dimension: expected {expected}, found {found}"),
                ),
                other => other,
            })?;
    }
    Ok(out)
}
