#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dilifilter_core::corpus::{write_corpus, CorpusFormat};
use dilifilter_core::synthetic::{
    embedding_table, generate_corpus, sentence_vectors, SyntheticConfig, SyntheticCorpus,
};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dilifilter"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Runs and requires exit code 0.
pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exited normally")
}

pub fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub corpus: SyntheticCorpus,
    pub corpus_path: PathBuf,
    pub table1: PathBuf,
    pub table2: PathBuf,
    pub sidecar: PathBuf,
}

impl Fixture {
    pub fn new(config: &SyntheticConfig) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(config);
        let corpus_path = dir.path().join("corpus.tsv");
        write_corpus(&corpus_path, &corpus.records, CorpusFormat::Tsv).unwrap();
        let table1 = dir.path().join("table1.txt");
        let table2 = dir.path().join("table2.txt");
        let sidecar = dir.path().join("sentences.tsv");
        embedding_table::<f64>(&corpus, "t1", 50, 0.9, 11)
            .unwrap()
            .write_text(&table1)
            .unwrap();
        embedding_table::<f64>(&corpus, "t2", 30, 0.8, 12)
            .unwrap()
            .write_text(&table2)
            .unwrap();
        sentence_vectors::<f64>(&corpus, 24, 13)
            .unwrap()
            .write_tsv(&sidecar)
            .unwrap();
        Fixture {
            dir,
            corpus,
            corpus_path,
            table1,
            table2,
            sidecar,
        }
    }

    /// A 400-document corpus that trains in well under a second.
    pub fn small() -> Fixture {
        Fixture::new(&SyntheticConfig {
            n_docs: 400,
            topic_size: 120,
            seed: 5,
            ..SyntheticConfig::default()
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    pub fn resource_args(&self) -> Vec<String> {
        vec![
            "--table1".into(),
            s(&self.table1).into(),
            "--table2".into(),
            s(&self.table2).into(),
            "--sentence-vectors".into(),
            s(&self.sidecar).into(),
        ]
    }
}
