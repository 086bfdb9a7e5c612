mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{code, ok, read_json, s, Fixture};
use dilifilter_core::corpus::{load_corpus, write_corpus, CorpusFormat};

fn train_lr(fx: &Fixture, out: &str) -> std::path::PathBuf {
    let dir = fx.path(out);
    ok(&[
        "train",
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&dir),
        "--seed",
        "3",
    ]);
    dir
}

fn predictions(path: &std::path::Path) -> Vec<(String, String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].to_string())
        })
        .collect()
}

#[test]
fn predict_on_the_validation_slice_reproduces_training_output() {
    let fx = Fixture::small();
    let dir = train_lr(&fx, "run");
    let parts = fx.path("parts");
    ok(&[
        "split",
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&parts),
        "--seed",
        "3",
    ]);
    let preds = fx.path("val_pred.tsv");
    ok(&[
        "predict",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&parts.join("validation.tsv")),
        "--output",
        s(&preds),
    ]);
    assert_eq!(
        fs::read(&preds).unwrap(),
        fs::read(dir.join("validation_predictions.tsv")).unwrap()
    );

    let eval = fx.path("eval");
    ok(&[
        "evaluate",
        "--predictions",
        s(&preds),
        "--truth",
        s(&parts.join("validation.tsv")),
        "--out",
        s(&eval),
    ]);
    let train_report = read_json(dir.join("report.json"));
    let eval_report = read_json(eval.join("report.json"));
    assert_eq!(
        train_report["validation"]["confusion"],
        eval_report["models"][0]["evaluation"]["confusion"]
    );
    assert_eq!(
        train_report["validation"]["auroc"],
        eval_report["models"][0]["evaluation"]["auroc"]
    );
    for name in ["roc.tsv", "pr.tsv"] {
        assert_eq!(
            fs::read(dir.join(name)).unwrap(),
            fs::read(eval.join(name)).unwrap()
        );
    }
    let split_manifest = read_json(parts.join("split.json"));
    assert_eq!(
        split_manifest["counts"]["validation"],
        train_report["n_validation"]
    );
    assert_eq!(
        split_manifest["config_fingerprint"],
        train_report["config_fingerprint"]
    );
}

#[test]
fn threshold_override_changes_labels_only() {
    let fx = Fixture::small();
    let dir = train_lr(&fx, "run");
    let model = dir.join("model.json");
    let (a, b) = (fx.path("a.tsv"), fx.path("b.tsv"));
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--corpus",
        s(&fx.corpus_path),
        "--output",
        s(&a),
    ]);
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--corpus",
        s(&fx.corpus_path),
        "--output",
        s(&b),
        "--threshold",
        "0.9",
    ]);
    let (pa, pb) = (predictions(&a), predictions(&b));
    assert_eq!(pa.len(), 400);
    let mut changed = 0;
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!((&x.0, &x.1), (&y.0, &y.1));
        let p: f64 = x.1.parse().unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(y.2, if p >= 0.9 { "1" } else { "0" });
        changed += usize::from(x.2 != y.2);
    }
    assert!(changed > 0);
    assert_eq!(
        code(&[
            "predict",
            "--model",
            s(&model),
            "--corpus",
            s(&fx.corpus_path),
            "--threshold",
            "1.5"
        ]),
        1
    );
}

#[test]
fn unlabelled_corpora_can_be_scored() {
    let fx = Fixture::small();
    let dir = train_lr(&fx, "run");
    let mut records = fx.corpus.records[..20].to_vec();
    for r in &mut records {
        r.label = None;
    }
    let path = fx.path("unlabelled.jsonl");
    write_corpus(&path, &records, CorpusFormat::Jsonl).unwrap();
    let out = ok(&[
        "predict",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&path),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("id\tprobability\tlabel\n"));
}

#[test]
fn evaluation_joins_by_id() {
    let fx = Fixture::small();
    let truth = fx.path("truth.tsv");
    write_corpus(&truth, &fx.corpus.records[..50], CorpusFormat::Tsv).unwrap();
    let mut rows: Vec<String> = fx.corpus.records[..50]
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}\t{}\t0", r.id, (i % 7) as f64 / 7.0))
        .collect();
    let forward = fx.write(
        "forward.tsv",
        &format!("id\tprobability\tlabel\n{}\n", rows.join("\n")),
    );
    rows.reverse();
    let backward = fx.write(
        "backward.tsv",
        &format!("id\tprobability\tlabel\n{}\n", rows.join("\n")),
    );
    let (ea, eb) = (fx.path("ea"), fx.path("eb"));
    ok(&[
        "evaluate",
        "--predictions",
        s(&forward),
        "--truth",
        s(&truth),
        "--out",
        s(&ea),
    ]);
    ok(&[
        "evaluate",
        "--predictions",
        s(&backward),
        "--truth",
        s(&truth),
        "--out",
        s(&eb),
    ]);
    let (ra, rb) = (
        read_json(ea.join("report.json")),
        read_json(eb.join("report.json")),
    );
    assert_eq!(ra["models"][0]["evaluation"], rb["models"][0]["evaluation"]);

    rows.pop();
    rows.push("stranger\t0.5\t1".into());
    let unmatched = fx.write(
        "unmatched.tsv",
        &format!("id\tprobability\tlabel\n{}\n", rows.join("\n")),
    );
    let out = common::run(&[
        "evaluate",
        "--predictions",
        s(&unmatched),
        "--truth",
        s(&truth),
        "--out",
        s(&ea),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("stranger") && msg.contains(&fx.corpus.records[0].id),
        "{msg}"
    );

    let disjoint = fx.write("disjoint.tsv", "id\tprobability\tlabel\nnobody\t0.5\t1\n");
    assert_eq!(
        code(&[
            "evaluate",
            "--predictions",
            s(&disjoint),
            "--truth",
            s(&truth),
            "--out",
            s(&ea)
        ]),
        2
    );
}

#[test]
fn published_counts_give_the_published_f1() {
    let fx = Fixture::small();
    // 947 of 1000 predicted positives are true, 961 of 1000 actual positives found.
    let (tp, fp, fn_, tn) = (
        947 * 961,
        1000 * 961 - 947 * 961,
        947 * 1000 - 947 * 961,
        5000,
    );
    let mut truth = String::from("id\tlabel\ttitle\tabstract\n");
    let mut preds = String::from("id\tprobability\tlabel\n");
    let mut n = 0;
    for (count, label, p) in [(tp, 1, 0.9), (fp, 0, 0.8), (fn_, 1, 0.2), (tn, 0, 0.1)] {
        for _ in 0..count {
            truth.push_str(&format!("d{n}\t{label}\tt\ta\n"));
            preds.push_str(&format!("d{n}\t{p}\t{}\n", u8::from(p >= 0.5)));
            n += 1;
        }
    }
    let (t, p) = (fx.write("t1.tsv", &truth), fx.write("p1.tsv", &preds));
    let out = fx.path("table1");
    ok(&[
        "evaluate",
        "--predictions",
        s(&p),
        "--truth",
        s(&t),
        "--out",
        s(&out),
    ]);
    let r = read_json(out.join("report.json"));
    let e = &r["models"][0]["evaluation"];
    assert!((e["precision"].as_f64().unwrap() - 0.947).abs() < 1e-12);
    assert!((e["recall"].as_f64().unwrap() - 0.961).abs() < 1e-12);
    assert!((e["f1"].as_f64().unwrap() - 0.954).abs() <= 1e-3);
}

#[test]
fn identity_interpretation_equals_the_fitted_weights() {
    let fx = Fixture::small();
    let dir = train_lr(&fx, "run");
    let out = fx.path("interp");
    ok(&[
        "interpret",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&fx.corpus_path),
        "--identity",
        "--out",
        s(&out),
    ]);
    let model = read_json(dir.join("model.json"));
    let weights: Vec<f64> = model["model"]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let terms: Vec<String> = model["vocabulary"]["terms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let by_term: BTreeMap<String, f64> = terms.into_iter().zip(weights).collect();
    let tsv = fs::read_to_string(out.join("coefficients.tsv")).unwrap();
    let mut rows = 0;
    for line in tsv.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), by_term[f[0]], "{}", f[0]);
        rows += 1;
    }
    assert_eq!(rows, by_term.len());
}

#[test]
fn bootstrap_interpretation_surfaces_planted_terms() {
    let fx = Fixture::small();
    let dir = train_lr(&fx, "run");
    let out = fx.path("interp");
    let model = dir.join("model.json");
    let args = [
        "interpret",
        "--model",
        s(&model),
        "--corpus",
        s(&fx.corpus_path),
        "--bootstraps",
        "20",
        "--seed",
        "4",
        "--out",
        s(&out),
    ];
    ok(&args);
    let top = fs::read_to_string(out.join("top_terms.tsv")).unwrap();
    let positive: Vec<&str> = top
        .lines()
        .filter(|l| l.starts_with("positive"))
        .map(|l| l.split('\t').nth(2).unwrap())
        .collect();
    assert_eq!(positive.len(), 10);
    for planted in ["hepatotox", "liver", "safeti"] {
        assert!(positive.contains(&planted), "{planted} not in {positive:?}");
    }
    let first = fs::read(out.join("coefficients.tsv")).unwrap();
    ok(&args);
    assert_eq!(first, fs::read(out.join("coefficients.tsv")).unwrap());

    // A different corpus cannot stand in for the training data.
    let other = fx.path("other.tsv");
    write_corpus(&other, &fx.corpus.records[..300], CorpusFormat::Tsv).unwrap();
    assert_eq!(
        code(&[
            "interpret",
            "--model",
            s(&dir.join("model.json")),
            "--corpus",
            s(&other),
            "--out",
            s(&out)
        ]),
        2
    );
}

#[test]
fn forests_train_but_are_not_interpretable() {
    let fx = Fixture::small();
    let dir = fx.path("rf");
    let cfg = fx.write(
        "rf.json",
        r#"{"model": {"kind": "rf", "n_estimators": 20, "max_depth": 6}}"#,
    );
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&dir),
    ]);
    let report = read_json(dir.join("report.json"));
    assert_eq!(report["model_kind"], "rf");
    assert!(report["validation"]["accuracy"].as_f64().unwrap() > 0.8);
    assert_eq!(
        code(&[
            "interpret",
            "--model",
            s(&dir.join("model.json")),
            "--corpus",
            s(&fx.corpus_path),
            "--out",
            s(&fx.path("i"))
        ]),
        1
    );
}

#[test]
fn ensemble_runs_end_to_end() {
    let fx = Fixture::small();
    let dir = fx.path("ens");
    let mut args = vec![
        "train".to_string(),
        "--model".into(),
        "ensemble".into(),
        "--corpus".into(),
        s(&fx.corpus_path).into(),
        "--out".into(),
        s(&dir).into(),
    ];
    args.extend(fx.resource_args());
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&argv);
    let model = read_json(dir.join("model.json"));
    assert_eq!(model["kind"], "ensemble");
    assert_eq!(model["model"]["base"].as_array().unwrap().len(), 12);
    let report = read_json(dir.join("report.json"));
    assert_eq!(report["base_learners"].as_array().unwrap().len(), 12);
    assert_eq!(report["sentence_fallback"], false);
    assert_eq!(report["n_meta"], 80);

    let out = fx.path("contrib");
    ok(&[
        "interpret",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&fx.corpus_path),
        "--bootstraps",
        "10",
        "--out",
        s(&out),
    ]);
    let tsv = fs::read_to_string(out.join("meta_contributions.tsv")).unwrap();
    let total: f64 = tsv
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(tsv.lines().count(), 13);

    // Recorded resource paths are reused by predict.
    ok(&[
        "predict",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&fx.corpus_path),
    ]);
}

#[test]
fn ensemble_without_sidecar_records_the_fallback() {
    let fx = Fixture::small();
    let dir = fx.path("ens");
    ok(&[
        "train",
        "--model",
        "ensemble",
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&dir),
        "--table1",
        s(&fx.table1),
        "--table2",
        s(&fx.table2),
    ]);
    assert_eq!(
        read_json(dir.join("report.json"))["sentence_fallback"],
        true
    );
}

#[test]
fn mismatched_feature_spaces_are_rejected() {
    let fx = Fixture::small();
    let dir = fx.path("w2v");
    ok(&[
        "train",
        "--vectorizer",
        "w2v_table_1",
        "--table1",
        s(&fx.table1),
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&dir),
    ]);
    let out = common::run(&[
        "predict",
        "--model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&fx.corpus_path),
        "--table1",
        s(&fx.table2),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("feature space mismatch"));
}

#[test]
fn exit_codes_separate_usage_data_and_numeric_failures() {
    let fx = Fixture::small();
    assert_eq!(code(&["train"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["--help"]), 0);
    let bad = fx.write(
        "bad.json",
        r#"{"model": {"kind": "lr", "penalty_strength": -1}}"#,
    );
    assert_eq!(
        code(&["train", "--config", s(&bad), "--corpus", s(&fx.corpus_path)]),
        1
    );
    let typo = fx.write("typo.json", r#"{"sead": 1}"#);
    assert_eq!(
        code(&[
            "train",
            "--config",
            s(&typo),
            "--corpus",
            s(&fx.corpus_path)
        ]),
        1
    );
    assert_eq!(code(&["train", "--corpus", s(&fx.path("missing.tsv"))]), 2);
    let dup = fx.write(
        "dup.tsv",
        "id\tlabel\ttitle\tabstract\na\t1\tx\ty\na\t0\tx\ty\n",
    );
    assert_eq!(code(&["train", "--corpus", s(&dup)]), 2);
    let unlabelled = fx.write("u.tsv", "id\ttitle\tabstract\na\tx\ty\nb\tx\ty\n");
    assert_eq!(code(&["train", "--corpus", s(&unlabelled)]), 2);
    let huge = "1e308 ".repeat(4);
    let table = fx.write("huge.txt", &format!("1 4\nhepatotox {huge}\n"));
    assert_eq!(
        code(&[
            "train",
            "--vectorizer",
            "w2v_table_1",
            "--table1",
            s(&table),
            "--corpus",
            s(&fx.corpus_path),
            "--out",
            s(&fx.path("x")),
        ]),
        3
    );
}

#[test]
fn tune_writes_the_full_grid() {
    let fx = Fixture::small();
    let dir = fx.path("tune");
    ok(&["tune", "--corpus", s(&fx.corpus_path), "--out", s(&dir)]);
    let tsv = fs::read_to_string(dir.join("grid.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 16);
    assert!(tsv.starts_with("params\tfold1\tfold2\tfold3\tfold4\tfold5\tmean\n"));
    let report = read_json(dir.join("tune.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 15);
    assert!(report["best_score"].as_f64().unwrap() > 0.9);
}

#[test]
fn vectorize_exports_one_row_per_record() {
    let fx = Fixture::small();
    let out = fx.path("vectors.tsv");
    ok(&[
        "vectorize",
        "--vectorizer",
        "w2v_table_2",
        "--table2",
        s(&fx.table2),
        "--corpus",
        s(&fx.corpus_path),
        "--output",
        s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# feature_space=w2v_table_2:"));
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(header.len(), 2 + 30);
    assert_eq!(lines.count(), 400);

    let dir = train_lr(&fx, "run");
    let tfidf = ok(&[
        "vectorize",
        "--from-model",
        s(&dir.join("model.json")),
        "--corpus",
        s(&fx.corpus_path),
    ]);
    let text = String::from_utf8(tfidf.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split('\t')
        .skip(2)
        .map(|v| v.parse().unwrap())
        .collect();
    let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn split_parts_partition_the_corpus() {
    let fx = Fixture::small();
    let dir = fx.path("parts");
    ok(&[
        "split",
        "--corpus",
        s(&fx.corpus_path),
        "--out",
        s(&dir),
        "--fractions",
        "0.6,0.2,0.2",
    ]);
    let mut ids = Vec::new();
    for part in ["train", "meta", "validation"] {
        let records = load_corpus(dir.join(format!("{part}.tsv")), CorpusFormat::Tsv).unwrap();
        let pos = records.iter().filter(|r| r.label == Some(1)).count();
        assert_eq!(pos * 2, records.len(), "{part}");
        ids.extend(records.into_iter().map(|r| r.id));
    }
    ids.sort();
    let mut all: Vec<String> = fx.corpus.records.iter().map(|r| r.id.clone()).collect();
    all.sort();
    assert_eq!(ids, all);
}
