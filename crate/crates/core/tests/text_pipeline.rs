use std::collections::BTreeSet;

use dilifilter_core::features::FeatureRow;
use dilifilter_core::textprep::{preprocess, stem, PrepConfig, StopwordList, TokenSeq};
use dilifilter_core::vectorize::{bow_vector, fit_vocabulary, tfidf_vector};
use proptest::prelude::*;

const PORTER_SAMPLE: &str = include_str!("fixtures/porter_sample.tsv");

#[test]
fn porter_vocabulary_agreement() {
    let mut total = 0;
    let mut agree = 0;
    for line in PORTER_SAMPLE.lines() {
        let (word, expected) = line.split_once('\t').expect("word<TAB>stem");
        total += 1;
        if stem(word) == expected {
            agree += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    assert!(total > 5000);
    assert!(rate >= 0.99, "{agree}/{total} = {rate}");
    assert_eq!(stem("hepatotoxicity"), "hepatotox");
    assert_eq!(stem("caresses"), "caress");
    assert_eq!(stem("liver"), "liver");
}

fn no_stem() -> PrepConfig {
    PrepConfig {
        stemming: false,
        ..PrepConfig::default()
    }
}

#[test]
fn hand_traced_example() {
    let t = preprocess("Drug-Induced Liver Injury: 3 cases!", &no_stem()).unwrap();
    assert_eq!(
        t.iter().collect::<Vec<_>>(),
        ["drug", "induced", "liver", "injury", "cases"]
    );
    assert!(preprocess("", &no_stem()).unwrap().is_empty());
    assert!(preprocess("the of and", &no_stem()).unwrap().is_empty());
}

/// Idf written out by hand for the three-document fixture.
fn idf(n: f64, df: f64) -> f64 {
    ((1.0 + n) / (1.0 + df)).ln() + 1.0
}

#[test]
fn three_document_tfidf_fixture() {
    let docs: Vec<TokenSeq> = vec![
        ["liver", "injury"].into_iter().collect(),
        ["liver", "drug"].into_iter().collect(),
        ["drug", "trial"].into_iter().collect(),
    ];
    let v = fit_vocabulary(&docs).unwrap();
    let expected = [
        [("liver", idf(3.0, 2.0)), ("injury", idf(3.0, 1.0))],
        [("liver", idf(3.0, 2.0)), ("drug", idf(3.0, 2.0))],
        [("drug", idf(3.0, 2.0)), ("trial", idf(3.0, 1.0))],
    ];
    for (doc, raw) in docs.iter().zip(expected) {
        let t = tfidf_vector::<f64>(doc, &v);
        let norm = (raw[0].1 * raw[0].1 + raw[1].1 * raw[1].1).sqrt();
        for (term, value) in raw {
            let got = t.value(v.index_of(term).unwrap());
            assert!((got - value / norm).abs() < 1e-9, "{term}: {got}");
        }
        assert!((t.norm() - 1.0).abs() < 1e-12);
        assert_eq!(t.nnz(), 2);
    }
    assert!((v.idf::<f64>("liver").unwrap() - ((4.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
    assert!((v.idf::<f64>("injury").unwrap() - (2f64.ln() + 1.0)).abs() < 1e-12);
    let first = tfidf_vector::<f64>(&docs[0], &v);
    assert!(first.value(v.index_of("injury").unwrap()) > first.value(v.index_of("liver").unwrap()));
    assert!(tfidf_vector::<f64>(&TokenSeq::default(), &v).is_empty());
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "liver",
        "livers",
        "hepatic",
        "hepatotoxicity",
        "injury",
        "injuries",
        "drug",
        "drugs",
        "trial",
        "trials",
        "caused",
        "causing",
        "cause",
        "report",
        "reported",
        "safety",
        "the",
        "and",
        "of",
        "enzyme",
        "enzymes",
        "elevation",
        "elevated",
    ])
    .prop_map(str::to_string)
}

fn docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 1..12), 1..10)
}

fn tokenize(docs: &[Vec<String>], config: &PrepConfig) -> Vec<TokenSeq> {
    docs.iter()
        .map(|d| preprocess(&d.join(" "), config).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn tokens_are_clean(raw in "\\PC{0,80}", stemming in any::<bool>(), min in 1usize..4) {
        let config = PrepConfig { stemming, min_token_length: min, ..PrepConfig::default() };
        let stop = StopwordList::pinned("v1").unwrap();
        let t = preprocess(&raw, &config).unwrap();
        for tok in t.iter() {
            prop_assert!(!tok.is_empty() && tok.bytes().all(|b| b.is_ascii_lowercase()));
            prop_assert!(tok.len() >= min);
            prop_assert!(!stop.contains(tok));
        }
        prop_assert_eq!(&t, &preprocess(&raw, &config).unwrap());
    }

    #[test]
    fn preprocessing_its_own_output_is_a_fixed_point(raw in "[a-zA-Z0-9 ,.;:()-]{0,120}") {
        let t = preprocess(&raw, &no_stem()).unwrap();
        prop_assert_eq!(&preprocess(&t.joined(), &no_stem()).unwrap(), &t);
    }

    #[test]
    fn stemming_never_grows_the_vocabulary(d in docs()) {
        let stemmed: BTreeSet<String> = tokenize(&d, &PrepConfig::default())
            .iter().flat_map(|t| t.iter().map(str::to_string).collect::<Vec<_>>()).collect();
        let plain: BTreeSet<String> = tokenize(&d, &no_stem())
            .iter().flat_map(|t| t.iter().map(str::to_string).collect::<Vec<_>>()).collect();
        prop_assert!(stemmed.len() <= plain.len());
    }

    #[test]
    fn vectorizer_invariants(d in docs()) {
        let toks = tokenize(&d, &PrepConfig::default());
        prop_assume!(toks.iter().any(|t| !t.is_empty()));
        let v = fit_vocabulary(&toks).unwrap();
        prop_assert_eq!(v.n_docs(), toks.len());
        for (i, term) in v.terms().iter().enumerate() {
            prop_assert_eq!(v.index_of(term), Some(i));
            let df = v.df(term).unwrap();
            prop_assert!(df >= 1 && df <= v.n_docs());
        }
        for t in &toks {
            let bow = bow_vector::<f64>(t, &v);
            let total: f64 = bow.iter().map(|(_, c)| c).sum();
            // Nothing from the training set is out of vocabulary.
            prop_assert_eq!(total as usize, t.len());
            prop_assert!(bow.iter().all(|(_, c)| c >= 1.0 && c.fract() == 0.0));
            let tf = tfidf_vector::<f64>(t, &v);
            if !tf.is_empty() {
                prop_assert!((tf.norm() - 1.0).abs() <= 1e-12);
            }
        }
        for a in v.terms() {
            for b in v.terms() {
                if v.df(a) < v.df(b) {
                    prop_assert!(v.idf::<f64>(a).unwrap() > v.idf::<f64>(b).unwrap());
                }
            }
        }
    }
}
