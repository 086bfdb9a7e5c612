use dilifilter_core::corpus::{labels_of, split_corpus, SplitFractions};
use dilifilter_core::ensemble::{default_bank, default_meta_config, fit_ensemble};
use dilifilter_core::features::DenseVector;
use dilifilter_core::featurize::{FeatureContext, Resources, VectorizerKind};
use dilifilter_core::interpret::{
    bootstrap_coefficients, bootstrap_coefficients_with, bootstrap_resample, child_seeds,
    meta_contributions_from, top_terms, CoefficientSummary, Direction,
};
use dilifilter_core::linear::{fit_lr, LrConfig};
use dilifilter_core::synthetic::{
    embedding_table, generate_corpus, sentence_vectors, SyntheticConfig,
};
use dilifilter_core::synthetic::{PLANTED_NEGATIVE, PLANTED_POSITIVE};
use dilifilter_core::textprep::{stem, PrepConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn planted_terms_rank_in_their_top_ten() {
    let c = generate_corpus(&SyntheticConfig {
        n_docs: 240,
        topic_size: 80,
        seed: 8,
        ..SyntheticConfig::default()
    });
    let ctx = FeatureContext::<f64>::fit(PrepConfig::default(), Resources::default(), &c.records)
        .unwrap();
    let x = ctx
        .vectorize_all(VectorizerKind::Tfidf, &c.records)
        .unwrap();
    let y = labels_of(&c.records).unwrap();
    let terms = ctx.vocabulary().unwrap().terms().to_vec();
    let cfg = LrConfig::with_c(1.0);
    let s = bootstrap_coefficients(&x, &y, &cfg, 12, 3, Some(&terms)).unwrap();
    let positive_only: Vec<String> = c.positive_only.iter().map(|w| stem(w)).collect();
    let negative_only: Vec<String> = c.negative_only.iter().map(|w| stem(w)).collect();
    let top: Vec<String> = top_terms(&s, 10, Direction::Positive)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    assert!(top.iter().all(|t| !negative_only.contains(t)), "{top:?}");
    let bottom: Vec<String> = top_terms(&s, 10, Direction::Negative)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    assert!(
        bottom.iter().all(|t| !positive_only.contains(t)),
        "{bottom:?}"
    );
    let rank = |term: &str, dir| {
        top_terms(&s, s.len(), dir)
            .iter()
            .position(|(t, _)| t == term)
            .unwrap()
    };
    for w in PLANTED_POSITIVE {
        let hit = s.iter().find(|c| c.term == stem(w)).unwrap();
        assert!(hit.mean_coef > 0.0, "{w}");
        assert!(rank(&stem(w), Direction::Positive) < 10, "{w}");
    }
    for w in PLANTED_NEGATIVE {
        let hit = s.iter().find(|c| c.term == stem(w)).unwrap();
        assert!(hit.mean_coef < 0.0, "{w}");
        assert!(rank(&stem(w), Direction::Negative) < 10, "{w}");
    }

    let direct = fit_lr(&x, &y, &cfg, 0).unwrap();
    assert!(direct.weights[ctx.vocabulary().unwrap().index_of("hepatotox").unwrap()] > 0.0);
    for summary in &s {
        assert_eq!(summary.coef_samples.len(), 12);
        let mean = summary.coef_samples.iter().sum::<f64>() / 12.0;
        assert!((mean - summary.mean_coef).abs() <= 1e-12);
    }
    assert_eq!(
        bootstrap_coefficients(&x, &y, &cfg, 12, 3, Some(&terms)).unwrap(),
        s
    );
}

#[test]
fn equal_child_seeds_give_identical_samples() {
    let x: Vec<DenseVector<f64>> = (0..20)
        .map(|i| DenseVector::new(vec![i as f64 / 10.0, 1.0]))
        .collect();
    let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let seed = child_seeds(4, 1)[0];
    let r = bootstrap_resample(&y, seed).unwrap();
    let s =
        bootstrap_coefficients_with(&x, &y, &LrConfig::default(), &[r.clone(), r], None).unwrap();
    for c in s {
        assert_eq!(c.coef_samples[0], c.coef_samples[1]);
    }
}

#[test]
fn duplicated_meta_features_share_the_contribution() {
    let base: Vec<f64> = (0..60).map(|i| (i as f64 + 0.5) / 60.0).collect();
    let y: Vec<u8> = (0..60).map(|i| u8::from(i >= 30)).collect();
    let x: Vec<DenseVector<f64>> = base.iter().map(|&p| DenseVector::new(vec![p, p])).collect();
    let names = vec!["a".to_string(), "b".to_string()];
    let m = meta_contributions_from(&names, &default_meta_config(), &x, &y, 20, 9).unwrap();
    assert!(
        (m.normalized[0] - m.normalized[1]).abs() < 1e-3,
        "{:?}",
        m.normalized
    );
    assert!((m.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let single: Vec<DenseVector<f64>> = base.iter().map(|&p| DenseVector::new(vec![p])).collect();
    let m =
        meta_contributions_from(&names[..1], &default_meta_config(), &single, &y, 5, 9).unwrap();
    assert_eq!(m.normalized, vec![1.0]);
}

#[test]
fn meta_learner_contributions_are_positive_on_the_benchmark() {
    let c = generate_corpus(&SyntheticConfig::default());
    let split = split_corpus(&c.records, SplitFractions::STACKING, true, 7).unwrap();
    let res = Resources::<f64> {
        table1: Some(embedding_table(&c, "t1", 50, 0.9, 11).unwrap()),
        table2: Some(embedding_table(&c, "t2", 30, 0.8, 12).unwrap()),
        sentence_vectors: Some(sentence_vectors(&c, 24, 13).unwrap()),
    };
    let ctx = FeatureContext::fit(PrepConfig::default(), res, &split.train).unwrap();
    let m = fit_ensemble(&split, &default_bank(), &default_meta_config(), &ctx).unwrap();
    let meta_x = m.meta_features(&split.meta_train, &ctx).unwrap();
    let meta_y = labels_of(&split.meta_train).unwrap();
    let contrib =
        meta_contributions_from(&m.learner_names(), &m.meta.config, &meta_x, &meta_y, 30, 1)
            .unwrap();
    assert!(!contrib.mixed_signs, "{:?}", contrib.mean_coef);
    assert!(contrib.normalized.iter().all(|&v| v >= 0.0));
}

fn summaries() -> impl Strategy<Value = Vec<CoefficientSummary<f64>>> {
    prop::collection::vec(prop::collection::vec(-3i32..4, 1..5), 1..12).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, s)| {
                let samples: Vec<f64> = s.into_iter().map(f64::from).collect();
                CoefficientSummary {
                    term: format!("t{}", (i * 7) % 12),
                    index: i,
                    mean_coef: samples.iter().sum::<f64>() / samples.len() as f64,
                    coef_samples: samples,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn positive_scaling_keeps_the_ranking(s in summaries(), k in 0usize..12, exp in -3i32..6) {
        // Powers of two keep tied means exactly tied.
        let factor = 2f64.powi(exp);
        let scaled: Vec<CoefficientSummary<f64>> = s
            .iter()
            .map(|c| {
                let samples: Vec<f64> = c.coef_samples.iter().map(|v| v * factor).collect();
                CoefficientSummary {
                    mean_coef: samples.iter().sum::<f64>() / samples.len() as f64,
                    coef_samples: samples,
                    ..c.clone()
                }
            })
            .collect();
        for dir in [Direction::Positive, Direction::Negative] {
            let a: Vec<String> = top_terms(&s, k, dir).into_iter().map(|(t, _)| t).collect();
            let b: Vec<String> = top_terms(&scaled, k, dir).into_iter().map(|(t, _)| t).collect();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn identity_resample_reproduces_the_direct_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
    let x: Vec<DenseVector<f64>> = y
        .iter()
        .map(|&l| {
            DenseVector::new(vec![
                f64::from(l) + rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ])
        })
        .collect();
    let cfg = LrConfig::with_c(0.5);
    let identity: Vec<usize> = (0..y.len()).collect();
    let s = bootstrap_coefficients_with(&x, &y, &cfg, &[identity], None).unwrap();
    let direct = fit_lr(&x, &y, &cfg, 0).unwrap();
    for (summary, w) in s.iter().zip(&direct.weights) {
        assert_eq!(summary.mean_coef, *w);
    }
    assert_eq!(s[1].term, "dim_1");
}
