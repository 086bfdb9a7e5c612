use dilifilter_core::features::{DenseVector, SparseVector};
use dilifilter_core::forest::{fit_rf, gini, FittedForest, Node, RfConfig};
use proptest::prelude::*;

/// Gini straight from a list of labels.
fn gini_of(labels: &[u8]) -> f64 {
    let n = labels.len() as f64;
    let p1 = labels.iter().filter(|&&l| l == 1).count() as f64 / n;
    let p0 = labels.iter().filter(|&&l| l == 0).count() as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

#[test]
fn gini_matches_enumerated_label_sets() {
    for n in 1..=8usize {
        for mask in 0u32..(1 << n) {
            let labels: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            assert!((gini::<f64>(pos, n - pos) - gini_of(&labels)).abs() < 1e-15);
        }
    }
}

/// Every (feature, midpoint) split scored by weighted child Gini; the first
/// minimum in (feature, threshold) order wins.
fn best_split(x: &[Vec<f64>], y: &[u8]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<u8> = x
                .iter()
                .zip(y)
                .filter(|(r, _)| r[j] <= t)
                .map(|(_, &l)| l)
                .collect();
            let right: Vec<u8> = x
                .iter()
                .zip(y)
                .filter(|(r, _)| r[j] > t)
                .map(|(_, &l)| l)
                .collect();
            let n = y.len() as f64;
            let score =
                left.len() as f64 / n * gini_of(&left) + right.len() as f64 / n * gini_of(&right);
            if best.is_none_or(|(_, _, s)| score < s - 1e-12) {
                best = Some((j, t, score));
            }
        }
    }
    best.map(|(j, t, _)| (j, t))
}

fn stump() -> RfConfig {
    RfConfig {
        n_estimators: 1,
        max_depth: 1,
        max_features: 1.0,
        min_samples_leaf: 1,
        seed: 0,
        bootstrap: false,
    }
}

fn root(f: &FittedForest<f64>) -> Option<(usize, f64)> {
    match f.trees[0].root() {
        Node::Split {
            feature, threshold, ..
        } => Some((*feature, *threshold)),
        Node::Leaf { .. } => None,
    }
}

#[test]
fn one_dimensional_clusters_split_between_them() {
    let xs = [-4.0, -3.5, -2.0, -1.0, 0.5, 1.5, 2.0, 3.0];
    let x: Vec<DenseVector<f64>> = xs.iter().map(|&v| DenseVector::new(vec![v])).collect();
    let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
    let f = fit_rf(&x, &y, &stump()).unwrap();
    let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    assert_eq!(root(&f), best_split(&rows, &y));
    assert_eq!(root(&f), Some((0, -0.25)));
    for (xi, &yi) in x.iter().zip(&y) {
        assert_eq!(f.predict(xi, 0.5).unwrap(), yi);
    }
}

fn small_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (1usize..4, 2usize..14).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec((0i32..6).prop_map(f64::from), d), n),
            prop::collection::vec(0u8..=1, n),
        )
    })
}

proptest! {
    #[test]
    fn root_split_equals_exhaustive_search((rows, mut y) in small_dataset()) {
        y[0] = 0;
        y[1] = 1;
        let x: Vec<DenseVector<f64>> = rows.iter().cloned().map(DenseVector::new).collect();
        let f = fit_rf(&x, &y, &stump()).unwrap();
        prop_assert_eq!(root(&f), best_split(&rows, &y));
    }

    #[test]
    fn sparse_and_dense_grow_the_same_forest((rows, mut y) in small_dataset(), seed in any::<u64>()) {
        y[0] = 0;
        y[1] = 1;
        let dense: Vec<DenseVector<f64>> = rows.iter().cloned().map(DenseVector::new).collect();
        let sparse: Vec<SparseVector<f64>> = rows
            .iter()
            .map(|r| SparseVector::from_pairs(r.len(), r.iter().copied().enumerate().collect()).unwrap())
            .collect();
        let cfg = RfConfig { n_estimators: 4, max_depth: 3, max_features: 0.5, seed, ..stump() };
        let a = fit_rf(&dense, &y, &cfg).unwrap();
        let b = fit_rf(&sparse, &y, &cfg).unwrap();
        prop_assert_eq!(&a.trees, &b.trees);
        for t in &a.trees {
            prop_assert!(t.depth() <= 3);
        }
        let probe = DenseVector::new(vec![2.5; rows[0].len()]);
        let p = a.predict_proba(&probe).unwrap();
        let each: Vec<f64> = a.trees.iter().map(|t| t.predict_proba(&probe)).collect();
        let lo = each.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = each.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo - 1e-15 && p <= hi + 1e-15);
    }
}
