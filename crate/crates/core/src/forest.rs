//! Random forest of Gini-split CART trees over bootstrap resamples.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{batch_dim, FeatureRow};
use crate::float::Float;
use crate::linear::training_fingerprint;

pub const RF_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_estimators: usize,
    /// Maximum number of splits on any root-to-leaf path.
    pub max_depth: usize,
    /// Fraction of features examined at each node.
    pub max_features: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
    /// Train each tree on a bootstrap resample instead of the full set.
    pub bootstrap: bool,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_estimators: 100,
            max_depth: 10,
            max_features: 0.1,
            min_samples_leaf: 1,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "n_estimators, max_depth and min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max_features must lie in (0, 1], got {}",
                self.max_features
            )));
        }
        Ok(())
    }

    fn features_per_node(&self, dim: usize) -> usize {
        ((self.max_features * dim as f64).ceil() as usize).clamp(1, dim.max(1))
    }
}

/// Preorder node list; a split's left child immediately follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(rename_all = "snake_case")]
pub enum Node<F: Float> {
    Split {
        feature: usize,
        threshold: F,
        right: usize,
    },
    /// `[P(class 0), P(class 1)]`.
    Leaf { probability: [F; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<F: Float> {
    pub nodes: Vec<Node<F>>,
}

impl<F: Float> DecisionTree<F> {
    /// Positive-class probability of the leaf reached by `x`.
    pub fn predict_proba<X: FeatureRow<F>>(&self, x: &X) -> F {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probability } => return probability[1],
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    at = if x.value(*feature) <= *threshold {
                        at + 1
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<F: Float>(nodes: &[Node<F>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { right, .. } => 1 + walk(nodes, at + 1).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root(&self) -> &Node<F> {
        &self.nodes[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FittedForest<F: Float> {
    pub trees: Vec<DecisionTree<F>>,
    pub config: RfConfig,
    pub dim: usize,
    pub feature_space_id: String,
    pub training_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct RfDocument<F: Float> {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    forest: FittedForest<F>,
}

impl<F: Float> FittedForest<F> {
    pub fn bound_to(mut self, feature_space_id: impl Into<String>) -> Self {
        self.feature_space_id = feature_space_id.into();
        self
    }

    /// Mean positive-class leaf probability over the trees.
    pub fn predict_proba<X: FeatureRow<F>>(&self, x: &X) -> Result<F> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        let sum: F = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        Ok(sum / F::of_usize(self.trees.len()))
    }

    pub fn predict<X: FeatureRow<F>>(&self, x: &X, threshold: F) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = RfDocument {
            schema_version: RF_SCHEMA_VERSION,
            kind: "rf".to_string(),
            forest: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: RfDocument<F> = serde_json::from_str(json)?;
        if doc.kind != "rf" || doc.schema_version != RF_SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "expected rf schema {RF_SCHEMA_VERSION}, found {} schema {}",
                doc.kind, doc.schema_version
            )));
        }
        Ok(doc.forest)
    }
}

/// Gini impurity `1 − p0² − p1²` of a node with the given class counts.
pub fn gini<F: Float>(positives: usize, negatives: usize) -> F {
    let n = positives + negatives;
    if n == 0 {
        return F::zero();
    }
    let n = F::of_usize(n);
    let p1 = F::of_usize(positives) / n;
    let p0 = F::of_usize(negatives) / n;
    F::one() - p0 * p0 - p1 * p1
}

pub fn fit_rf<F: Float, X: FeatureRow<F> + Sync>(
    x: &[X],
    y: &[u8],
    config: &RfConfig,
) -> Result<FittedForest<F>> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::InvalidData(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = batch_dim(x)?;
    if let Some(l) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidData(format!("label {l} is not 0 or 1")));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass("training labels".into()));
    }
    if let Some(i) = x.iter().position(|r| !r.all_finite()) {
        return Err(Error::NonFinite(format!("feature row {i}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tree_seeds: Vec<u64> = (0..config.n_estimators).map(|_| rng.gen()).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<usize> = if config.bootstrap {
                (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut builder = TreeBuilder {
                x,
                y,
                config,
                dim,
                rng,
                nodes: Vec::new(),
            };
            builder.grow(sample, 0);
            DecisionTree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(FittedForest {
        trees,
        config: *config,
        dim,
        feature_space_id: String::new(),
        training_fingerprint: training_fingerprint(x, y),
    })
}

struct TreeBuilder<'a, F: Float, X: FeatureRow<F>> {
    x: &'a [X],
    y: &'a [u8],
    config: &'a RfConfig,
    dim: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<F>>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate<F> {
    feature: usize,
    threshold: F,
    purity: Purity,
}

/// `Σ_child (c0² + c1²) / n_child` as an exact fraction. The size-weighted
/// Gini of a split is `n − purity`, so the best split has the largest purity.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_split(left: (usize, usize), right: (usize, usize)) -> Self {
        let sq = |(a, b): (usize, usize)| (a * a + b * b) as u128;
        let nl = (left.0 + left.1) as u128;
        let nr = (right.0 + right.1) as u128;
        Purity {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn exceeds(&self, other: &Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

impl<F: Float, X: FeatureRow<F>> TreeBuilder<'_, F, X> {
    fn grow(&mut self, sample: Vec<usize>, depth: usize) {
        let pos = sample.iter().filter(|&&i| self.y[i] == 1).count();
        let n = sample.len();
        let leaf = |pos: usize| {
            let p1 = F::of_usize(pos) / F::of_usize(n);
            Node::Leaf {
                probability: [F::one() - p1, p1],
            }
        };
        let pure = pos == 0 || pos == n;
        if pure || depth >= self.config.max_depth || n < 2 * self.config.min_samples_leaf {
            self.nodes.push(leaf(pos));
            return;
        }
        let Some(best) = self.best_split(&sample) else {
            self.nodes.push(leaf(pos));
            return;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = sample
            .into_iter()
            .partition(|&i| self.x[i].value(best.feature) <= best.threshold);

        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            right: 0,
        });
        self.grow(left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(right, depth + 1);
    }

    fn best_split(&mut self, sample: &[usize]) -> Option<Candidate<F>> {
        let k = self.config.features_per_node(self.dim);
        let mut features = index::sample(&mut self.rng, self.dim, k).into_vec();
        features.sort_unstable();
        let min_leaf = self.config.min_samples_leaf;
        let n = sample.len();
        let total_pos = sample.iter().filter(|&&i| self.y[i] == 1).count();

        let mut best: Option<Candidate<F>> = None;
        let mut column: Vec<(F, u8)> = Vec::with_capacity(n);
        for feature in features {
            column.clear();
            column.extend(
                sample
                    .iter()
                    .map(|&i| (self.x[i].value(feature), self.y[i])),
            );
            column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_pos = 0;
            for p in 1..n {
                left_pos += usize::from(column[p - 1].1);
                if column[p - 1].0 == column[p].0 || p < min_leaf || n - p < min_leaf {
                    continue;
                }
                let purity = Purity::of_split(
                    (left_pos, p - left_pos),
                    (total_pos - left_pos, (n - p) - (total_pos - left_pos)),
                );
                if best.is_none_or(|b| purity.exceeds(&b.purity)) {
                    let (lo, hi) = (column[p - 1].0, column[p].0);
                    let mid = (lo + hi) * F::of(0.5);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        feature,
                        threshold,
                        purity,
                    });
                }
            }
        }
        best
    }
}
