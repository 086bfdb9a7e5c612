//! Class-weighted, L2-regularized binary logistic regression.
//!
//! The fitted parameters minimize
//!
//! ```text
//! (1/n) Σ s_i · [softplus(z_i) − y_i z_i]  +  ‖w‖² / (2 C n),   z_i = w·x_i + b
//! ```
//!
//! where `s_i` is the weight of sample `i`'s class and `C` is the inverse
//! regularization strength (larger `C` means a weaker penalty). The bias is
//! not penalized. The optimizer is full-batch gradient descent: each
//! iteration proposes a Barzilai–Borwein step and halves it until the Armijo
//! sufficient-decrease test passes, so the objective never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{batch_dim, FeatureRow};
use crate::fingerprint::Fingerprinter;
use crate::float::{sigmoid, softplus, Float};

pub const LR_SCHEMA_VERSION: u32 = 1;

/// Per-class multipliers of the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClassWeight<F: Float> {
    pub positive: F,
    pub negative: F,
}

impl<F: Float> ClassWeight<F> {
    pub fn new(positive: F, negative: F) -> Self {
        ClassWeight { positive, negative }
    }

    pub fn balanced() -> Self {
        ClassWeight::new(F::one(), F::one())
    }

    fn of(&self, label: u8) -> F {
        if label == 1 {
            self.positive
        } else {
            self.negative
        }
    }
}

impl<F: Float> std::fmt::Display for ClassWeight<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.positive, self.negative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct LrConfig<F: Float> {
    /// Inverse regularization strength `C`.
    pub penalty_strength: F,
    pub class_weight: ClassWeight<F>,
    pub max_iterations: usize,
    /// Stop once the gradient infinity-norm is at most this.
    pub tolerance: F,
    pub threshold: F,
}

impl<F: Float> Default for LrConfig<F> {
    fn default() -> Self {
        LrConfig {
            penalty_strength: F::one(),
            class_weight: ClassWeight::balanced(),
            max_iterations: 5000,
            tolerance: F::of(1e-6),
            threshold: F::of(0.5),
        }
    }
}

impl<F: Float> LrConfig<F> {
    pub fn with_c(penalty_strength: F) -> Self {
        LrConfig {
            penalty_strength,
            ..LrConfig::default()
        }
    }

    pub fn class_weight(mut self, weight: ClassWeight<F>) -> Self {
        self.class_weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: F| v.is_finite() && v > F::zero();
        if !positive(self.penalty_strength) {
            return Err(Error::InvalidConfig(format!(
                "penalty strength must be positive, got {}",
                self.penalty_strength
            )));
        }
        if !positive(self.class_weight.positive) || !positive(self.class_weight.negative) {
            return Err(Error::InvalidConfig(format!(
                "class weights must be positive, got {}",
                self.class_weight
            )));
        }
        if !positive(self.tolerance) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "tolerance and max_iterations must be positive".into(),
            ));
        }
        if !(self.threshold > F::zero() && self.threshold < F::one()) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// The training objective over a fixed data set, exposed so that the
/// analytic gradient can be checked independently.
pub struct LogisticObjective<'a, F: Float, X: FeatureRow<F>> {
    x: &'a [X],
    y: &'a [u8],
    /// Class weight of each sample divided by `n`.
    scaled_weight: Vec<F>,
    /// `1 / (C n)`; zero disables the penalty.
    l2: F,
    dim: usize,
}

impl<'a, F: Float, X: FeatureRow<F>> LogisticObjective<'a, F, X> {
    /// `penalty_strength = None` gives the unpenalized objective.
    pub fn new(
        x: &'a [X],
        y: &'a [u8],
        class_weight: ClassWeight<F>,
        penalty_strength: Option<F>,
    ) -> Result<Self> {
        check_training_data(x, y)?;
        let dim = batch_dim(x)?;
        let n = F::of_usize(x.len());
        let scaled_weight = y.iter().map(|&l| class_weight.of(l) / n).collect();
        let l2 = penalty_strength.map_or(F::zero(), |c| F::one() / (c * n));
        Ok(LogisticObjective {
            x,
            y,
            scaled_weight,
            l2,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margins(&self, weights: &[F], bias: F) -> Vec<F> {
        self.x.iter().map(|xi| xi.dot(weights) + bias).collect()
    }

    fn loss_from_margins(&self, weights: &[F], margins: &[F]) -> F {
        let data: F = margins
            .iter()
            .zip(self.y)
            .zip(&self.scaled_weight)
            .map(|((&z, &y), &s)| s * (softplus(z) - if y == 1 { z } else { F::zero() }))
            .sum();
        let sq: F = weights.iter().map(|&w| w * w).sum();
        data + F::of(0.5) * self.l2 * sq
    }

    fn gradient_from_margins(&self, weights: &[F], margins: &[F]) -> (Vec<F>, F) {
        let mut gw: Vec<F> = weights.iter().map(|&w| self.l2 * w).collect();
        let mut gb = F::zero();
        for ((xi, &z), (&y, &s)) in self
            .x
            .iter()
            .zip(margins)
            .zip(self.y.iter().zip(&self.scaled_weight))
        {
            let target = if y == 1 { F::one() } else { F::zero() };
            let c = s * (sigmoid(z) - target);
            gb = gb + c;
            xi.for_each_nonzero(|j, v| gw[j] = gw[j] + c * v);
        }
        (gw, gb)
    }

    pub fn loss(&self, weights: &[F], bias: F) -> F {
        self.loss_from_margins(weights, &self.margins(weights, bias))
    }

    /// Analytic gradient with respect to `(weights, bias)`.
    pub fn gradient(&self, weights: &[F], bias: F) -> (Vec<F>, F) {
        self.gradient_from_margins(weights, &self.margins(weights, bias))
    }
}

fn check_training_data<F: Float, X: FeatureRow<F>>(x: &[X], y: &[u8]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidData(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidData(
            "need at least two training samples".into(),
        ));
    }
    if let Some(l) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidData(format!("label {l} is not 0 or 1")));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass("training labels".into()));
    }
    if let Some(i) = x.iter().position(|r| !r.all_finite()) {
        return Err(Error::NonFinite(format!("feature row {i}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FittedLinearModel<F: Float> {
    pub weights: Vec<F>,
    pub bias: F,
    pub config: LrConfig<F>,
    /// Identifies the vocabulary, embedding table or meta-feature layout
    /// the weights are indexed by.
    pub feature_space_id: String,
    pub training_fingerprint: String,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: F,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct LrDocument<F: Float> {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    model: FittedLinearModel<F>,
}

impl<F: Float> FittedLinearModel<F> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn bound_to(mut self, feature_space_id: impl Into<String>) -> Self {
        self.feature_space_id = feature_space_id.into();
        self
    }

    /// Raw score `w·x + b`.
    pub fn decision<X: FeatureRow<F>>(&self, x: &X) -> Result<F> {
        if x.dim() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.dim(),
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    pub fn predict_proba<X: FeatureRow<F>>(&self, x: &X) -> Result<F> {
        self.decision(x).map(sigmoid)
    }

    /// 1 when the probability reaches the configured threshold.
    pub fn predict<X: FeatureRow<F>>(&self, x: &X) -> Result<u8> {
        self.predict_with_threshold(x, self.config.threshold)
    }

    pub fn predict_with_threshold<X: FeatureRow<F>>(&self, x: &X, threshold: F) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }

    pub fn predict_proba_batch<X: FeatureRow<F>>(&self, xs: &[X]) -> Result<Vec<F>> {
        xs.iter().map(|x| self.predict_proba(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LrDocument {
            schema_version: LR_SCHEMA_VERSION,
            kind: "lr".to_string(),
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: LrDocument<F> = serde_json::from_str(json)?;
        if doc.kind != "lr" {
            return Err(Error::InvalidData(format!(
                "expected an lr model, found `{}`",
                doc.kind
            )));
        }
        if doc.schema_version != LR_SCHEMA_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported lr schema version {}",
                doc.schema_version
            )));
        }
        if !doc.model.bias.is_finite() || doc.model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(doc.model)
    }
}

/// Hash of dimensions, labels and feature values of a training set.
pub fn training_fingerprint<F: Float, X: FeatureRow<F>>(x: &[X], y: &[u8]) -> String {
    let mut h = Fingerprinter::new();
    h.u64(x.len() as u64);
    for (row, &label) in x.iter().zip(y) {
        h.u64(row.dim() as u64).u64(u64::from(label));
        row.for_each_nonzero(|j, v| {
            h.u64(j as u64).u64(v.fingerprint_bits());
        });
        h.u64(u64::MAX);
    }
    h.finish()
}

pub fn fit_lr<F: Float, X: FeatureRow<F>>(
    x: &[X],
    y: &[u8],
    config: &LrConfig<F>,
    seed: u64,
) -> Result<FittedLinearModel<F>> {
    fit_lr_traced(x, y, config, seed).map(|(m, _)| m)
}

/// Like [`fit_lr`], also returning the objective value after every iteration.
pub fn fit_lr_traced<F: Float, X: FeatureRow<F>>(
    x: &[X],
    y: &[u8],
    config: &LrConfig<F>,
    seed: u64,
) -> Result<(FittedLinearModel<F>, Vec<F>)> {
    config.validate()?;
    let objective =
        LogisticObjective::new(x, y, config.class_weight, Some(config.penalty_strength))?;
    let dim = objective.dim();

    let mut w = vec![F::zero(); dim];
    let mut b = F::zero();
    let z = objective.margins(&w, b);
    let mut loss = objective.loss_from_margins(&w, &z);
    let (mut gw, mut gb) = objective.gradient_from_margins(&w, &z);
    let mut history = vec![loss];
    let mut step = F::one();
    let mut converged = false;
    let mut iterations = 0;
    let armijo = F::of(1e-4);

    while iterations < config.max_iterations {
        let gnorm_inf = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm_inf <= config.tolerance {
            converged = true;
            break;
        }
        let gnorm_sq = gw.iter().map(|&g| g * g).sum::<F>() + gb * gb;

        let mut accepted = None;
        for _ in 0..64 {
            let w_new: Vec<F> = w.iter().zip(&gw).map(|(&wi, &gi)| wi - step * gi).collect();
            let b_new = b - step * gb;
            let z_new = objective.margins(&w_new, b_new);
            let loss_new = objective.loss_from_margins(&w_new, &z_new);
            if loss_new.is_finite() && loss_new <= loss - armijo * step * gnorm_sq {
                accepted = Some((w_new, b_new, z_new, loss_new));
                break;
            }
            step = step * F::of(0.5);
        }
        let Some((w_new, b_new, z_new, loss_new)) = accepted else {
            // No representable step decreases the loss any further.
            break;
        };
        iterations += 1;
        let (gw_new, gb_new) = objective.gradient_from_margins(&w_new, &z_new);

        // Barzilai–Borwein proposal for the next step.
        let mut ss = (b_new - b) * (b_new - b);
        let mut sy = (b_new - b) * (gb_new - gb);
        for j in 0..dim {
            let s = w_new[j] - w[j];
            ss = ss + s * s;
            sy = sy + s * (gw_new[j] - gw[j]);
        }
        step = if sy > F::zero() && ss > F::zero() {
            (ss / sy).min(F::of(1e10)).max(F::of(1e-10))
        } else {
            step * F::of(2.0)
        };

        w = w_new;
        b = b_new;
        loss = loss_new;
        gw = gw_new;
        gb = gb_new;
        history.push(loss);
    }
    if !converged {
        let gnorm_inf = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm_inf <= config.tolerance {
            converged = true;
        } else {
            log::warn!(
                "logistic regression stopped after {iterations} iterations with gradient norm {gnorm_inf} > {}",
                config.tolerance
            );
        }
    }

    let model = FittedLinearModel {
        weights: w,
        bias: b,
        config: *config,
        feature_space_id: String::new(),
        training_fingerprint: training_fingerprint(x, y),
        seed,
        iterations,
        converged,
        final_loss: loss,
    };
    Ok((model, history))
}
