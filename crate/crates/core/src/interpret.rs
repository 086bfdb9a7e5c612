//! Bootstrap coefficient summaries, top-term rankings and normalized
//! meta-learner contributions.

use std::cmp::Ordering;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::float::Float;
use crate::linear::{fit_lr, LrConfig};

pub const DEFAULT_BOOTSTRAPS: usize = 1000;
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CoefficientSummary<F: Float> {
    pub term: String,
    pub index: usize,
    pub mean_coef: F,
    pub coef_samples: Vec<F>,
}

impl<F: Float> CoefficientSummary<F> {
    /// Linear-interpolation sample quantile, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> F {
        quantile(&self.coef_samples, q)
    }
}

pub fn quantile<F: Float>(samples: &[F], q: f64) -> F {
    if samples.is_empty() {
        return F::nan();
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let h = (s.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * F::of(h - lo as f64)
}

/// Child seed of bootstrap replicate `b`, derived up front so parallel order
/// cannot change the draws.
pub fn child_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen()).collect()
}

/// `n` indices drawn with replacement; redrawn while a class is missing.
pub fn bootstrap_resample(y: &[u8], child_seed: u64) -> Result<Vec<usize>> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidData("cannot resample an empty set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed);
    for _ in 0..MAX_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let pos = idx.iter().filter(|&&i| y[i] == 1).count();
        if pos > 0 && pos < n {
            return Ok(idx);
        }
    }
    Err(Error::SingleClass(format!(
        "every one of {MAX_REDRAWS} bootstrap draws"
    )))
}

/// Refits LR on each given resample and collects per-feature coefficients.
/// Features are named by `terms`, or `dim_<index>` when absent.
pub fn bootstrap_coefficients_with<F: Float, X: FeatureRow<F> + Sync>(
    x: &[X],
    y: &[u8],
    config: &LrConfig<F>,
    resamples: &[Vec<usize>],
    terms: Option<&[String]>,
) -> Result<Vec<CoefficientSummary<F>>> {
    if resamples.is_empty() {
        return Err(Error::InvalidConfig(
            "need at least one bootstrap sample".into(),
        ));
    }
    let fits = resamples
        .par_iter()
        .enumerate()
        .map(|(b, idx)| {
            let xs: Vec<&X> = idx.iter().map(|&i| &x[i]).collect();
            let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            fit_lr(&xs, &ys, config, b as u64)
                .map(|m| m.weights)
                .map_err(|e| e.context(format!("bootstrap sample {b}")))
        })
        .collect::<Result<Vec<Vec<F>>>>()?;
    let dim = fits[0].len();
    if let Some(t) = terms {
        if t.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.len(),
            });
        }
    }
    let b = F::of_usize(fits.len());
    Ok((0..dim)
        .map(|j| {
            let coef_samples: Vec<F> = fits.iter().map(|w| w[j]).collect();
            let mean_coef = coef_samples.iter().copied().sum::<F>() / b;
            CoefficientSummary {
                term: terms.map_or_else(|| format!("dim_{j}"), |t| t[j].clone()),
                index: j,
                mean_coef,
                coef_samples,
            }
        })
        .collect())
}

pub fn bootstrap_coefficients<F: Float, X: FeatureRow<F> + Sync>(
    x: &[X],
    y: &[u8],
    config: &LrConfig<F>,
    bootstraps: usize,
    seed: u64,
    terms: Option<&[String]>,
) -> Result<Vec<CoefficientSummary<F>>> {
    if x.len() != y.len() {
        return Err(Error::InvalidData(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let resamples = child_seeds(seed, bootstraps)
        .into_iter()
        .map(|s| bootstrap_resample(y, s))
        .collect::<Result<Vec<_>>>()?;
    bootstrap_coefficients_with(x, y, config, &resamples, terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

/// The `k` strongest terms in one direction; equal means order by term.
pub fn top_terms<F: Float>(
    summaries: &[CoefficientSummary<F>],
    k: usize,
    direction: Direction,
) -> Vec<(String, F)> {
    let mut ranked: Vec<&CoefficientSummary<F>> = summaries.iter().collect();
    ranked.sort_by(|a, b| {
        let by_value = match direction {
            Direction::Positive => b.mean_coef.partial_cmp(&a.mean_coef),
            Direction::Negative => a.mean_coef.partial_cmp(&b.mean_coef),
        };
        by_value
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.term.cmp(&b.term))
    });
    ranked
        .into_iter()
        .take(k)
        .map(|s| (s.term.clone(), s.mean_coef))
        .collect()
}

/// Term, mean and the 2.5/50/97.5% sample quantiles.
pub fn write_summary_tsv<F: Float, W: Write>(
    mut out: W,
    summaries: &[CoefficientSummary<F>],
) -> std::io::Result<()> {
    writeln!(out, "term\tmean_coef\tq025\tq500\tq975")?;
    for s in summaries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            s.term,
            s.mean_coef,
            s.quantile(0.025),
            s.quantile(0.5),
            s.quantile(0.975)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MetaContributions<F: Float> {
    pub learners: Vec<String>,
    pub mean_coef: Vec<F>,
    pub normalized: Vec<F>,
    /// Some mean coefficient was negative, so normalization used the sum of
    /// absolute values.
    pub mixed_signs: bool,
}

impl<F: Float> MetaContributions<F> {
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "learner\tmean_coef\tnormalized")?;
        for ((l, m), n) in self
            .learners
            .iter()
            .zip(&self.mean_coef)
            .zip(&self.normalized)
        {
            writeln!(out, "{l}\t{m}\t{n}")?;
        }
        Ok(())
    }
}

/// Divides by the sum when every value is non-negative, otherwise by the sum
/// of absolute values. An all-zero vector maps to equal shares.
pub fn normalize_contributions<F: Float>(mean_coef: &[F]) -> (Vec<F>, bool) {
    let mixed = mean_coef.iter().any(|&c| c < F::zero());
    let total: F = mean_coef.iter().map(|c| c.abs()).sum();
    if total == F::zero() {
        let share = F::one() / F::of_usize(mean_coef.len().max(1));
        return (vec![share; mean_coef.len()], mixed);
    }
    (mean_coef.iter().map(|&c| c / total).collect(), mixed)
}

/// Bootstraps the meta-learner fit over its probability features.
pub fn meta_contributions_from<F: Float, X: FeatureRow<F> + Sync>(
    learners: &[String],
    meta_config: &LrConfig<F>,
    meta_x: &[X],
    meta_y: &[u8],
    bootstraps: usize,
    seed: u64,
) -> Result<MetaContributions<F>> {
    let summaries = bootstrap_coefficients(
        meta_x,
        meta_y,
        meta_config,
        bootstraps,
        seed,
        Some(learners),
    )?;
    let mean_coef: Vec<F> = summaries.iter().map(|s| s.mean_coef).collect();
    let (normalized, mixed_signs) = normalize_contributions(&mean_coef);
    Ok(MetaContributions {
        learners: learners.to_vec(),
        mean_coef,
        normalized,
        mixed_signs,
    })
}
