//! Confusion counts, point metrics, ROC/PR curves and their areas, and
//! overlap of false predictions across models.
//!
//! AUPRC is the average-precision step sum `Σ (R_k − R_{k−1})·P_k` over
//! distinct score thresholds in descending order. Tied scores always move
//! together through both sweeps.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::Float;

pub const AUPRC_CONVENTION: &str = "average_precision_step";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_binary(name: &str, v: &[u8]) -> Result<()> {
    match v.iter().position(|&l| l > 1) {
        Some(i) => Err(Error::InvalidData(format!(
            "{name}[{i}] = {} is not 0 or 1",
            v[i]
        ))),
        None => Ok(()),
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    if a == 0 {
        return Err(Error::InvalidData("nothing to evaluate".into()));
    }
    Ok(())
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(y_true.len(), y_pred.len())?;
    check_binary("y_true", y_true)?;
    check_binary("y_pred", y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PointMetrics<F: Float> {
    pub accuracy: F,
    pub precision: F,
    pub recall: F,
    pub f1: F,
    /// No positive predictions; precision reported as 0.
    pub precision_undefined: bool,
    /// No positive labels; recall reported as 0.
    pub recall_undefined: bool,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score<F: Float>(precision: F, recall: F) -> F {
    let s = precision + recall;
    if s == F::zero() {
        F::zero()
    } else {
        F::of(2.0) * precision * recall / s
    }
}

pub fn point_metrics<F: Float>(cm: &ConfusionMatrix) -> Result<PointMetrics<F>> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidData("empty confusion matrix".into()));
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            F::zero()
        } else {
            F::of_usize(num) / F::of_usize(den)
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    Ok(PointMetrics {
        accuracy: ratio(cm.tp + cm.tn, total),
        precision,
        recall,
        f1: f1_score(precision, recall),
        precision_undefined: cm.tp + cm.fp == 0,
        recall_undefined: cm.tp + cm.fn_ == 0,
    })
}

/// Per-threshold cumulative (tp, fp), then the positive and negative totals.
type Sweep = (Vec<(usize, usize)>, usize, usize);

/// Cumulative (tp, fp) after each distinct threshold, highest score first.
fn sweep<F: Float>(scores: &[F], y_true: &[u8]) -> Result<Sweep> {
    check_lengths(scores.len(), y_true.len())?;
    check_binary("y_true", y_true)?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {i}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if y_true[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(k + 1)
            .is_none_or(|&next| scores[next] != scores[i]);
        if last_of_group {
            steps.push((tp, fp));
        }
    }
    Ok((steps, tp, fp))
}

fn require_both(p: usize, n: usize) -> Result<()> {
    if p == 0 || n == 0 {
        return Err(Error::SingleClass("evaluation labels".into()));
    }
    Ok(())
}

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve<F: Float>(scores: &[F], y_true: &[u8]) -> Result<Vec<(F, F)>> {
    let (steps, p, n) = sweep(scores, y_true)?;
    require_both(p, n)?;
    let (pf, nf) = (F::of_usize(p), F::of_usize(n));
    let mut pts = vec![(F::zero(), F::zero())];
    pts.extend(
        steps
            .iter()
            .map(|&(tp, fp)| (F::of_usize(fp) / nf, F::of_usize(tp) / pf)),
    );
    Ok(pts)
}

/// Trapezoid area under the ROC sweep. The doubled area is accumulated in
/// integers, so the result equals the tie-aware pair count exactly.
pub fn auroc<F: Float>(scores: &[F], y_true: &[u8]) -> Result<F> {
    let (steps, p, n) = sweep(scores, y_true)?;
    require_both(p, n)?;
    let mut doubled: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for &(tp, fp) in &steps {
        doubled += ((fp - prev_fp) as u128) * ((tp + prev_tp) as u128);
        prev_tp = tp;
        prev_fp = fp;
    }
    let denom = 2 * (p as u128) * (n as u128);
    Ok(F::of(doubled as f64) / F::of(denom as f64))
}

/// PR points `(recall, precision)`, one per distinct score, highest first.
pub fn pr_curve<F: Float>(scores: &[F], y_true: &[u8]) -> Result<Vec<(F, F)>> {
    let (steps, p, _) = sweep(scores, y_true)?;
    if p == 0 {
        return Err(Error::SingleClass("no positive labels".into()));
    }
    let pf = F::of_usize(p);
    Ok(steps
        .iter()
        .map(|&(tp, fp)| (F::of_usize(tp) / pf, F::of_usize(tp) / F::of_usize(tp + fp)))
        .collect())
}

pub fn auprc<F: Float>(scores: &[F], y_true: &[u8]) -> Result<F> {
    let pts = pr_curve(scores, y_true)?;
    let mut prev_recall = F::zero();
    let mut area = F::zero();
    for (recall, precision) in pts {
        area = area + (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EvalReport<F: Float> {
    pub n: usize,
    pub threshold: F,
    pub confusion: ConfusionMatrix,
    pub accuracy: F,
    pub precision: F,
    pub recall: F,
    pub f1: F,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub auroc: F,
    pub auprc: F,
    pub auprc_convention: String,
    pub roc_points: Vec<(F, F)>,
    pub pr_points: Vec<(F, F)>,
}

/// Full report for scores thresholded at `threshold` (score ≥ threshold is positive).
pub fn evaluate<F: Float>(scores: &[F], y_true: &[u8], threshold: F) -> Result<EvalReport<F>> {
    let y_pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let cm = confusion(y_true, &y_pred)?;
    let pm = point_metrics::<F>(&cm)?;
    Ok(EvalReport {
        n: scores.len(),
        threshold,
        confusion: cm,
        accuracy: pm.accuracy,
        precision: pm.precision,
        recall: pm.recall,
        f1: pm.f1,
        precision_undefined: pm.precision_undefined,
        recall_undefined: pm.recall_undefined,
        auroc: auroc(scores, y_true)?,
        auprc: auprc(scores, y_true)?,
        auprc_convention: AUPRC_CONVENTION.to_string(),
        roc_points: roc_curve(scores, y_true)?,
        pr_points: pr_curve(scores, y_true)?,
    })
}

/// Two-column TSV with a header row.
pub fn write_curve_tsv<F: Float, W: Write>(
    mut out: W,
    header: (&str, &str),
    points: &[(F, F)],
) -> std::io::Result<()> {
    writeln!(out, "{}\t{}", header.0, header.1)?;
    for (x, y) in points {
        writeln!(out, "{x}\t{y}")?;
    }
    Ok(())
}

/// Ids of one model's false positives and false negatives.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSets {
    pub false_positives: BTreeSet<String>,
    pub false_negatives: BTreeSet<String>,
}

pub fn error_sets(ids: &[String], y_true: &[u8], y_pred: &[u8]) -> Result<ErrorSets> {
    check_lengths(ids.len(), y_true.len())?;
    confusion(y_true, y_pred)?;
    let mut out = ErrorSets::default();
    for ((id, &t), &p) in ids.iter().zip(y_true).zip(y_pred) {
        match (t, p) {
            (0, 1) => {
                out.false_positives.insert(id.clone());
            }
            (1, 0) => {
                out.false_negatives.insert(id.clone());
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Ids in exactly the listed models' error sets and no others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRegion {
    pub models: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub models: Vec<String>,
    pub false_positives: Vec<OverlapRegion>,
    pub false_negatives: Vec<OverlapRegion>,
}

/// Largest model count whose `2^m − 1` regions are enumerated.
pub const MAX_OVERLAP_MODELS: usize = 20;

/// Venn-region cardinalities for every nonempty subset of models.
pub fn error_overlap(per_model: &BTreeMap<String, ErrorSets>) -> Result<OverlapReport> {
    let models: Vec<String> = per_model.keys().cloned().collect();
    if models.len() > MAX_OVERLAP_MODELS {
        return Err(Error::InvalidData(format!(
            "overlap of {} models exceeds the limit of {MAX_OVERLAP_MODELS}",
            models.len()
        )));
    }
    let regions = |pick: fn(&ErrorSets) -> &BTreeSet<String>| {
        let mut membership: BTreeMap<&str, usize> = BTreeMap::new();
        for (bit, sets) in per_model.values().enumerate() {
            for id in pick(sets) {
                *membership.entry(id).or_default() |= 1 << bit;
            }
        }
        let mut counts = vec![0usize; 1 << models.len()];
        for mask in membership.into_values() {
            counts[mask] += 1;
        }
        (1..counts.len())
            .map(|mask| OverlapRegion {
                models: (0..models.len())
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| models[b].clone())
                    .collect(),
                count: counts[mask],
            })
            .collect::<Vec<_>>()
    };
    Ok(OverlapReport {
        false_positives: regions(|s| &s.false_positives),
        false_negatives: regions(|s| &s.false_negatives),
        models,
    })
}
