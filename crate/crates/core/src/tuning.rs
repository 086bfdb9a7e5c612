//! Stratified k-fold cross-validation and exhaustive grid search on accuracy.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::fingerprint::Fingerprinter;
use crate::float::Float;
use crate::forest::{fit_rf, RfConfig};
use crate::linear::{fit_lr, ClassWeight, LrConfig};

pub const DEFAULT_FOLDS: usize = 5;

/// Fold index of every sample. Each class is shuffled on its own, then the
/// classes are dealt round-robin onto folds with one running counter, so
/// fold sizes differ by at most one overall and per class.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if let Some(l) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidData(format!("label {l} is not 0 or 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for class in 0..=1u8 {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < folds {
            return Err(Error::InvalidData(format!(
                "class {class} has {} samples, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Hash of fold membership, used to show that grid points share folds.
pub fn fold_fingerprint(assignment: &[usize]) -> String {
    let mut h = Fingerprinter::new();
    for &f in assignment {
        h.u64(f as u64);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CvResult<F: Float> {
    pub per_fold: Vec<F>,
    pub mean: F,
}

/// A fold's training and held-out rows.
pub struct Fold<'a, X> {
    pub train_x: Vec<&'a X>,
    pub train_y: Vec<u8>,
    pub test_x: Vec<&'a X>,
    pub test_y: Vec<u8>,
}

fn fold<'a, X>(x: &'a [X], y: &[u8], assignment: &[usize], k: usize) -> Fold<'a, X> {
    let mut f = Fold {
        train_x: Vec::new(),
        train_y: Vec::new(),
        test_x: Vec::new(),
        test_y: Vec::new(),
    };
    for (i, (row, &label)) in x.iter().zip(y).enumerate() {
        if assignment[i] == k {
            f.test_x.push(row);
            f.test_y.push(label);
        } else {
            f.train_x.push(row);
            f.train_y.push(label);
        }
    }
    f
}

/// Scores every fold with `score` and averages; folds run in parallel.
pub fn cross_validate_by<F, X, S>(
    x: &[X],
    y: &[u8],
    assignment: &[usize],
    score: S,
) -> Result<CvResult<F>>
where
    F: Float,
    X: Sync,
    S: Fn(&Fold<'_, X>) -> Result<F> + Sync,
{
    if x.len() != y.len() || y.len() != assignment.len() {
        return Err(Error::InvalidData(format!(
            "{} rows, {} labels, {} fold assignments",
            x.len(),
            y.len(),
            assignment.len()
        )));
    }
    let folds = assignment.iter().max().map_or(0, |m| m + 1);
    let per_fold = (0..folds)
        .into_par_iter()
        .map(|k| score(&fold(x, y, assignment, k)).map_err(|e| e.context(format!("fold {k}"))))
        .collect::<Result<Vec<F>>>()?;
    let mean = per_fold.iter().copied().sum::<F>() / F::of_usize(folds);
    Ok(CvResult { per_fold, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig<F: Float> {
    Lr(LrConfig<F>),
    Rf(RfConfig),
}

impl<F: Float> ModelConfig<F> {
    /// Short parameter description for result tables.
    pub fn describe(&self) -> String {
        match self {
            ModelConfig::Lr(c) => format!(
                "penalty_strength={} class_weight={}",
                c.penalty_strength, c.class_weight
            ),
            ModelConfig::Rf(c) => {
                format!("max_depth={} n_estimators={}", c.max_depth, c.n_estimators)
            }
        }
    }
}

fn accuracy<F: Float>(pred: &[u8], truth: &[u8]) -> F {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    F::of_usize(hits) / F::of_usize(truth.len())
}

/// Held-out accuracy of `config` trained on the fold's training rows.
pub fn fold_accuracy<F: Float, X: FeatureRow<F> + Sync>(
    config: &ModelConfig<F>,
    fold: &Fold<'_, X>,
    seed: u64,
) -> Result<F> {
    let pred: Vec<u8> = match config {
        ModelConfig::Lr(c) => {
            let m = fit_lr(&fold.train_x, &fold.train_y, c, seed)?;
            fold.test_x
                .iter()
                .map(|x| m.predict(x))
                .collect::<Result<_>>()?
        }
        ModelConfig::Rf(c) => {
            let m = fit_rf(&fold.train_x, &fold.train_y, c)?;
            fold.test_x
                .iter()
                .map(|x| m.predict(x, F::of(0.5)))
                .collect::<Result<_>>()?
        }
    };
    Ok(accuracy(&pred, &fold.test_y))
}

pub fn cross_validate<F: Float, X: FeatureRow<F> + Sync>(
    x: &[X],
    y: &[u8],
    config: &ModelConfig<F>,
    folds: usize,
    seed: u64,
) -> Result<CvResult<F>> {
    let assignment = stratified_folds(y, folds, seed)?;
    cross_validate_by(x, y, &assignment, |f| fold_accuracy(config, f, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridAxes<F: Float> {
    Lr {
        penalty_strength: Vec<F>,
        class_weight: Vec<ClassWeight<F>>,
        #[serde(default)]
        base: LrConfig<F>,
    },
    Rf {
        n_estimators: Vec<usize>,
        max_depth: Vec<usize>,
        #[serde(default)]
        base: RfConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSpec<F: Float> {
    pub axes: GridAxes<F>,
    pub folds: usize,
    #[serde(default)]
    pub objective: Objective,
}

impl<F: Float> GridSpec<F> {
    /// Default LR grid: C ∈ {0.01, 0.1, 1, 10, 100} and weights {1:1, 2:1, 4:1}.
    pub fn default_lr() -> Self {
        GridSpec {
            axes: GridAxes::Lr {
                penalty_strength: [0.01, 0.1, 1.0, 10.0, 100.0].map(F::of).to_vec(),
                class_weight: [1.0, 2.0, 4.0]
                    .map(|p| ClassWeight::new(F::of(p), F::one()))
                    .to_vec(),
                base: LrConfig::default(),
            },
            folds: DEFAULT_FOLDS,
            objective: Objective::Accuracy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        let empty = match &self.axes {
            GridAxes::Lr {
                penalty_strength,
                class_weight,
                ..
            } => penalty_strength.is_empty() || class_weight.is_empty(),
            GridAxes::Rf {
                n_estimators,
                max_depth,
                ..
            } => n_estimators.is_empty() || max_depth.is_empty(),
        };
        if empty {
            return Err(Error::InvalidConfig("every grid axis needs a value".into()));
        }
        for p in self.points() {
            match p {
                ModelConfig::Lr(c) => c.validate()?,
                ModelConfig::Rf(c) => c.validate()?,
            }
        }
        Ok(())
    }

    /// Grid points, strongest regularization first: LR by C then class
    /// weight, RF by depth then tree count.
    pub fn points(&self) -> Vec<ModelConfig<F>> {
        match &self.axes {
            GridAxes::Lr {
                penalty_strength,
                class_weight,
                base,
            } => {
                let mut cs = penalty_strength.clone();
                cs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
                cs.dedup();
                let mut ws = class_weight.clone();
                ws.sort_by(|a, b| {
                    (a.positive, a.negative)
                        .partial_cmp(&(b.positive, b.negative))
                        .expect("finite grid values")
                });
                ws.dedup();
                cs.iter()
                    .flat_map(|&c| {
                        ws.iter().map(move |&w| {
                            ModelConfig::Lr(LrConfig {
                                penalty_strength: c,
                                class_weight: w,
                                ..*base
                            })
                        })
                    })
                    .collect()
            }
            GridAxes::Rf {
                n_estimators,
                max_depth,
                base,
            } => {
                let mut ds = max_depth.clone();
                ds.sort_unstable();
                ds.dedup();
                let mut ns = n_estimators.clone();
                ns.sort_unstable();
                ns.dedup();
                ds.iter()
                    .flat_map(|&d| {
                        ns.iter().map(move |&n| {
                            ModelConfig::Rf(RfConfig {
                                max_depth: d,
                                n_estimators: n,
                                ..*base
                            })
                        })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridRow<F: Float> {
    pub config: ModelConfig<F>,
    pub cv: CvResult<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridResult<F: Float> {
    pub rows: Vec<GridRow<F>>,
    pub best: usize,
    pub fold_fingerprint: String,
    pub seed: u64,
}

impl<F: Float> GridResult<F> {
    pub fn best_config(&self) -> &ModelConfig<F> {
        &self.rows[self.best].config
    }

    pub fn best_score(&self) -> F {
        self.rows[self.best].cv.mean
    }

    /// One row per grid point: parameters, per-fold accuracies, mean.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let folds = self.rows.first().map_or(0, |r| r.cv.per_fold.len());
        write!(out, "params")?;
        for k in 1..=folds {
            write!(out, "\tfold{k}")?;
        }
        writeln!(out, "\tmean")?;
        for r in &self.rows {
            write!(out, "{}", r.config.describe())?;
            for v in &r.cv.per_fold {
                write!(out, "\t{v}")?;
            }
            writeln!(out, "\t{}", r.cv.mean)?;
        }
        Ok(())
    }
}

/// Cross-validates every grid point on one shared fold assignment and picks
/// the first point (in [`GridSpec::points`] order) with the highest mean.
pub fn grid_search<F: Float, X: FeatureRow<F> + Sync>(
    x: &[X],
    y: &[u8],
    grid: &GridSpec<F>,
    seed: u64,
) -> Result<GridResult<F>> {
    grid.validate()?;
    let assignment = stratified_folds(y, grid.folds, seed)?;
    let points = grid.points();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..grid.folds).map(move |k| (p, k)))
        .collect();
    let scores = tasks
        .par_iter()
        .map(|&(p, k)| {
            fold_accuracy(&points[p], &fold(x, y, &assignment, k), seed)
                .map_err(|e| e.context(format!("grid point {}, fold {k}", points[p].describe())))
        })
        .collect::<Result<Vec<F>>>()?;

    let rows: Vec<GridRow<F>> = points
        .into_iter()
        .zip(scores.chunks(grid.folds))
        .map(|(config, per_fold)| GridRow {
            config,
            cv: CvResult {
                per_fold: per_fold.to_vec(),
                mean: per_fold.iter().copied().sum::<F>() / F::of_usize(grid.folds),
            },
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.cv.mean > rows[best].cv.mean {
            best = i;
        }
    }
    Ok(GridResult {
        rows,
        best,
        fold_fingerprint: fold_fingerprint(&assignment),
        seed,
    })
}
