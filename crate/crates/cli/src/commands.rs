//! Command-line surface and the command implementations.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dilifilter_core::corpus::{
    corpus_bytes, labels_of, CorpusFormat, DocumentRecord, SplitFractions,
};
use dilifilter_core::ensemble::fit_ensemble;
use dilifilter_core::featurize::{FeatureContext, VectorizerBinding, VectorizerKind};
use dilifilter_core::fingerprint::sha256_hex;
use dilifilter_core::forest::{fit_rf, RfConfig};
use dilifilter_core::interpret::{
    bootstrap_coefficients, bootstrap_coefficients_with, meta_contributions_from, top_terms,
    write_summary_tsv, Direction, MetaContributions,
};
use dilifilter_core::linear::{fit_lr, training_fingerprint};
use dilifilter_core::metrics::{
    error_overlap, error_sets, evaluate, write_curve_tsv, ConfusionMatrix, EvalReport,
};
use dilifilter_core::tuning::{grid_search, GridAxes, GridSpec, ModelConfig};
use dilifilter_core::LrConfig;
use serde::Serialize;

use crate::artifact::{
    ModelFile, ModelFileKind, Outputs, Seeds, TrainedModel, MODEL_SCHEMA_VERSION,
    REPORT_SCHEMA_VERSION,
};
use crate::config::{ModelSpec, PipelineConfig, ResourcePaths};
use crate::exit::{ConfigError, DataError};
use crate::pipeline::{
    dense_columns, join_by_id, load_resources, model_context, read_corpus, score, single_binding,
    split,
};

#[derive(Debug, Parser)]
#[command(
    name = "dilifilter",
    version,
    about = "Classify publications as DILI-relevant or not"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, vectorize, fit and evaluate on the validation slice.
    Train(TrainArgs),
    /// Score a corpus with a saved model.
    Predict(PredictArgs),
    /// Compare prediction files against labelled records.
    Evaluate(EvaluateArgs),
    /// Bootstrap coefficient importance for a saved model.
    Interpret(InterpretArgs),
    /// Cross-validated grid search on the training slice.
    Tune(TuneArgs),
    /// Write the train / meta / validation parts of a corpus.
    Split(SplitArgs),
    /// Export raw document vectors as TSV.
    Vectorize(VectorizeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ResourceArgs {
    /// Embedding table 1 (word2vec text format).
    #[arg(long)]
    pub table1: Option<PathBuf>,
    /// Embedding table 2 (word2vec text format).
    #[arg(long)]
    pub table2: Option<PathBuf>,
    /// Precomputed sentence vectors: TSV of id and values.
    #[arg(long)]
    pub sentence_vectors: Option<PathBuf>,
}

impl ResourceArgs {
    fn apply(&self, paths: &mut ResourcePaths) {
        if let Some(p) = &self.table1 {
            paths.table1 = Some(p.clone());
        }
        if let Some(p) = &self.table2 {
            paths.table2 = Some(p.clone());
        }
        if let Some(p) = &self.sentence_vectors {
            paths.sentence_vectors = Some(p.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKindArg {
    Lr,
    Rf,
    Ensemble,
}

/// Configuration file plus the flags that override it.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration (JSON). Defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature family for single models.
    #[arg(long)]
    pub vectorizer: Option<VectorizerKind>,
    /// Model family; replaces the configured model when it differs.
    #[arg(long, value_enum)]
    pub model: Option<ModelKindArg>,
    /// Inverse L2 strength `C` of a logistic-regression model.
    #[arg(long)]
    pub penalty_strength: Option<f64>,
    #[arg(long)]
    pub no_stemming: bool,
    /// Train / meta / validation fractions, e.g. `0.6,0.2,0.2`.
    #[arg(long, value_parser = parse_fractions)]
    pub fractions: Option<SplitFractions>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

fn parse_fractions(s: &str) -> Result<SplitFractions, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [train, meta, validation] => Ok(SplitFractions {
            train: *train,
            meta: *meta,
            validation: *validation,
        }),
        [train, validation] => Ok(SplitFractions {
            train: *train,
            meta: 0.0,
            validation: *validation,
        }),
        _ => Err("expected two or three comma-separated fractions".into()),
    }
}

impl ConfigArgs {
    /// The configuration file (or defaults) with flags applied, validated.
    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(out) = &self.out {
            c.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            c.split.seed = seed;
        }
        if let Some(v) = self.vectorizer {
            c.vectorizer = v;
        }
        if let Some(kind) = self.model {
            let same = matches!(
                (kind, &c.model),
                (ModelKindArg::Lr, ModelSpec::Lr(_))
                    | (ModelKindArg::Rf, ModelSpec::Rf(_))
                    | (ModelKindArg::Ensemble, ModelSpec::Ensemble(_))
            );
            if !same {
                c.model = match kind {
                    ModelKindArg::Lr => ModelSpec::Lr(LrConfig::default()),
                    ModelKindArg::Rf => ModelSpec::Rf(RfConfig::default()),
                    ModelKindArg::Ensemble => ModelSpec::Ensemble(Default::default()),
                };
            }
        }
        if let Some(cv) = self.penalty_strength {
            match &mut c.model {
                ModelSpec::Lr(lr) => lr.penalty_strength = cv,
                other => {
                    return Err(ConfigError::wrap(anyhow!(
                        "--penalty-strength applies to lr models, not {}",
                        other.kind()
                    )))
                }
            }
        }
        if self.no_stemming {
            c.prep.stemming = false;
        }
        if let Some(f) = self.fractions {
            c.split.fractions = Some(f);
        }
        self.resources.apply(&mut c.resources);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled corpus (TSV or JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus to score; labels are optional.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Decision threshold; the model's own when absent.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Predictions TSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Resource files; the paths recorded in the model when absent.
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions TSV (id, probability, label); repeat to compare models.
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<PathBuf>,
    /// Labelled corpus holding the true labels.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The corpus the model was trained from.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Bootstrap resamples; the configured count when absent.
    #[arg(long)]
    pub bootstraps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Terms listed per direction.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Refit on the unresampled training data instead of bootstrapping.
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Reuse a saved model's vocabulary and preprocessing instead of
    /// fitting a vocabulary on the corpus.
    #[arg(long)]
    pub from_model: Option<PathBuf>,
    /// Vectors TSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Interpret(a) => interpret(&a),
        Command::Tune(a) => tune(&a),
        Command::Split(a) => split_cmd(&a),
        Command::Vectorize(a) => vectorize(&a),
    }
}

#[derive(Serialize)]
struct LearnerSummary {
    name: String,
    confusion: ConfusionMatrix,
    accuracy: f64,
    f1: f64,
    auroc: f64,
    auprc: f64,
}

impl LearnerSummary {
    fn new(name: String, r: &EvalReport<f64>) -> Self {
        LearnerSummary {
            name,
            confusion: r.confusion,
            accuracy: r.accuracy,
            f1: r.f1,
            auroc: r.auroc,
            auprc: r.auprc,
        }
    }
}

#[derive(Serialize)]
struct TrainReport<'a> {
    schema_version: u32,
    command: &'static str,
    config_fingerprint: &'a str,
    seeds: Seeds,
    model_kind: &'static str,
    vectorizer: Option<VectorizerKind>,
    bindings: &'a [VectorizerBinding],
    sentence_fallback: bool,
    n_train: usize,
    n_meta: usize,
    n_validation: usize,
    validation: &'a EvalReport<f64>,
    /// Per base learner on the validation slice (ensembles only).
    base_learners: Vec<LearnerSummary>,
}

fn curve_bytes(header: (&str, &str), points: &[(f64, f64)]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    write_curve_tsv(&mut out, header, points)?;
    Ok(out)
}

fn predictions_bytes(ids: &[&str], probs: &[f64], threshold: f64) -> Vec<u8> {
    let mut out = b"id\tprobability\tlabel\n".to_vec();
    for (id, p) in ids.iter().zip(probs) {
        writeln!(out, "{id}\t{p}\t{}", u8::from(*p >= threshold)).expect("writing to memory");
    }
    out
}

fn add_report_files(
    out: &mut Outputs,
    dir: &Path,
    prefix: &str,
    report: &EvalReport<f64>,
) -> anyhow::Result<()> {
    out.add(
        dir.join(format!("{prefix}roc.tsv")),
        curve_bytes(("fpr", "tpr"), &report.roc_points)?,
    );
    out.add(
        dir.join(format!("{prefix}pr.tsv")),
        curve_bytes(("recall", "precision"), &report.pr_points)?,
    );
    Ok(())
}

fn report_outputs(out: &Outputs) {
    for p in out.paths() {
        log::info!("wrote {}", p.display());
    }
}

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let config = args.config.resolve()?;
    let corpus = read_corpus(&args.corpus)?;
    let parts = split(&config, &corpus)?;
    let resources = load_resources(&config.resources)?;
    let ctx = FeatureContext::fit(config.prep.clone(), resources, &parts.train)
        .context("preparing features")?;
    let train_y = labels_of(&parts.train)?;
    let val_y = labels_of(&parts.validation)?;
    let fingerprint = config.fingerprint();
    let seed = config.split.seed;

    let (trained, bindings, threshold, fit_seed) = match &config.model {
        ModelSpec::Lr(lr) => {
            let binding = ctx.binding(config.vectorizer)?;
            let x = ctx.vectorize_all(config.vectorizer, &parts.train)?;
            let m = fit_lr(&x, &train_y, lr, seed)
                .context("fitting logistic regression")?
                .bound_to(binding.feature_space_id());
            if !m.converged {
                log::warn!(
                    "logistic regression stopped after {} iterations without converging",
                    m.iterations
                );
            }
            (TrainedModel::Lr(m), vec![binding], lr.threshold, seed)
        }
        ModelSpec::Rf(rf) => {
            let binding = ctx.binding(config.vectorizer)?;
            let x = ctx.vectorize_all(config.vectorizer, &parts.train)?;
            let f = fit_rf(&x, &train_y, rf)
                .context("fitting random forest")?
                .bound_to(binding.feature_space_id());
            (TrainedModel::Rf(f), vec![binding], 0.5, rf.seed)
        }
        ModelSpec::Ensemble(spec) => {
            let e =
                fit_ensemble(&parts, &spec.bank, &spec.meta, &ctx).context("fitting ensemble")?;
            let mut bindings: Vec<VectorizerBinding> = Vec::new();
            for b in &e.base {
                if !bindings.contains(&b.binding) {
                    bindings.push(b.binding.clone());
                }
            }
            (
                TrainedModel::Ensemble(e),
                bindings,
                spec.meta.threshold,
                seed,
            )
        }
    };
    let uses_vocabulary = bindings.iter().any(|b| b.kind.uses_vocabulary());
    let mut stored = config.clone();
    stored.output_dir = PathBuf::new();
    let model = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        kind: match trained {
            TrainedModel::Ensemble(_) => ModelFileKind::Ensemble,
            _ => ModelFileKind::Single,
        },
        config_fingerprint: fingerprint.clone(),
        seeds: Seeds {
            split: seed,
            fit: fit_seed,
        },
        config: stored,
        prep: config.prep.clone(),
        vocabulary: if uses_vocabulary {
            ctx.vocabulary().cloned()
        } else {
            None
        },
        bindings,
        threshold,
        model: trained,
    };

    let probs = score(&model, &ctx, &parts.validation).context("scoring the validation slice")?;
    let report = evaluate(&probs, &val_y, threshold).context("evaluating")?;
    let base_learners = match &model.model {
        TrainedModel::Ensemble(e) => {
            let meta_x = e.meta_features(&parts.validation, &ctx)?;
            e.base
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let col: Vec<f64> = meta_x.iter().map(|r| r.values[j]).collect();
                    Ok(LearnerSummary::new(
                        b.spec.name(),
                        &evaluate(&col, &val_y, b.spec.lr_config.threshold)?,
                    ))
                })
                .collect::<anyhow::Result<Vec<_>>>()?
        }
        _ => Vec::new(),
    };
    let sentence_fallback = model.bindings.iter().any(|b| b.fallback);
    if sentence_fallback {
        log::warn!("no sentence-vector file; sentence features average embedding table 2");
    }
    let dir = &config.output_dir;
    let mut out = Outputs::new();
    out.add(dir.join("model.json"), model.to_json()?);
    out.add_json(
        dir.join("report.json"),
        &TrainReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "train",
            config_fingerprint: &fingerprint,
            seeds: model.seeds,
            model_kind: config.model.kind(),
            vectorizer: match config.model {
                ModelSpec::Ensemble(_) => None,
                _ => Some(config.vectorizer),
            },
            bindings: &model.bindings,
            sentence_fallback,
            n_train: parts.train.len(),
            n_meta: parts.meta_train.len(),
            n_validation: parts.validation.len(),
            validation: &report,
            base_learners,
        },
    )?;
    add_report_files(&mut out, dir, "", &report)?;
    let ids: Vec<&str> = parts.validation.iter().map(|r| r.id.as_str()).collect();
    out.add(
        dir.join("validation_predictions.tsv"),
        predictions_bytes(&ids, &probs, threshold),
    );
    report_outputs(&out);
    out.commit()?;
    println!(
        "validation: n={} accuracy={:.4} precision={:.4} recall={:.4} f1={:.4} auroc={:.4} auprc={:.4}",
        report.n, report.accuracy, report.precision, report.recall, report.f1, report.auroc, report.auprc
    );
    Ok(())
}

pub fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    let model = ModelFile::load(&args.model)?;
    let mut paths = model.config.resources.clone();
    args.resources.apply(&mut paths);
    let ctx = model_context(&model, load_resources(&paths)?)?;
    let records = read_corpus(&args.corpus)?;
    let threshold = args.threshold.unwrap_or(model.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ConfigError::wrap(anyhow!(
            "threshold {threshold} is outside [0, 1]"
        )));
    }
    let probs = score(&model, &ctx, &records)?;
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let bytes = predictions_bytes(&ids, &probs, threshold);
    match &args.output {
        Some(p) => {
            let mut out = Outputs::new();
            out.add(p, bytes);
            report_outputs(&out);
            out.commit()?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

/// Reads an `id, probability, label` TSV; only the first two columns are used.
pub fn read_predictions(path: &Path) -> anyhow::Result<Vec<(String, f64)>> {
    let parse = || -> anyhow::Result<Vec<(String, f64)>> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.split('\t').take(2).eq(["id", "probability"]) => {}
            _ => anyhow::bail!("expected an `id<TAB>probability<TAB>label` header"),
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split('\t');
            let (Some(id), Some(p)) = (f.next(), f.next()) else {
                anyhow::bail!("line {}: expected at least two columns", i + 1);
            };
            let p: f64 = p
                .trim()
                .parse()
                .with_context(|| format!("line {}: probability `{p}`", i + 1))?;
            if !(0.0..=1.0).contains(&p) {
                anyhow::bail!("line {}: probability {p} is outside [0, 1]", i + 1);
            }
            if !seen.insert(id.to_string()) {
                anyhow::bail!("line {}: duplicate id {id}", i + 1);
            }
            rows.push((id.to_string(), p));
        }
        Ok(rows)
    };
    parse()
        .with_context(|| format!("reading predictions {}", path.display()))
        .map_err(DataError::wrap)
}

#[derive(Serialize)]
struct NamedEvaluation {
    name: String,
    source: String,
    evaluation: EvalReport<f64>,
}

#[derive(Serialize)]
struct EvaluateReport {
    schema_version: u32,
    command: &'static str,
    threshold: f64,
    models: Vec<NamedEvaluation>,
}

fn prediction_name(path: &Path, index: usize) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("predictions");
    format!("{}_{stem}", index + 1)
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(ConfigError::wrap(anyhow!(
            "threshold {} is outside [0, 1]",
            args.threshold
        )));
    }
    let truth = read_corpus(&args.truth)?;
    let mut out = Outputs::new();
    let mut models = Vec::new();
    let mut errors = BTreeMap::new();
    for (i, path) in args.predictions.iter().enumerate() {
        let preds = read_predictions(path)?;
        let (ids, scores, y) =
            join_by_id(&preds, &truth).with_context(|| format!("joining {}", path.display()))?;
        let report = evaluate(&scores, &y, args.threshold)?;
        let name = prediction_name(path, i);
        let prefix = if args.predictions.len() == 1 {
            String::new()
        } else {
            format!("{name}_")
        };
        add_report_files(&mut out, &args.out, &prefix, &report)?;
        let pred: Vec<u8> = scores
            .iter()
            .map(|&s| u8::from(s >= args.threshold))
            .collect();
        errors.insert(name.clone(), error_sets(&ids, &y, &pred)?);
        println!(
            "{name}: n={} accuracy={:.4} precision={:.4} recall={:.4} f1={:.4} auroc={:.4} auprc={:.4}",
            report.n, report.accuracy, report.precision, report.recall, report.f1, report.auroc, report.auprc
        );
        models.push(NamedEvaluation {
            name,
            source: path.display().to_string(),
            evaluation: report,
        });
    }
    if models.len() > 1 {
        out.add_json(args.out.join("overlap.json"), &error_overlap(&errors)?)?;
    }
    out.add_json(
        args.out.join("report.json"),
        &EvaluateReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "evaluate",
            threshold: args.threshold,
            models,
        },
    )?;
    report_outputs(&out);
    out.commit()
}

#[derive(Serialize)]
struct InterpretReport<'a> {
    schema_version: u32,
    command: &'static str,
    config_fingerprint: &'a str,
    bootstraps: usize,
    bootstrap_seed: u64,
    identity: bool,
    top_k: usize,
    positive: Vec<(String, f64)>,
    negative: Vec<(String, f64)>,
    meta_contributions: Option<&'a MetaContributions<f64>>,
}

fn check_reproduced(expected: &str, found: &str, what: &str) -> anyhow::Result<()> {
    if expected != found {
        return Err(DataError::wrap(anyhow!(
            "the corpus does not reproduce the {what} this model was fit on"
        )));
    }
    Ok(())
}

pub fn interpret(args: &InterpretArgs) -> anyhow::Result<()> {
    let model = ModelFile::load(&args.model)?;
    let config = &model.config;
    let bootstraps = if args.identity {
        1
    } else {
        args.bootstraps.unwrap_or(config.bootstrap.resamples)
    };
    if bootstraps == 0 {
        return Err(ConfigError::wrap(anyhow!(
            "--bootstraps must be at least 1"
        )));
    }
    let seed = args.seed.unwrap_or(config.bootstrap.seed);
    let top_k = args.top_k.unwrap_or(config.bootstrap.top_k);
    let mut paths = config.resources.clone();
    args.resources.apply(&mut paths);
    let ctx = model_context(&model, load_resources(&paths)?)?;
    let corpus = read_corpus(&args.corpus)?;
    let parts = split(config, &corpus)?;

    let resamples =
        |n: usize| -> Option<Vec<Vec<usize>>> { args.identity.then(|| vec![(0..n).collect()]) };
    let mut out = Outputs::new();
    let (positive, negative, contributions) = match &model.model {
        TrainedModel::Lr(m) => {
            let binding = single_binding(&model)?;
            let x = ctx.vectorize_all(binding.kind, &parts.train)?;
            let y = labels_of(&parts.train)?;
            check_reproduced(
                &m.training_fingerprint,
                &training_fingerprint(&x, &y),
                "training slice",
            )?;
            let names = match (binding.kind.uses_vocabulary(), ctx.vocabulary()) {
                (true, Some(v)) => Some(v.terms()),
                _ => None,
            };
            let summaries = match resamples(y.len()) {
                Some(r) => bootstrap_coefficients_with(&x, &y, &m.config, &r, names)?,
                None => bootstrap_coefficients(&x, &y, &m.config, bootstraps, seed, names)?,
            };
            let mut tsv = Vec::new();
            write_summary_tsv(&mut tsv, &summaries)?;
            out.add(args.out.join("coefficients.tsv"), tsv);
            let k = top_k.min(summaries.len());
            (
                top_terms(&summaries, k, Direction::Positive),
                top_terms(&summaries, k, Direction::Negative),
                None,
            )
        }
        TrainedModel::Ensemble(e) => {
            let meta_x = e.meta_features(&parts.meta_train, &ctx)?;
            let meta_y = labels_of(&parts.meta_train)?;
            check_reproduced(
                &e.meta.training_fingerprint,
                &training_fingerprint(&meta_x, &meta_y),
                "meta-training slice",
            )?;
            let names = e.learner_names();
            let c = match resamples(meta_y.len()) {
                Some(r) => {
                    let s = bootstrap_coefficients_with(
                        &meta_x,
                        &meta_y,
                        &e.meta.config,
                        &r,
                        Some(&names),
                    )?;
                    let mean_coef: Vec<f64> = s.iter().map(|s| s.mean_coef).collect();
                    let (normalized, mixed_signs) =
                        dilifilter_core::interpret::normalize_contributions(&mean_coef);
                    MetaContributions {
                        learners: names,
                        mean_coef,
                        normalized,
                        mixed_signs,
                    }
                }
                None => meta_contributions_from(
                    &names,
                    &e.meta.config,
                    &meta_x,
                    &meta_y,
                    bootstraps,
                    seed,
                )?,
            };
            if c.mixed_signs {
                log::warn!(
                    "meta-learner coefficients have mixed signs; normalized by absolute sum"
                );
            }
            let mut tsv = Vec::new();
            c.write_tsv(&mut tsv)?;
            out.add(args.out.join("meta_contributions.tsv"), tsv);
            (Vec::new(), Vec::new(), Some(c))
        }
        TrainedModel::Rf(_) => {
            return Err(ConfigError::wrap(anyhow!(
                "interpretation needs a logistic-regression model; this is a random forest"
            )))
        }
    };
    let mut tsv = b"direction\trank\tterm\tmean_coef\n".to_vec();
    for (dir, list) in [("positive", &positive), ("negative", &negative)] {
        for (rank, (term, coef)) in list.iter().enumerate() {
            writeln!(tsv, "{dir}\t{}\t{term}\t{coef}", rank + 1)?;
        }
    }
    if contributions.is_none() {
        out.add(args.out.join("top_terms.tsv"), tsv);
    }
    out.add_json(
        args.out.join("interpret.json"),
        &InterpretReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "interpret",
            config_fingerprint: &model.config_fingerprint,
            bootstraps,
            bootstrap_seed: seed,
            identity: args.identity,
            top_k,
            positive,
            negative,
            meta_contributions: contributions.as_ref(),
        },
    )?;
    report_outputs(&out);
    out.commit()
}

#[derive(Serialize)]
struct TuneReport<'a> {
    schema_version: u32,
    command: &'static str,
    config_fingerprint: &'a str,
    seed: u64,
    vectorizer: VectorizerKind,
    fold_fingerprint: &'a str,
    grid: &'a GridSpec<f64>,
    best: &'a ModelConfig<f64>,
    best_score: f64,
    rows: &'a [dilifilter_core::tuning::GridRow<f64>],
}

pub fn default_grid(config: &PipelineConfig) -> anyhow::Result<GridSpec<f64>> {
    match &config.model {
        ModelSpec::Lr(lr) => {
            let mut g = GridSpec::default_lr();
            if let GridAxes::Lr { base, .. } = &mut g.axes {
                *base = *lr;
            }
            Ok(g)
        }
        ModelSpec::Rf(rf) => Ok(GridSpec {
            axes: GridAxes::Rf {
                n_estimators: vec![50, 100, 200],
                max_depth: vec![5, 10, 20],
                base: *rf,
            },
            folds: dilifilter_core::tuning::DEFAULT_FOLDS,
            objective: Default::default(),
        }),
        ModelSpec::Ensemble(_) => Err(ConfigError::wrap(anyhow!(
            "tune works on lr or rf models; give a grid explicitly or change model.kind"
        ))),
    }
}

pub fn tune(args: &TuneArgs) -> anyhow::Result<()> {
    let config = args.config.resolve()?;
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_grid(&config)?,
    };
    let corpus = read_corpus(&args.corpus)?;
    let parts = split(&config, &corpus)?;
    let ctx = FeatureContext::fit(
        config.prep.clone(),
        load_resources(&config.resources)?,
        &parts.train,
    )?;
    let x = ctx.vectorize_all(config.vectorizer, &parts.train)?;
    let y = labels_of(&parts.train)?;
    let result = grid_search(&x, &y, &grid, config.split.seed).context("grid search")?;
    let fingerprint = config.fingerprint();
    let mut out = Outputs::new();
    let mut tsv = Vec::new();
    result.write_tsv(&mut tsv)?;
    out.add(config.output_dir.join("grid.tsv"), tsv);
    out.add_json(
        config.output_dir.join("tune.json"),
        &TuneReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "tune",
            config_fingerprint: &fingerprint,
            seed: config.split.seed,
            vectorizer: config.vectorizer,
            fold_fingerprint: &result.fold_fingerprint,
            grid: &grid,
            best: result.best_config(),
            best_score: result.best_score(),
            rows: &result.rows,
        },
    )?;
    report_outputs(&out);
    out.commit()?;
    println!(
        "best: {} (mean accuracy {:.4})",
        result.best_config().describe(),
        result.best_score()
    );
    Ok(())
}

#[derive(Serialize)]
struct SplitManifest<'a> {
    schema_version: u32,
    command: &'static str,
    config_fingerprint: &'a str,
    seed: u64,
    stratified: bool,
    fractions: SplitFractions,
    counts: BTreeMap<&'static str, usize>,
    id_fingerprints: BTreeMap<&'static str, String>,
}

fn ids_digest(records: &[DocumentRecord]) -> String {
    let joined: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    sha256_hex(joined.join("\n").as_bytes())
}

pub fn split_cmd(args: &SplitArgs) -> anyhow::Result<()> {
    let config = args.config.resolve()?;
    let corpus = read_corpus(&args.corpus)?;
    let parts = split(&config, &corpus)?;
    let format = CorpusFormat::from_path(&args.corpus);
    let ext = match format {
        CorpusFormat::Tsv => "tsv",
        CorpusFormat::Jsonl => "jsonl",
    };
    let dir = &config.output_dir;
    let mut out = Outputs::new();
    let mut counts = BTreeMap::new();
    let mut id_fingerprints = BTreeMap::new();
    for (name, records) in [
        ("train", &parts.train),
        ("meta", &parts.meta_train),
        ("validation", &parts.validation),
    ] {
        counts.insert(name, records.len());
        id_fingerprints.insert(name, ids_digest(records));
        if !records.is_empty() {
            out.add(
                dir.join(format!("{name}.{ext}")),
                corpus_bytes(records, format)?,
            );
        }
    }
    let fingerprint = config.fingerprint();
    out.add_json(
        dir.join("split.json"),
        &SplitManifest {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "split",
            config_fingerprint: &fingerprint,
            seed: config.split.seed,
            stratified: config.split.stratified,
            fractions: config.fractions(),
            counts,
            id_fingerprints,
        },
    )?;
    report_outputs(&out);
    out.commit()
}

pub fn vectorize(args: &VectorizeArgs) -> anyhow::Result<()> {
    let records = read_corpus(&args.corpus)?;
    let (ctx, kind) = match &args.from_model {
        Some(path) => {
            let model = ModelFile::load(path)?;
            let mut paths = model.config.resources.clone();
            args.config.resources.apply(&mut paths);
            let kind = args.config.vectorizer.unwrap_or(model.config.vectorizer);
            (model_context(&model, load_resources(&paths)?)?, kind)
        }
        None => {
            let config = args.config.resolve()?;
            let ctx = FeatureContext::fit(
                config.prep.clone(),
                load_resources(&config.resources)?,
                &records,
            )?;
            (ctx, config.vectorizer)
        }
    };
    let x = ctx.vectorize_all(kind, &records)?;
    let binding = ctx.binding(kind)?;
    let names: Vec<String> = match (kind.uses_vocabulary(), ctx.vocabulary()) {
        (true, Some(v)) => v.terms().to_vec(),
        _ => (0..binding.dim).map(|j| format!("dim_{j}")).collect(),
    };
    let mut bytes = Vec::new();
    writeln!(bytes, "# feature_space={}", binding.feature_space_id())?;
    writeln!(bytes, "id\tlabel\t{}", names.join("\t"))?;
    for (r, row) in records.iter().zip(&x) {
        write!(
            bytes,
            "{}\t{}",
            r.id,
            r.label.map(|l| l.to_string()).unwrap_or_default()
        )?;
        for v in dense_columns(row) {
            write!(bytes, "\t{v}")?;
        }
        writeln!(bytes)?;
    }
    match &args.output {
        Some(p) => {
            let mut out = Outputs::new();
            out.add(p, bytes);
            report_outputs(&out);
            out.commit()
        }
        None => Ok(std::io::stdout().write_all(&bytes)?),
    }
}
