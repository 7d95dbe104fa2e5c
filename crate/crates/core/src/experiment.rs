//! Config-driven experiment runner: parse -> map -> split -> build features
//! -> train -> evaluate -> report, plus the epoch-timing sweeps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::baselines::{train_bpr_mf_observed, PopularityModel};
use crate::config::{DatasetConfig, ExperimentConfig, Method};
use crate::data::{
    cross_domain_split, densify, kfold_split, parse_csv, render_fold_manifest, to_implicit,
    CdFold, Dataset, Interaction,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_fold, EvalReport, FmScorer, FoldMetrics, MfScorer, PopularityScorer, Scorer,
    TestInstance,
};
use crate::features::{
    build_context_vector, build_cross_domain_vector, resolve_context_vector,
    resolve_cross_domain_vector, ContextSchema, CrossDomainConfig,
};
use crate::model::FMModel;
use crate::pairwise::{self, TrainConfig};
use crate::pointwise::{
    build_fm_map_training, pointwise_step_with, train_pointwise, LabeledInstance,
    PointwiseScratch,
};
use crate::rng::{self, hash_str};
use crate::space::Namespace;
use crate::sparse::{FeatureId, SparseVector};

/// Environment variable overriding where run outputs are written.
pub const OUTPUT_DIR_ENV: &str = "FMPAIR_OUTPUT_DIR";

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub report: EvalReport,
}

/// Output directory for a config: `$FMPAIR_OUTPUT_DIR` when set, otherwise
/// `<config dir>/runs/<config stem>`.
pub fn output_dir(config_path: &Path) -> PathBuf {
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        return PathBuf::from(dir);
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_owned());
    config_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("runs")
        .join(stem)
}

/// Read the dataset named by the config, merging any per-item context
/// sidecar into the interactions (interaction-level values win).
pub fn load_interactions(ds: &DatasetConfig) -> Result<Vec<Interaction>> {
    let fmt = ds.descriptor()?;
    let mut rows = parse_csv(&ds.path, &fmt)?;
    if let Some(ic) = &ds.item_context {
        let names: Vec<&str> = ic.columns.iter().map(String::as_str).collect();
        let sidecar = crate::data::parse_item_context(&ic.path, &names, ic.delimiter, ic.has_header)?;
        for it in &mut rows {
            if let Some(ctx) = sidecar.get(&it.item) {
                for (dim, value) in ctx {
                    it.context.entry(dim.clone()).or_insert_with(|| value.clone());
                }
            }
        }
    }
    Ok(rows)
}

fn preprocess(cfg: &ExperimentConfig, mut rows: Vec<Interaction>) -> Result<Vec<Interaction>> {
    if cfg.dataset.min_interactions > 1 {
        rows = densify(rows, cfg.dataset.min_interactions);
    }
    // fm-explicit derives its positives itself and trains on the raw ratings
    if cfg.dataset.implicit && cfg.model.method != Method::FmExplicit {
        rows = to_implicit(&rows)?;
    }
    Ok(rows)
}

fn per_fold_train_cfg(cfg: &ExperimentConfig, fold: usize) -> TrainConfig {
    TrainConfig {
        seed: rng::mix(&[cfg.model.train.seed, rng::tags::FOLD_TRAIN, fold as u64]),
        ..cfg.model.train.clone()
    }
}

/// One Recall@N reading taken during training.
#[derive(Debug, Clone, Copy)]
struct ConvergencePoint {
    fold: usize,
    epoch: usize,
    recall: f64,
}

struct FoldRun {
    metrics: FoldMetrics,
    convergence: Vec<ConvergencePoint>,
}

fn filter_to_schema(
    context: &BTreeMap<String, String>,
    schema: &ContextSchema,
) -> BTreeMap<String, String> {
    context
        .iter()
        .filter(|(dim, _)| schema.dim(dim).is_some())
        .map(|(d, v)| (d.clone(), v.clone()))
        .collect()
}

fn plain_test_instances(data: &Dataset, test_rows: &[Interaction]) -> Vec<TestInstance> {
    test_rows
        .iter()
        .map(|it| TestInstance {
            user: data.space().id(Namespace::User, &it.user),
            item: data.space().id(Namespace::Item, &it.item),
            aux: SparseVector::empty(),
        })
        .collect()
}

fn context_test_instances(
    data: &Dataset,
    test_rows: &[Interaction],
    schema: &ContextSchema,
) -> Result<Vec<TestInstance>> {
    test_rows
        .iter()
        .map(|it| {
            let aux =
                resolve_context_vector(schema, &filter_to_schema(&it.context, schema), data.space())?;
            Ok(TestInstance {
                user: data.space().id(Namespace::User, &it.user),
                item: data.space().id(Namespace::Item, &it.item),
                aux,
            })
        })
        .collect()
}

/// Trains the pairwise FM, optionally emitting Recall@{first N} on the test
/// set every `track_every` epochs.
fn train_fm_tracked(
    cfg: &ExperimentConfig,
    tcfg: &TrainConfig,
    data: &Dataset,
    tests: &[TestInstance],
    universe: Option<&[FeatureId]>,
    fold: usize,
) -> Result<(FMModel, Vec<ConvergencePoint>)> {
    let track = cfg.eval.track_every;
    let n0 = cfg.eval.ns[0];
    let mut conv = Vec::new();
    let mut tracked_err: Option<Error> = None;
    let model = pairwise::train_observed(data, tcfg, |stats, m| {
        if track == 0 || (stats.epoch + 1) % track != 0 || tracked_err.is_some() {
            return;
        }
        let scorer = FmScorer::new(m);
        match evaluate_fold(&scorer, tests, data, universe, &[n0], cfg.eval.pool, fold, cfg.eval.seed)
        {
            Ok(fm) => conv.push(ConvergencePoint {
                fold,
                epoch: stats.epoch + 1,
                recall: fm.recall[&n0],
            }),
            Err(e) => tracked_err = Some(e),
        }
    })?;
    if let Some(e) = tracked_err {
        return Err(e);
    }
    Ok((model, conv))
}

fn train_fm_map(
    data: &Dataset,
    tcfg: &TrainConfig,
    neg_label: f64,
    resample: bool,
) -> Result<FMModel> {
    let n = data.space().len();
    let mut neg_gen = rng::stream(rng::mix(&[tcfg.seed, rng::tags::FM_MAP_NEGATIVES]));
    if !resample {
        let instances = build_fm_map_training(data, neg_label, &mut neg_gen)?;
        return train_pointwise(n, &instances, tcfg);
    }

    // fresh negatives every epoch, same shuffled-pass loop as train_pointwise
    use rand::seq::SliceRandom;
    tcfg.validate()?;
    let mut model = FMModel::seeded(n, tcfg.k, tcfg.sigma0, tcfg.seed);
    let mut shuffler = rng::stream(rng::mix(&[tcfg.seed, rng::tags::POINTWISE_SHUFFLE]));
    let mut scratch = PointwiseScratch::new(tcfg.k);
    for epoch in 0..tcfg.epochs {
        let instances = build_fm_map_training(data, neg_label, &mut neg_gen)?;
        let mut order: Vec<usize> = (0..instances.len()).collect();
        order.shuffle(&mut shuffler);
        for (iter, idx) in order.into_iter().enumerate() {
            pointwise_step_with(&mut model, &instances[idx], tcfg, &mut scratch).map_err(|e| {
                match e {
                    Error::NumericDivergence { group, .. } => {
                        Error::NumericDivergence { group, epoch, iter }
                    }
                    other => other,
                }
            })?;
        }
    }
    Ok(model)
}

fn eval_with<S: Scorer>(
    cfg: &ExperimentConfig,
    scorer: &S,
    tests: &[TestInstance],
    data: &Dataset,
    universe: Option<&[FeatureId]>,
    fold: usize,
) -> Result<FoldMetrics> {
    evaluate_fold(
        scorer,
        tests,
        data,
        universe,
        &cfg.eval.ns,
        cfg.eval.pool,
        fold,
        cfg.eval.seed,
    )
}

fn run_one_fold(
    cfg: &ExperimentConfig,
    fold: usize,
    train_rows: &[Interaction],
    test_rows: &[Interaction],
) -> Result<FoldRun> {
    let tcfg = per_fold_train_cfg(cfg, fold);
    let started = Instant::now();
    let run = match cfg.model.method {
        Method::MostPopular => {
            let data = Dataset::from_interactions(train_rows)?;
            let model = PopularityModel::fit(&data);
            let tests = plain_test_instances(&data, test_rows);
            let metrics = eval_with(cfg, &PopularityScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence: Vec::new(),
            }
        }
        Method::FmPair => {
            let data = Dataset::from_interactions(train_rows)?;
            let tests = plain_test_instances(&data, test_rows);
            let (model, convergence) = train_fm_tracked(cfg, &tcfg, &data, &tests, None, fold)?;
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        Method::FmPairContext => {
            let schema = cfg.features.context.as_ref().expect("validated");
            let data = Dataset::from_interactions_with_aux(train_rows, |it, space| {
                build_context_vector(schema, &filter_to_schema(&it.context, schema), space)
            })?;
            let tests = context_test_instances(&data, test_rows, schema)?;
            let (model, convergence) = train_fm_tracked(cfg, &tcfg, &data, &tests, None, fold)?;
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        Method::BprMf => {
            let data = Dataset::from_interactions(train_rows)?;
            let tests = plain_test_instances(&data, test_rows);
            let track = cfg.eval.track_every;
            let n0 = cfg.eval.ns[0];
            let mut convergence = Vec::new();
            let mut tracked_err: Option<Error> = None;
            let model = train_bpr_mf_observed(&data, &tcfg, |stats, m| {
                if track == 0 || (stats.epoch + 1) % track != 0 || tracked_err.is_some() {
                    return;
                }
                let scorer = MfScorer::new(m);
                match evaluate_fold(&scorer, &tests, &data, None, &[n0], cfg.eval.pool, fold, cfg.eval.seed) {
                    Ok(fm) => convergence.push(ConvergencePoint {
                        fold,
                        epoch: stats.epoch + 1,
                        recall: fm.recall[&n0],
                    }),
                    Err(e) => tracked_err = Some(e),
                }
            })?;
            if let Some(e) = tracked_err {
                return Err(e);
            }
            let metrics = eval_with(cfg, &MfScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        Method::FmMap => {
            let data = match &cfg.features.context {
                Some(schema) => Dataset::from_interactions_with_aux(train_rows, |it, space| {
                    build_context_vector(schema, &filter_to_schema(&it.context, schema), space)
                })?,
                None => Dataset::from_interactions(train_rows)?,
            };
            let model = train_fm_map(&data, &tcfg, cfg.model.neg_label, cfg.model.resample_negatives)?;
            let tests = match &cfg.features.context {
                Some(schema) => context_test_instances(&data, test_rows, schema)?,
                None => plain_test_instances(&data, test_rows),
            };
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence: Vec::new(),
            }
        }
        Method::FmExplicit => {
            let data = Dataset::from_interactions(train_rows)?;
            let mut instances = Vec::with_capacity(train_rows.len());
            // the indexed dataset collapses duplicate (user, item) rows; train
            // on one instance per collapsed pair to match its exclusion sets
            let mut seen: HashSet<(FeatureId, FeatureId)> = HashSet::new();
            for it in train_rows {
                let rating = it.rating.ok_or_else(|| {
                    Error::domain(format!(
                        "fm-explicit needs a rating on every interaction (user `{}`)",
                        it.user
                    ))
                })?;
                let user = data.space().id(Namespace::User, &it.user).expect("interned");
                let item = data.space().id(Namespace::Item, &it.item).expect("interned");
                if !seen.insert((user, item)) {
                    continue;
                }
                instances.push(LabeledInstance {
                    x: SparseVector::from_sorted(vec![(user, 1.0), (item, 1.0)])?,
                    y: rating,
                });
            }
            let model = train_pointwise(data.space().len(), &instances, &tcfg)?;
            let tests = plain_test_instances(&data, test_rows);
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence: Vec::new(),
            }
        }
        Method::FmPairCd | Method::FmPairAll => {
            return Err(Error::domain(
                "cross-domain methods run through the cross-domain pipeline",
            ))
        }
    };
    eprintln!(
        "fold {fold}: {} done in {:.1}s",
        cfg.model.method.as_str(),
        started.elapsed().as_secs_f64()
    );
    Ok(run)
}

/// Per-user, per-domain source histories (items deduped, first-seen order).
fn source_histories(source: &[Interaction]) -> HashMap<String, BTreeMap<String, Vec<String>>> {
    let mut out: HashMap<String, BTreeMap<String, Vec<String>>> = HashMap::new();
    for it in source {
        let domain = it.domain.clone().expect("cross-domain rows carry domains");
        let list = out
            .entry(it.user.clone())
            .or_default()
            .entry(domain)
            .or_default();
        if !list.contains(&it.item) {
            list.push(it.item.clone());
        }
    }
    out
}

fn user_cd_stream(cd: &CrossDomainConfig, user: &str) -> rng::ChaCha8Rng {
    rng::stream(rng::mix(&[
        cd.seed,
        rng::tags::CROSS_DOMAIN_SELECT,
        hash_str(user),
    ]))
}

fn run_one_cd_fold(
    cfg: &ExperimentConfig,
    cd: &CrossDomainConfig,
    fold: usize,
    split: &CdFold,
) -> Result<FoldRun> {
    let tcfg = per_fold_train_cfg(cfg, fold);
    let started = Instant::now();
    let run = match cfg.model.method {
        // target-only arm: same folds, no source data at all
        Method::FmPair => {
            let data = Dataset::from_interactions(&split.train)?;
            let tests = plain_test_instances(&data, &split.test);
            let (model, convergence) = train_fm_tracked(cfg, &tcfg, &data, &tests, None, fold)?;
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        // source rows join the training set as plain interactions; candidates
        // stay restricted to the fold's target-domain training items so all
        // arms rank over the same universe
        Method::FmPairAll => {
            let mut all_rows = split.train.clone();
            all_rows.extend(split.source.iter().cloned());
            let data = Dataset::from_interactions(&all_rows)?;
            let mut candidate_keys: Vec<&str> = Vec::new();
            let mut seen: HashSet<&str> = HashSet::new();
            for it in &split.train {
                if seen.insert(&it.item) {
                    candidate_keys.push(&it.item);
                }
            }
            let candidates: Vec<FeatureId> = candidate_keys
                .iter()
                .map(|k| data.space().id(Namespace::Item, k).expect("interned"))
                .collect();
            let tests = plain_test_instances(&data, &split.test);
            let (model, convergence) =
                train_fm_tracked(cfg, &tcfg, &data, &tests, Some(&candidates), fold)?;
            let metrics =
                eval_with(cfg, &FmScorer::new(&model), &tests, &data, Some(&candidates), fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        // source rows become per-user auxiliary features
        Method::FmPairCd => {
            let histories = source_histories(&split.source);
            let empty = BTreeMap::new();
            let data = Dataset::from_interactions_with_aux(&split.train, |it, space| {
                let history = histories.get(&it.user).unwrap_or(&empty);
                build_cross_domain_vector(cd, history, space, &mut user_cd_stream(cd, &it.user))
            })?;
            let tests: Vec<TestInstance> = split
                .test
                .iter()
                .map(|it| {
                    let history = histories.get(&it.user).unwrap_or(&empty);
                    let aux = resolve_cross_domain_vector(
                        cd,
                        history,
                        data.space(),
                        &mut user_cd_stream(cd, &it.user),
                    )?;
                    Ok(TestInstance {
                        user: data.space().id(Namespace::User, &it.user),
                        item: data.space().id(Namespace::Item, &it.item),
                        aux,
                    })
                })
                .collect::<Result<_>>()?;
            let (model, convergence) = train_fm_tracked(cfg, &tcfg, &data, &tests, None, fold)?;
            let metrics = eval_with(cfg, &FmScorer::new(&model), &tests, &data, None, fold)?;
            FoldRun {
                metrics,
                convergence,
            }
        }
        other => {
            return Err(Error::domain(format!(
                "method {} does not use the cross-domain pipeline",
                other.as_str()
            )))
        }
    };
    eprintln!(
        "fold {fold}: {} done in {:.1}s",
        cfg.model.method.as_str(),
        started.elapsed().as_secs_f64()
    );
    Ok(run)
}

fn uses_cd_pipeline(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.model.method, Method::FmPairCd | Method::FmPairAll)
        || (cfg.model.method == Method::FmPair && cfg.features.cross_domain.is_some())
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn build_manifest(cfg: &ExperimentConfig, config_path: &Path) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# run manifest: fully resolved configuration");
    let _ = writeln!(
        out,
        "# re-running `run` on this file reproduces the metrics byte for byte"
    );
    let _ = writeln!(out, "# source config: {}", config_path.display());
    let _ = writeln!(
        out,
        "# dataset sha256: {}",
        sha256_hex(&cfg.dataset.path)?
    );
    if let Some(ic) = &cfg.dataset.item_context {
        let _ = writeln!(out, "# item context sha256: {}", sha256_hex(&ic.path)?);
    }
    let _ = writeln!(
        out,
        "# per-fold training seeds: mix(model.seed, {}, fold) =",
        rng::tags::FOLD_TRAIN
    );
    for f in 0..cfg.split.folds {
        let _ = writeln!(
            out,
            "#   fold {f}: {}",
            rng::mix(&[cfg.model.train.seed, rng::tags::FOLD_TRAIN, f as u64])
        );
    }
    out.push_str(&cfg.render());
    Ok(out)
}

fn render_convergence(points: &[ConvergencePoint], n: usize) -> String {
    let mut out = format!("fold,epoch,recall@{n}\n");
    for p in points {
        let _ = writeln!(out, "{},{},{:.6}", p.fold, p.epoch, p.recall);
    }
    out
}

/// Execute the experiment described by a config file, writing `report.txt`,
/// `metrics.csv`, `manifest.txt`, `folds.txt` (and `convergence.csv` when
/// tracking is on) into the output directory.
pub fn run_experiment(config_path: &Path) -> Result<RunArtifacts> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    let out_dir = output_dir(config_path);
    let rows = preprocess(&cfg, load_interactions(&cfg.dataset)?)?;

    let (runs, fold_indices) = if uses_cd_pipeline(&cfg) {
        let cd = cfg.features.cross_domain.as_ref().ok_or_else(|| {
            Error::config("features.cd_target", "cross-domain pipeline needs a cd block")
        })?;
        let folds = cross_domain_split(&rows, &cd.target, cfg.split.folds, cfg.split.seed)?;
        let runs: Vec<FoldRun> = folds
            .par_iter()
            .enumerate()
            .map(|(f, split)| run_one_cd_fold(&cfg, cd, f, split).map_err(|e| e.in_fold(f)))
            .collect::<Result<_>>()?;
        let indices: Vec<Vec<usize>> = folds.iter().map(|f| f.test_indices.clone()).collect();
        (runs, indices)
    } else {
        let folds: Vec<(Vec<Interaction>, Vec<Interaction>, Vec<usize>)> =
            if cfg.model.method == Method::FmExplicit {
                // fold the derived positives; train on all raw ratings except
                // the fold's test (user, item) pairs
                let positives = to_implicit(&rows)?;
                kfold_split(&positives, cfg.split.folds, cfg.split.seed)?
                    .into_iter()
                    .map(|fold| {
                        let test_pairs: HashSet<(&str, &str)> = fold
                            .test
                            .iter()
                            .map(|it| (it.user.as_str(), it.item.as_str()))
                            .collect();
                        let train: Vec<Interaction> = rows
                            .iter()
                            .filter(|it| !test_pairs.contains(&(it.user.as_str(), it.item.as_str())))
                            .cloned()
                            .collect();
                        (train, fold.test, fold.test_indices)
                    })
                    .collect()
            } else {
                kfold_split(&rows, cfg.split.folds, cfg.split.seed)?
                    .into_iter()
                    .map(|f| (f.train, f.test, f.test_indices))
                    .collect()
            };
        let runs: Vec<FoldRun> = folds
            .par_iter()
            .enumerate()
            .map(|(f, (train, test, _))| run_one_fold(&cfg, f, train, test))
            .collect::<Result<_>>()?;
        let indices: Vec<Vec<usize>> = folds.into_iter().map(|(_, _, idx)| idx).collect();
        (runs, indices)
    };

    let report = EvalReport {
        method: cfg.model.method.as_str().to_owned(),
        folds: runs.iter().map(|r| r.metrics.clone()).collect(),
        ns: cfg.eval.ns.clone(),
        pool: cfg.eval.pool,
        seed: cfg.eval.seed,
    };

    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("report.txt"), report.render_text())?;
    std::fs::write(out_dir.join("metrics.csv"), report.render_csv())?;
    std::fs::write(out_dir.join("folds.txt"), render_fold_manifest(&fold_indices))?;
    std::fs::write(out_dir.join("manifest.txt"), build_manifest(&cfg, config_path)?)?;
    let convergence: Vec<ConvergencePoint> =
        runs.iter().flat_map(|r| r.convergence.iter().copied()).collect();
    if !convergence.is_empty() {
        std::fs::write(
            out_dir.join("convergence.csv"),
            render_convergence(&convergence, cfg.eval.ns[0]),
        )?;
    }

    Ok(RunArtifacts { out_dir, report })
}

/// What a timing sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Factorization dimension k.
    Factors,
    /// Synthetic auxiliary features per interaction.
    AuxCount,
}

impl SweepParam {
    pub fn from_cli(s: &str) -> Option<SweepParam> {
        match s {
            "k" => Some(SweepParam::Factors),
            "z" => Some(SweepParam::AuxCount),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepParam::Factors => "k",
            SweepParam::AuxCount => "z",
        }
    }
}

/// One measured sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: usize,
    pub mean_epoch_ms: f64,
    pub std_epoch_ms: f64,
    pub epochs_measured: usize,
    /// Raw per-epoch wall times (warm-up epochs excluded), for robust
    /// post-processing of noisy environments.
    pub epoch_times_ms: Vec<f64>,
}

impl SweepPoint {
    /// Median epoch time; robust against scheduler stalls.
    pub fn median_epoch_ms(&self) -> f64 {
        let mut t = self.epoch_times_ms.clone();
        t.sort_by(f64::total_cmp);
        let n = t.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            t[n / 2]
        } else {
            0.5 * (t[n / 2 - 1] + t[n / 2])
        }
    }
}

/// Train the pairwise FM at each parameter value, timing epochs with a
/// monotonic clock. Folds run sequentially and the first epoch of each run
/// (which also absorbs initialization) is excluded as warm-up. Writes
/// `timing.csv` next to the other run outputs.
pub fn run_timing_sweep(
    config_path: &Path,
    param: SweepParam,
    values: &[usize],
) -> Result<(PathBuf, Vec<SweepPoint>)> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    if cfg.model.train.epochs < 2 {
        return Err(Error::config(
            "model.epochs",
            "a timing sweep needs at least 2 epochs; the first is warm-up",
        ));
    }
    if values.is_empty() {
        return Err(Error::config("sweep.values", "no sweep values given"));
    }
    let out_dir = output_dir(config_path);
    let rows = preprocess(&cfg, load_interactions(&cfg.dataset)?)?;
    let folds = kfold_split(&rows, cfg.split.folds, cfg.split.seed)?;

    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut epoch_ms: Vec<f64> = Vec::new();
        for (f, fold) in folds.iter().enumerate() {
            let mut tcfg = per_fold_train_cfg(&cfg, f);
            let data = match param {
                SweepParam::Factors => {
                    tcfg.k = value;
                    Dataset::from_interactions(&fold.train)?
                }
                SweepParam::AuxCount => {
                    let vocab = (value * 10).max(1);
                    let mut counter = 0u64;
                    Dataset::from_interactions_with_aux(&fold.train, |_, space| {
                        let mut gen = rng::stream(rng::mix(&[
                            cfg.split.seed,
                            rng::tags::SYNTH,
                            f as u64,
                            counter,
                        ]));
                        counter += 1;
                        let mut entries = Vec::with_capacity(value);
                        for idx in rand::seq::index::sample(&mut gen, vocab, value) {
                            let id = space.intern(Namespace::Aux, &format!("syn{idx}"))?;
                            entries.push((id, 1.0));
                        }
                        SparseVector::from_pairs(entries)
                    })?
                }
            };
            let mut last = Instant::now();
            let mut times: Vec<f64> = Vec::new();
            pairwise::train_observed(&data, &tcfg, |_, _| {
                let now = Instant::now();
                times.push((now - last).as_secs_f64() * 1000.0);
                last = now;
            })?;
            epoch_ms.extend(times.into_iter().skip(1));
        }
        let mean = epoch_ms.iter().sum::<f64>() / epoch_ms.len() as f64;
        let var = if epoch_ms.len() > 1 {
            epoch_ms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (epoch_ms.len() - 1) as f64
        } else {
            0.0
        };
        let point = SweepPoint {
            value,
            mean_epoch_ms: mean,
            std_epoch_ms: var.sqrt(),
            epochs_measured: epoch_ms.len(),
            epoch_times_ms: epoch_ms,
        };
        eprintln!(
            "sweep {}={}: {:.3} ms/epoch (std {:.3}, {} epochs)",
            param.label(),
            point.value,
            point.mean_epoch_ms,
            point.std_epoch_ms,
            point.epochs_measured
        );
        points.push(point);
    }

    std::fs::create_dir_all(&out_dir)?;
    let mut csv = String::from("param,value,mean_epoch_ms,std_epoch_ms,epochs_measured\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6},{}",
            param.label(),
            p.value,
            p.mean_epoch_ms,
            p.std_epoch_ms,
            p.epochs_measured
        );
    }
    let path = out_dir.join("timing.csv");
    std::fs::write(&path, csv)?;
    Ok((path, points))
}
