//! One-plus-random ranked evaluation.
//!
//! Every held-out positive is ranked against a seeded sample of items the
//! user has not interacted with in training; all candidates are scored with
//! the *test* interaction's user and auxiliary features. Recall@N counts the
//! positives ranked within the top N, MRR@N averages their reciprocal ranks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::baselines::{MfModel, PopularityModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::FMModel;
use crate::rng::{self, ChaCha8Rng};
use crate::sparse::{FeatureId, SparseVector};

/// Ranking outcome of one test interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankResult {
    /// Position of the test interaction within its fold's test set; assigned
    /// by [`evaluate_fold`] (0 when ranked standalone).
    pub test_index: usize,
    /// 1-based rank of the test item among the candidates (pessimistic:
    /// candidates tied with the test item rank above it).
    pub rank: usize,
    /// Number of candidates it was ranked against.
    pub candidates: usize,
}

/// Scoring interface for evaluation. `prepare` digests the per-test-point
/// state (user + aux features); `score` is then called once per candidate
/// item. `None` ids encode cold-start entities absent from the training
/// space: scorers fall back to whatever terms remain.
pub trait Scorer: Sync {
    type Prepared;
    fn prepare(&self, user: Option<FeatureId>, aux: &SparseVector) -> Self::Prepared;
    fn score(&self, prepared: &Self::Prepared, item: Option<FeatureId>) -> f64;
}

/// Scores with a trained FM. For a fixed `(user, aux)` the score of item `i`
/// is `constant + w_i + <v_i, q>` where `q_f = v_uf + sum_z x_z v_zf`; the
/// constant collects the bias, first-order and user/aux interaction terms so
/// each candidate costs O(k).
pub struct FmScorer<'a> {
    model: &'a FMModel,
}

impl<'a> FmScorer<'a> {
    pub fn new(model: &'a FMModel) -> Self {
        FmScorer { model }
    }
}

pub struct FmPrepared {
    constant: f64,
    q: Vec<f64>,
}

impl Scorer for FmScorer<'_> {
    type Prepared = FmPrepared;

    fn prepare(&self, user: Option<FeatureId>, aux: &SparseVector) -> FmPrepared {
        let m = self.model;
        let k = m.k();
        let mut q = vec![0.0; k];
        let mut lin = m.w0();
        let mut sq = 0.0;
        if let Some(u) = user {
            lin += m.weights()[u as usize];
            let vu = m.factors(u);
            for f in 0..k {
                q[f] += vu[f];
                sq += vu[f] * vu[f];
            }
        }
        for (z, xz) in aux.iter() {
            lin += m.weights()[z as usize] * xz;
            let vz = m.factors(z);
            for f in 0..k {
                let t = xz * vz[f];
                q[f] += t;
                sq += t * t;
            }
        }
        let inter: f64 = q.iter().map(|x| x * x).sum();
        FmPrepared {
            constant: lin + 0.5 * (inter - sq),
            q,
        }
    }

    fn score(&self, prepared: &FmPrepared, item: Option<FeatureId>) -> f64 {
        match item {
            None => prepared.constant,
            Some(i) => {
                let m = self.model;
                let mut s = prepared.constant + m.weights()[i as usize];
                let vi = m.factors(i);
                for f in 0..m.k() {
                    s += vi[f] * prepared.q[f];
                }
                s
            }
        }
    }
}

/// Scores with a BPR-MF model; aux features are ignored (the model has
/// none), unknown users or items score 0.
pub struct MfScorer<'a> {
    model: &'a MfModel,
}

impl<'a> MfScorer<'a> {
    pub fn new(model: &'a MfModel) -> Self {
        MfScorer { model }
    }
}

impl Scorer for MfScorer<'_> {
    type Prepared = Option<FeatureId>;

    fn prepare(&self, user: Option<FeatureId>, _aux: &SparseVector) -> Option<FeatureId> {
        user.filter(|u| *u < self.model.item_offset())
    }

    fn score(&self, prepared: &Option<FeatureId>, item: Option<FeatureId>) -> f64 {
        match (prepared, item) {
            (Some(u), Some(i)) => self.model.score(*u, i),
            _ => 0.0,
        }
    }
}

/// Scores every item by its training interaction count, user-independent.
pub struct PopularityScorer<'a> {
    model: &'a PopularityModel,
}

impl<'a> PopularityScorer<'a> {
    pub fn new(model: &'a PopularityModel) -> Self {
        PopularityScorer { model }
    }
}

impl Scorer for PopularityScorer<'_> {
    type Prepared = ();

    fn prepare(&self, _user: Option<FeatureId>, _aux: &SparseVector) {}

    fn score(&self, _prepared: &(), item: Option<FeatureId>) -> f64 {
        item.map_or(0.0, |i| self.model.score(i))
    }
}

/// One held-out positive, resolved against the training fold's feature
/// space. `None` marks users/items unseen in training.
#[derive(Debug, Clone)]
pub struct TestInstance {
    pub user: Option<FeatureId>,
    pub item: Option<FeatureId>,
    pub aux: SparseVector,
}

/// Rank one test interaction against `pool` candidates drawn uniformly
/// without replacement from `universe \ (I+_user u {test item})`. When fewer
/// unobserved items exist, all of them are used and recorded in
/// `candidates`. Candidates and test item are scored with the same prepared
/// `(user, aux)` state; rank counts strictly-greater plus tied candidates
/// before the test item.
pub fn one_plus_random_rank<S: Scorer>(
    scorer: &S,
    test: &TestInstance,
    data: &Dataset,
    universe: &[FeatureId],
    pool: usize,
    gen: &mut ChaCha8Rng,
) -> Result<RankResult> {
    if pool < 1 {
        return Err(Error::Eval("candidate pool must be >= 1".into()));
    }
    if universe.len() < 2 {
        return Err(Error::Eval(format!(
            "item universe has {} items; ranking needs at least 2",
            universe.len()
        )));
    }

    let excluded = |fid: FeatureId| -> bool {
        if test.item == Some(fid) {
            return true;
        }
        match test.user {
            Some(u) => data.user_has_item(u, fid),
            None => false,
        }
    };
    let available: Vec<FeatureId> = universe.iter().copied().filter(|&f| !excluded(f)).collect();

    let prepared = scorer.prepare(test.user, &test.aux);
    let test_score = scorer.score(&prepared, test.item);

    let mut greater = 0usize;
    let mut ties = 0usize;
    let count;
    if available.len() <= pool {
        count = available.len();
        for &c in &available {
            let s = scorer.score(&prepared, Some(c));
            if s > test_score {
                greater += 1;
            } else if s == test_score {
                ties += 1;
            }
        }
    } else {
        count = pool;
        for idx in rand::seq::index::sample(gen, available.len(), pool) {
            let s = scorer.score(&prepared, Some(available[idx]));
            if s > test_score {
                greater += 1;
            } else if s == test_score {
                ties += 1;
            }
        }
    }

    Ok(RankResult {
        test_index: 0,
        rank: 1 + greater + ties,
        candidates: count,
    })
}

/// Fraction of test points ranked within the top `n`.
pub fn recall_at_n(results: &[RankResult], n: usize) -> f64 {
    assert!(!results.is_empty(), "recall over an empty result set");
    let hits = results.iter().filter(|r| r.rank <= n).count();
    hits as f64 / results.len() as f64
}

/// Mean reciprocal rank over the top `n`; misses contribute 0.
pub fn mrr_at_n(results: &[RankResult], n: usize) -> f64 {
    assert!(!results.is_empty(), "mrr over an empty result set");
    let sum: f64 = results
        .iter()
        .filter(|r| r.rank <= n)
        .map(|r| 1.0 / r.rank as f64)
        .sum();
    sum / results.len() as f64
}

/// Metrics of one fold.
#[derive(Debug, Clone)]
pub struct FoldMetrics {
    pub fold: usize,
    pub recall: BTreeMap<usize, f64>,
    pub mrr: BTreeMap<usize, f64>,
    pub test_count: usize,
    pub pool: usize,
}

/// Evaluate every test instance of a fold. Candidate sets are drawn from a
/// per-interaction stream derived as `mix(seed, fold, index)`, so reports
/// are reproducible without storing candidate lists and independent of the
/// parallel schedule. `universe` defaults to the training fold's items.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_fold<S: Scorer>(
    scorer: &S,
    tests: &[TestInstance],
    data: &Dataset,
    universe: Option<&[FeatureId]>,
    ns: &[usize],
    pool: usize,
    fold: usize,
    seed: u64,
) -> Result<FoldMetrics> {
    if tests.is_empty() {
        return Err(Error::Eval(format!("fold {fold} has an empty test set")));
    }
    if ns.is_empty() {
        return Err(Error::Eval("no cutoff N given".into()));
    }
    let default_universe: Vec<FeatureId>;
    let universe = match universe {
        Some(u) => u,
        None => {
            default_universe = data.items().collect();
            &default_universe
        }
    };

    let results: Vec<RankResult> = tests
        .par_iter()
        .enumerate()
        .map(|(idx, t)| {
            let mut gen = rng::stream(rng::mix(&[
                seed,
                rng::tags::EVAL_CANDIDATES,
                fold as u64,
                idx as u64,
            ]));
            one_plus_random_rank(scorer, t, data, universe, pool, &mut gen).map(|mut r| {
                r.test_index = idx;
                r
            })
        })
        .collect::<Result<_>>()?;

    let mut recall = BTreeMap::new();
    let mut mrr = BTreeMap::new();
    for &n in ns {
        recall.insert(n, recall_at_n(&results, n));
        mrr.insert(n, mrr_at_n(&results, n));
    }
    Ok(FoldMetrics {
        fold,
        recall,
        mrr,
        test_count: tests.len(),
        pool,
    })
}

/// Cross-validation report: per-fold metrics plus mean and sample standard
/// deviation (n-1 denominator) across folds.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub method: String,
    pub folds: Vec<FoldMetrics>,
    pub ns: Vec<usize>,
    pub pool: usize,
    pub seed: u64,
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var =
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

impl EvalReport {
    fn values(&self, metric: &str, n: usize) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| match metric {
                "recall" => f.recall[&n],
                "mrr" => f.mrr[&n],
                _ => unreachable!("unknown metric {metric}"),
            })
            .collect()
    }

    pub fn mean_recall(&self, n: usize) -> f64 {
        let v = self.values("recall", n);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn std_recall(&self, n: usize) -> f64 {
        sample_std(&self.values("recall", n))
    }

    pub fn mean_mrr(&self, n: usize) -> f64 {
        let v = self.values("mrr", n);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn std_mrr(&self, n: usize) -> f64 {
        sample_std(&self.values("mrr", n))
    }

    /// Human-readable report.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "one-plus-random evaluation: {}", self.method);
        let _ = writeln!(
            out,
            "folds: {}  candidate pool: {}  seed: {}",
            self.folds.len(),
            self.pool,
            self.seed
        );
        let _ = writeln!(
            out,
            "std is the sample standard deviation across folds (n-1 denominator)"
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "fold  tests  metric      value");
        for f in &self.folds {
            for &n in &self.ns {
                let _ = writeln!(
                    out,
                    "{:<5} {:<6} recall@{:<4} {:.6}",
                    f.fold, f.test_count, n, f.recall[&n]
                );
                let _ = writeln!(
                    out,
                    "{:<5} {:<6} mrr@{:<7} {:.6}",
                    f.fold, f.test_count, n, f.mrr[&n]
                );
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "aggregate (mean / std):");
        for &n in &self.ns {
            let _ = writeln!(
                out,
                "recall@{:<4} {:.6} / {:.6}",
                n,
                self.mean_recall(n),
                self.std_recall(n)
            );
            let _ = writeln!(
                out,
                "mrr@{:<7} {:.6} / {:.6}",
                n,
                self.mean_mrr(n),
                self.std_mrr(n)
            );
        }
        out
    }

    /// Machine-readable CSV: `fold,metric,n,value` rows followed by
    /// `mean`/`std` aggregate rows.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("fold,metric,n,value\n");
        for f in &self.folds {
            for &n in &self.ns {
                let _ = writeln!(out, "{},recall,{},{:.6}", f.fold, n, f.recall[&n]);
                let _ = writeln!(out, "{},mrr,{},{:.6}", f.fold, n, f.mrr[&n]);
            }
        }
        for &n in &self.ns {
            let _ = writeln!(out, "mean,recall,{},{:.6}", n, self.mean_recall(n));
            let _ = writeln!(out, "std,recall,{},{:.6}", n, self.std_recall(n));
            let _ = writeln!(out, "mean,mrr,{},{:.6}", n, self.mean_mrr(n));
            let _ = writeln!(out, "std,mrr,{},{:.6}", n, self.std_mrr(n));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::PopularityModel;
    use crate::data::{Dataset, Interaction};
    use crate::rng;
    use crate::testutil::{random_model, random_vector};
    use rand::Rng;

    fn rank(r: usize) -> RankResult {
        RankResult {
            test_index: 0,
            rank: r,
            candidates: 1000,
        }
    }

    #[test]
    fn recall_and_mrr_hand_values() {
        let all_ones = vec![rank(1), rank(1), rank(1)];
        assert_eq!(recall_at_n(&all_ones, 10), 1.0);
        assert_eq!(mrr_at_n(&all_ones, 10), 1.0);

        let mixed = vec![rank(1), rank(5), rank(100)];
        assert!((recall_at_n(&mixed, 10) - 2.0 / 3.0).abs() < 1e-15);

        let reciprocal = vec![rank(1), rank(2), rank(20)];
        assert!((mrr_at_n(&reciprocal, 10) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn null_model_recall_matches_uniform_ranks() {
        // uniform ranks over 1..=1001: recall@10 ~ 10/1001
        let mut gen = rng::stream(3);
        let results: Vec<RankResult> = (0..10_000)
            .map(|_| rank(gen.random_range(1..=1001)))
            .collect();
        let r = recall_at_n(&results, 10);
        assert!((r - 10.0 / 1001.0).abs() < 0.005, "recall {r}");
    }

    #[test]
    fn mrr_never_exceeds_recall() {
        let mut gen = rng::stream(4);
        for _ in 0..1000 {
            let results: Vec<RankResult> = (0..50)
                .map(|_| rank(gen.random_range(1..=200)))
                .collect();
            let n = gen.random_range(1..=50);
            let recall = recall_at_n(&results, n);
            let mrr = mrr_at_n(&results, n);
            assert!(0.0 <= mrr && mrr <= recall && recall <= 1.0);
        }
    }

    fn toy_dataset() -> Dataset {
        let mut rows = Vec::new();
        for u in 0..5 {
            for i in 0..3 {
                rows.push(Interaction::implicit(
                    &format!("u{u}"),
                    &format!("i{}", (u + i * 2) % 8),
                ));
            }
        }
        Dataset::from_interactions(&rows).unwrap()
    }

    #[test]
    fn unique_maximum_ranks_first_and_ties_rank_last() {
        struct Fixed(f64);
        impl Scorer for Fixed {
            type Prepared = ();
            fn prepare(&self, _: Option<FeatureId>, _: &SparseVector) {}
            fn score(&self, _: &(), item: Option<FeatureId>) -> f64 {
                match item {
                    // the test item in these tests is the dataset's item 0
                    Some(i) => {
                        if i == 5 {
                            self.0
                        } else {
                            1.0
                        }
                    }
                    None => 0.0,
                }
            }
        }
        let data = toy_dataset();
        let universe: Vec<FeatureId> = data.items().collect();
        let test = TestInstance {
            user: None,
            item: Some(5), // first item fid (5 users before the item block)
            aux: SparseVector::empty(),
        };
        // unique maximum
        let r = one_plus_random_rank(
            &Fixed(2.0),
            &test,
            &data,
            &universe,
            1000,
            &mut rng::stream(1),
        )
        .unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.candidates, universe.len() - 1);
        // all candidates tie with the test item: pessimistic rank
        let r = one_plus_random_rank(
            &Fixed(1.0),
            &test,
            &data,
            &universe,
            1000,
            &mut rng::stream(1),
        )
        .unwrap();
        assert_eq!(r.rank, 1 + r.candidates);
    }

    #[test]
    fn popularity_ranks_match_full_sort_oracle() {
        let data = toy_dataset();
        let pop = PopularityModel::fit(&data);
        let scorer = PopularityScorer::new(&pop);
        let universe: Vec<FeatureId> = data.items().collect();

        for (idx, rec) in data.records().iter().enumerate() {
            let test = TestInstance {
                user: Some(rec.user),
                item: Some(rec.item),
                aux: SparseVector::empty(),
            };
            let seed = rng::mix(&[77, idx as u64]);
            let got = one_plus_random_rank(
                &scorer,
                &test,
                &data,
                &universe,
                4,
                &mut rng::stream(seed),
            )
            .unwrap();

            // oracle: regenerate the same candidate set, sort descending with
            // the test item after every tied candidate
            let available: Vec<FeatureId> = universe
                .iter()
                .copied()
                .filter(|&f| f != rec.item && !data.user_has_item(rec.user, f))
                .collect();
            let cands: Vec<FeatureId> = if available.len() <= 4 {
                available
            } else {
                rand::seq::index::sample(&mut rng::stream(seed), available.len(), 4)
                    .into_iter()
                    .map(|i| available[i])
                    .collect()
            };
            let test_score = pop.score(rec.item);
            let oracle_rank =
                1 + cands.iter().filter(|&&c| pop.score(c) >= test_score).count();
            assert_eq!(got.rank, oracle_rank, "record {idx}");
            assert_eq!(got.candidates, cands.len());
        }
    }

    #[test]
    fn rank_invariant_under_increasing_transform() {
        struct Affine<'a>(PopularityScorer<'a>);
        impl Scorer for Affine<'_> {
            type Prepared = ();
            fn prepare(&self, _: Option<FeatureId>, _: &SparseVector) {}
            fn score(&self, _: &(), item: Option<FeatureId>) -> f64 {
                2.0 * self.0.score(&(), item) + 7.0
            }
        }
        let data = toy_dataset();
        let pop = PopularityModel::fit(&data);
        let universe: Vec<FeatureId> = data.items().collect();
        let rec = &data.records()[3];
        let test = TestInstance {
            user: Some(rec.user),
            item: Some(rec.item),
            aux: SparseVector::empty(),
        };
        let a = one_plus_random_rank(
            &PopularityScorer::new(&pop),
            &test,
            &data,
            &universe,
            5,
            &mut rng::stream(9),
        )
        .unwrap();
        let b = one_plus_random_rank(
            &Affine(PopularityScorer::new(&pop)),
            &test,
            &data,
            &universe,
            5,
            &mut rng::stream(9),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fm_scorer_matches_full_prediction() {
        // n = 4 users + 5 items + 3 aux
        let model = random_model(12, 4, 21);
        let scorer = FmScorer::new(&model);
        for case in 0..50u64 {
            let user = (case % 4) as u32;
            let item = 4 + (case % 5) as u32;
            let aux = SparseVector::from_pairs(vec![
                (9, 0.5 + (case % 3) as f64),
                (11, 1.0),
            ])
            .unwrap();
            let prep = scorer.prepare(Some(user), &aux);
            let fast = scorer.score(&prep, Some(item));

            let mut entries = vec![(user, 1.0), (item, 1.0)];
            entries.extend(aux.iter());
            let full = model
                .predict(&SparseVector::from_pairs(entries).unwrap())
                .unwrap();
            assert!((fast - full).abs() < 1e-9, "case {case}: {fast} vs {full}");
        }
        // cold user: only remaining terms
        let aux = SparseVector::from_pairs(vec![(10, 1.0)]).unwrap();
        let prep = scorer.prepare(None, &aux);
        let fast = scorer.score(&prep, Some(6));
        let full = model
            .predict(&SparseVector::from_pairs(vec![(6, 1.0), (10, 1.0)]).unwrap())
            .unwrap();
        assert!((fast - full).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_fold_metrics() {
        let data = toy_dataset();
        let pop = PopularityModel::fit(&data);
        let scorer = PopularityScorer::new(&pop);
        let tests: Vec<TestInstance> = data.records()[..4]
            .iter()
            .map(|r| TestInstance {
                user: Some(r.user),
                item: Some(r.item),
                aux: SparseVector::empty(),
            })
            .collect();
        let a = evaluate_fold(&scorer, &tests, &data, None, &[1, 3], 4, 0, 5).unwrap();
        let b = evaluate_fold(&scorer, &tests, &data, None, &[1, 3], 4, 0, 5).unwrap();
        assert_eq!(a.recall, b.recall);
        assert_eq!(a.mrr, b.mrr);
        // and the invariant chain holds
        for &n in &[1usize, 3] {
            assert!(a.mrr[&n] <= a.recall[&n] && a.recall[&n] <= 1.0);
        }
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let data = toy_dataset();
        let pop = PopularityModel::fit(&data);
        let scorer = PopularityScorer::new(&pop);
        assert!(matches!(
            evaluate_fold(&scorer, &[], &data, None, &[10], 10, 0, 1),
            Err(Error::Eval(_))
        ));
    }

    #[test]
    fn degenerate_universe_is_an_error() {
        let data = toy_dataset();
        let pop = PopularityModel::fit(&data);
        let scorer = PopularityScorer::new(&pop);
        let test = TestInstance {
            user: None,
            item: None,
            aux: SparseVector::empty(),
        };
        let uni = vec![data.item_fid(0)];
        assert!(one_plus_random_rank(&scorer, &test, &data, &uni, 5, &mut rng::stream(1)).is_err());
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let folds: Vec<FoldMetrics> = [0.1, 0.2, 0.3, 0.4]
            .iter()
            .enumerate()
            .map(|(f, &v)| FoldMetrics {
                fold: f,
                recall: BTreeMap::from([(10, v)]),
                mrr: BTreeMap::from([(10, v / 2.0)]),
                test_count: 10,
                pool: 100,
            })
            .collect();
        let report = EvalReport {
            method: "most-popular".into(),
            folds,
            ns: vec![10],
            pool: 100,
            seed: 1,
        };
        assert!((report.mean_recall(10) - 0.25).abs() < 1e-12);
        assert!((report.std_recall(10) - 0.12909944487358055).abs() < 1e-12);
        let csv = report.render_csv();
        assert!(csv.starts_with("fold,metric,n,value\n"));
        assert!(csv.contains("mean,recall,10,0.250000"));
        let text = report.render_text();
        assert!(text.contains("sample standard deviation"));
    }

    #[test]
    fn cold_entities_score_with_remaining_terms() {
        let model = random_model(12, 4, 33);
        let scorer = FmScorer::new(&model);
        let aux = random_vector(3, 2, 8); // ids 0..3 reused as aux for the math only
        let prep = scorer.prepare(None, &aux);
        // unknown item: constant only
        let s = scorer.score(&prep, None);
        assert!(s.is_finite());
    }
}
