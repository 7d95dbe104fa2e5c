//! Statistical and analytical properties of the trainers: negative-sampling
//! uniformity, gradient correctness against finite differences, and
//! objective improvement on planted data.
#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeMap;

use fmpair_core::data::{Dataset, Interaction};
use fmpair_core::pairwise::{self, sample_pair, PairSample, TrainConfig};
use fmpair_core::pointwise::{pointwise_step, LabeledInstance};
use fmpair_core::rng;
use fmpair_core::space::Namespace;
use fmpair_core::sparse::SparseVector;
use fmpair_core::testutil::{central_diff, nudge, random_model, random_vector, Param};

use common::{chi2_critical_p01, rel_err};

#[test]
fn negative_sampling_is_uniform_over_unobserved_items() {
    // 2 users, 100 items, 10 positives each; the empirical negative-item
    // distribution per user must pass a chi-square uniformity test over the
    // 90 unobserved items at p > 0.01.
    let mut rows = Vec::new();
    for u in 0..2 {
        for p in 0..10 {
            rows.push(Interaction::implicit(
                &format!("u{u}"),
                &format!("i{}", u * 10 + p),
            ));
        }
        // make every item part of the universe through a filler user
    }
    for i in 0..100 {
        rows.push(Interaction::implicit("filler", &format!("i{i}")));
    }
    let data = Dataset::from_interactions(&rows).unwrap();
    let mut gen = rng::stream(12345);

    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut user_totals: BTreeMap<u32, u64> = BTreeMap::new();
    let mut draws = 0u64;
    while draws < 100_000 {
        let s = sample_pair(&data, &mut gen).unwrap();
        // the filler user is saturated-ish noise; tally only the two probes
        if s.user <= 1 {
            *counts.entry((s.user, s.neg_item)).or_default() += 1;
            *user_totals.entry(s.user).or_default() += 1;
        }
        draws += 1;
    }

    let critical = chi2_critical_p01(89);
    for user in 0..2u32 {
        let total = user_totals[&user] as f64;
        let expected = total / 90.0;
        let mut chi2 = 0.0;
        let mut cells = 0;
        for item in data.items() {
            if data.user_has_item(user, item) {
                continue;
            }
            let observed = counts.get(&(user, item)).copied().unwrap_or(0) as f64;
            chi2 += (observed - expected).powi(2) / expected;
            cells += 1;
        }
        assert_eq!(cells, 90);
        assert!(
            chi2 < critical,
            "user {user}: chi2 {chi2:.2} >= critical {critical:.2} over {total} draws"
        );
    }
}

/// Layout used by the gradient tests: 4 users, 6 items, 3 aux features.
const N_USERS: u32 = 4;
const N_ITEMS: u32 = 6;
const N_AUX: u32 = 3;
const N: usize = (N_USERS + N_ITEMS + N_AUX) as usize;

fn random_case(case: u64) -> (u32, u32, u32, SparseVector) {
    use rand::Rng;
    let mut gen = rng::stream(rng::mix(&[4040, case]));
    let user = gen.random_range(0..N_USERS);
    let pos = N_USERS + gen.random_range(0..N_ITEMS);
    let neg = loop {
        let j = N_USERS + gen.random_range(0..N_ITEMS);
        if j != pos {
            break j;
        }
    };
    let aux_lo = N_USERS + N_ITEMS;
    let n_aux = gen.random_range(1..=2);
    let mut entries = Vec::new();
    for idx in rand::seq::index::sample(&mut gen, N_AUX as usize, n_aux) {
        entries.push((aux_lo + idx as u32, gen.random_range(0.25..2.0)));
    }
    (user, pos, neg, SparseVector::from_pairs(entries).unwrap())
}

#[test]
fn pairwise_gradient_table_matches_finite_differences() {
    let h = 1e-5;
    for case in 0..100u64 {
        let model = random_model(N, 3, rng::mix(&[17, case]));
        let (user, pos, neg, aux) = random_case(case);
        let g = |m: &fmpair_core::model::FMModel| m.pair_utility(user, pos, neg, &aux).unwrap();

        let vu = model.factors(user).to_vec();
        let vi = model.factors(pos).to_vec();
        let vj = model.factors(neg).to_vec();
        let mut zsum = [0.0; 3];
        for (z, xz) in aux.iter() {
            for (f, s) in zsum.iter_mut().enumerate() {
                *s += xz * model.factors(z)[f];
            }
        }

        // analytic gradient table
        let mut expected: Vec<(Param, f64)> = vec![(Param::W(pos), 1.0), (Param::W(neg), -1.0)];
        for f in 0..3 {
            expected.push((Param::V(user, f), vi[f] - vj[f]));
            expected.push((Param::V(pos, f), vu[f] + zsum[f]));
            expected.push((Param::V(neg, f), -vu[f] - zsum[f]));
        }
        for (z, xz) in aux.iter() {
            for f in 0..3 {
                expected.push((Param::V(z, f), xz * (vi[f] - vj[f])));
            }
        }

        for (p, analytic) in &expected {
            let fd = central_diff(&model, *p, h, g);
            if *analytic != 0.0 {
                assert!(
                    rel_err(*analytic, fd) <= 1e-6,
                    "case {case} {p:?}: analytic {analytic} vs fd {fd}"
                );
            } else {
                assert!(fd.abs() <= 1e-8, "case {case} {p:?}: fd {fd} for zero analytic");
            }
        }

        // parameters outside the table have (numerically) zero gradient
        let untouched = [
            Param::W0,
            Param::W(user),
            Param::V((user + 1) % N_USERS, 0),
            Param::W(if pos + 1 < N_USERS + N_ITEMS { pos + 1 } else { N_USERS }),
        ];
        for p in untouched {
            let in_table = expected.iter().any(|(q, _)| q == &p);
            if in_table {
                continue;
            }
            let fd = central_diff(&model, p, h, g);
            assert!(fd.abs() <= 1e-8, "case {case} {p:?}: fd {fd} expected 0");
        }
    }
}

#[test]
fn sgd_step_moves_along_the_analytic_gradient() {
    // one tiny step with zero regularization changes g as predicted by the
    // gradient's squared norm
    for case in 0..20u64 {
        let mut model = random_model(N, 3, rng::mix(&[18, case]));
        let (user, pos, neg, aux) = random_case(case + 500);
        let cfg = TrainConfig {
            k: 3,
            learn_rate: 1e-4,
            ..TrainConfig::default()
        };
        let before = model.pair_utility(user, pos, neg, &aux).unwrap();
        let s = PairSample {
            user,
            pos_item: pos,
            neg_item: neg,
            aux: &aux,
        };
        pairwise::sgd_step(&mut model, &s, &cfg).unwrap();
        let after = model.pair_utility(user, pos, neg, &aux).unwrap();
        assert!(
            after > before,
            "case {case}: ascent step decreased g ({before} -> {after})"
        );
    }
}

#[test]
fn pointwise_gradient_matches_finite_differences() {
    let h = 1e-5;
    for case in 0..100u64 {
        let model = random_model(10, 3, rng::mix(&[19, case]));
        let x = random_vector(10, 4, rng::mix(&[20, case]));
        let predict = |m: &fmpair_core::model::FMModel| m.predict(&x).unwrap();

        let sums: Vec<f64> = (0..3)
            .map(|f| x.iter().map(|(j, xj)| model.factors(j)[f] * xj).sum())
            .collect();

        let fd0 = central_diff(&model, Param::W0, h, predict);
        assert!(rel_err(1.0, fd0) <= 1e-6, "w0: {fd0}");
        for (j, xj) in x.iter() {
            let fdw = central_diff(&model, Param::W(j), h, predict);
            assert!(rel_err(xj, fdw) <= 1e-6, "case {case} w[{j}]: {xj} vs {fdw}");
            for f in 0..3 {
                let analytic = xj * (sums[f] - model.factors(j)[f] * xj);
                let fd = central_diff(&model, Param::V(j, f), h, predict);
                if analytic != 0.0 {
                    assert!(
                        rel_err(analytic, fd) <= 1e-6,
                        "case {case} v[{j},{f}]: {analytic} vs {fd}"
                    );
                } else {
                    assert!(fd.abs() <= 1e-8);
                }
            }
        }
    }
}

#[test]
fn pointwise_step_matches_manual_update() {
    // hand-roll one update from the analytic gradient and compare
    let model0 = random_model(8, 2, 71);
    let x = random_vector(8, 3, 72);
    let inst = LabeledInstance { x: x.clone(), y: 0.7 };
    let cfg = TrainConfig {
        k: 2,
        learn_rate: 0.01,
        reg_w0: 0.1,
        reg_w: 0.2,
        reg_v: 0.3,
        ..TrainConfig::default()
    };

    let mut stepped = model0.clone();
    pointwise_step(&mut stepped, &inst, &cfg).unwrap();

    let e = model0.predict(&x).unwrap() - inst.y;
    let mut manual = model0.clone();
    nudge(&mut manual, Param::W0, -cfg.learn_rate * (2.0 * e + 2.0 * cfg.reg_w0 * model0.w0()));
    let sums: Vec<f64> = (0..2)
        .map(|f| x.iter().map(|(j, xj)| model0.factors(j)[f] * xj).sum())
        .collect();
    for (j, xj) in x.iter() {
        let w = model0.weights()[j as usize];
        nudge(&mut manual, Param::W(j), -cfg.learn_rate * (2.0 * e * xj + 2.0 * cfg.reg_w * w));
        for f in 0..2 {
            let v = model0.factors(j)[f];
            let grad = xj * (sums[f] - v * xj);
            nudge(
                &mut manual,
                Param::V(j, f),
                -cfg.learn_rate * (2.0 * e * grad + 2.0 * cfg.reg_v * v),
            );
        }
    }
    assert!((stepped.w0() - manual.w0()).abs() < 1e-14);
    for j in 0..8u32 {
        assert!((stepped.weights()[j as usize] - manual.weights()[j as usize]).abs() < 1e-14);
        for f in 0..2 {
            assert!((stepped.factors(j)[f] - manual.factors(j)[f]).abs() < 1e-14);
        }
    }
}

fn planted_dataset() -> Dataset {
    // 5 users x 10 items, block structure: users 0-2 like items 0-4,
    // users 3-4 like items 5-9
    let mut rows = Vec::new();
    for u in 0..5 {
        let base = if u < 3 { 0 } else { 5 };
        for p in 0..5 {
            rows.push(Interaction::implicit(
                &format!("u{u}"),
                &format!("i{}", base + p),
            ));
        }
    }
    Dataset::from_interactions(&rows).unwrap()
}

#[test]
fn planted_structure_objective_improves_and_smooths() {
    let data = planted_dataset();
    let cfg = TrainConfig {
        k: 2,
        epochs: 200,
        learn_rate: 0.05,
        sigma0: 0.1,
        seed: 11,
        ..TrainConfig::default()
    };
    let mut losses = Vec::with_capacity(200);
    pairwise::train_observed(&data, &cfg, |st, _| losses.push(st.mean_loss)).unwrap();
    assert_eq!(losses.len(), 200);

    // objective sanity: the mean log-likelihood improves overall
    assert!(
        losses[199] > losses[0],
        "final {} <= initial {}",
        losses[199],
        losses[0]
    );

    // after epoch 50 each 20-epoch window's mean is no worse than the
    // previous window's
    let window = |t: usize| -> f64 { losses[t..t + 20].iter().sum::<f64>() / 20.0 };
    for t in (70..=180).step_by(1) {
        let prev = window(t - 20);
        let cur = window(t);
        assert!(
            cur >= prev - 1e-6,
            "window at {t} regressed: {prev} -> {cur}"
        );
    }
}

#[test]
fn trained_model_ranks_planted_positives_higher() {
    let data = planted_dataset();
    let cfg = TrainConfig {
        k: 2,
        epochs: 200,
        learn_rate: 0.05,
        sigma0: 0.1,
        seed: 11,
        ..TrainConfig::default()
    };
    let model = pairwise::train(&data, &cfg).unwrap();
    let aux = SparseVector::empty();
    // user 0 (block A) must prefer an in-block item over a block-B item
    let u = data.space().id(Namespace::User, "u0").unwrap();
    let pos = data.space().id(Namespace::Item, "i1").unwrap();
    let neg = data.space().id(Namespace::Item, "i7").unwrap();
    let g = model.pair_utility(u, pos, neg, &aux).unwrap();
    assert!(g > 0.0, "planted preference not recovered: g = {g}");
}
