//! Baseline rankers: Most-Popular and a standalone BPR-MF.
//!
//! BPR-MF is implemented on its own model layout with its own update code.
//! Fed the same seed and sample stream, it must produce exactly the factors
//! of the pairwise FM trainer run with item biases disabled and no auxiliary
//! features; that equivalence is this module's central test.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::diverged;
use crate::pairwise::{
    ascent_multiplier, log_sigmoid, sample_pair, EpochStats, PairSample, TrainConfig,
};
use crate::rng;
use crate::sparse::FeatureId;

/// Item interaction counts from a training fold; scores are user-independent.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    counts: Vec<u64>,
    item_offset: u32,
}

impl PopularityModel {
    pub fn fit(data: &Dataset) -> Self {
        let mut counts = vec![0u64; data.item_count()];
        let offset = data.space().item_offset();
        for rec in data.records() {
            counts[(rec.item - offset) as usize] += 1;
        }
        PopularityModel {
            counts,
            item_offset: offset,
        }
    }

    /// Training count of an item feature id; unknown items score 0.
    pub fn score(&self, item: FeatureId) -> f64 {
        if item < self.item_offset {
            return 0.0;
        }
        self.counts
            .get((item - self.item_offset) as usize)
            .map_or(0.0, |&c| c as f64)
    }

    /// Top-n item fids by count, ties broken by ascending internal item id.
    pub fn top_n(&self, n: usize) -> Vec<FeatureId> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(n)
            .map(|o| o as u32 + self.item_offset)
            .collect()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Plain matrix factorization: user and item factor tables, no biases.
#[derive(Debug, Clone)]
pub struct MfModel {
    k: usize,
    users: Vec<f64>,
    items: Vec<f64>,
    item_offset: u32,
}

impl MfModel {
    /// Factors drawn from `Normal(0, sigma0^2)` on a single ChaCha8 stream,
    /// users first then items — the same draw order the FM initializer uses
    /// over a `[users | items]` feature space.
    pub fn seeded(n_users: usize, n_items: usize, k: usize, sigma0: f64, seed: u64) -> Self {
        use rand::Rng;
        let normal = rand_distr::Normal::new(0.0, sigma0).expect("sigma0 must be >= 0");
        let mut gen = rng::stream(seed);
        let mut users = vec![0.0; n_users * k];
        let mut items = vec![0.0; n_items * k];
        for x in users.iter_mut() {
            *x = gen.sample(normal);
        }
        for x in items.iter_mut() {
            *x = gen.sample(normal);
        }
        MfModel {
            k,
            users,
            items,
            item_offset: n_users as u32,
        }
    }

    pub fn for_dataset(data: &Dataset, cfg: &TrainConfig) -> Self {
        MfModel::seeded(
            data.user_count(),
            data.item_count(),
            cfg.k,
            cfg.sigma0,
            cfg.seed,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn user_count(&self) -> usize {
        self.users.len() / self.k.max(1)
    }

    pub fn item_offset(&self) -> u32 {
        self.item_offset
    }

    pub fn user_factors(&self, user: FeatureId) -> &[f64] {
        let u = user as usize;
        &self.users[u * self.k..(u + 1) * self.k]
    }

    fn user_factors_mut(&mut self, user: FeatureId) -> &mut [f64] {
        let u = user as usize;
        &mut self.users[u * self.k..(u + 1) * self.k]
    }

    /// Item factors by item feature id (offset into the item block).
    pub fn item_factors(&self, item: FeatureId) -> &[f64] {
        let i = (item - self.item_offset) as usize;
        &self.items[i * self.k..(i + 1) * self.k]
    }

    fn item_factors_mut(&mut self, item: FeatureId) -> &mut [f64] {
        let i = (item - self.item_offset) as usize;
        &mut self.items[i * self.k..(i + 1) * self.k]
    }

    fn check(&self, s: &PairSample) -> Result<()> {
        let n_items = (self.items.len() / self.k.max(1)) as u32;
        if s.user >= self.item_offset {
            return Err(Error::IndexOutOfRange {
                id: s.user,
                n: self.item_offset as usize,
            });
        }
        for item in [s.pos_item, s.neg_item] {
            if item < self.item_offset || item - self.item_offset >= n_items {
                return Err(Error::IndexOutOfRange {
                    id: item,
                    n: (self.item_offset + n_items) as usize,
                });
            }
        }
        Ok(())
    }

    /// `f_MF(u, i)`: inner product of user and item factors.
    pub fn score(&self, user: FeatureId, item: FeatureId) -> f64 {
        self.user_factors(user)
            .iter()
            .zip(self.item_factors(item))
            .map(|(p, q)| p * q)
            .sum()
    }
}

/// Per-step buffers for [`bpr_mf_step`].
pub struct MfScratch {
    diff: Vec<f64>,
    pu: Vec<f64>,
}

impl MfScratch {
    pub fn new(k: usize) -> Self {
        MfScratch {
            diff: vec![0.0; k],
            pu: vec![0.0; k],
        }
    }
}

/// One SGD ascent step on `ln sigmoid(g_MF) - reg` with
/// `g_MF = sum_f v_uf (v_if - v_jf)`: the pairwise update with the bias and
/// aux terms removed. The sample's aux vector is ignored. Returns
/// `ln sigmoid(g)` before the update.
pub fn bpr_mf_step(
    model: &mut MfModel,
    s: &PairSample,
    cfg: &TrainConfig,
    scratch: &mut MfScratch,
) -> Result<f64> {
    model.check(s)?;
    let k = model.k;
    let mut g = 0.0;
    {
        let pu = model.user_factors(s.user);
        let qi = model.item_factors(s.pos_item);
        let qj = model.item_factors(s.neg_item);
        for f in 0..k {
            scratch.diff[f] = qi[f] - qj[f];
            scratch.pu[f] = pu[f];
            g += pu[f] * scratch.diff[f];
        }
    }
    if !g.is_finite() {
        return Err(diverged("utility"));
    }
    let delta = ascent_multiplier(g);
    let loss = log_sigmoid(g);
    let eta = cfg.learn_rate;
    let reg = cfg.reg_v;

    {
        let pu = model.user_factors_mut(s.user);
        for f in 0..k {
            pu[f] += eta * (delta * scratch.diff[f] - reg * pu[f]);
        }
        if !pu.iter().all(|x| x.is_finite()) {
            return Err(diverged("user factors"));
        }
    }
    {
        let qi = model.item_factors_mut(s.pos_item);
        for f in 0..k {
            qi[f] += eta * (delta * scratch.pu[f] - reg * qi[f]);
        }
        if !qi.iter().all(|x| x.is_finite()) {
            return Err(diverged("item factors"));
        }
    }
    {
        let qj = model.item_factors_mut(s.neg_item);
        for f in 0..k {
            qj[f] += eta * (-delta * scratch.pu[f] - reg * qj[f]);
        }
        if !qj.iter().all(|x| x.is_finite()) {
            return Err(diverged("item factors"));
        }
    }
    Ok(loss)
}

/// Train BPR-MF with the same bootstrap sampler (and sampler stream) as the
/// pairwise FM trainer.
pub fn train_bpr_mf(data: &Dataset, cfg: &TrainConfig) -> Result<MfModel> {
    train_bpr_mf_observed(data, cfg, |_, _| {})
}

pub fn train_bpr_mf_observed(
    data: &Dataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(EpochStats, &MfModel),
) -> Result<MfModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if !data.trainable() {
        return Err(Error::Untrainable);
    }
    let mut model = MfModel::for_dataset(data, cfg);
    let mut sampler = rng::stream(rng::mix(&[cfg.seed, rng::tags::TRAIN_SAMPLER]));
    let mut scratch = MfScratch::new(cfg.k);
    let draws = data.len();

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for iter in 0..draws {
            let s = sample_pair(data, &mut sampler)?;
            let loss = bpr_mf_step(&mut model, &s, cfg, &mut scratch).map_err(|e| match e {
                Error::NumericDivergence { group, .. } => {
                    Error::NumericDivergence { group, epoch, iter }
                }
                other => other,
            })?;
            loss_sum += loss;
        }
        observer(
            EpochStats {
                epoch,
                mean_loss: loss_sum / draws as f64,
            },
            &model,
        );
    }
    Ok(model)
}
