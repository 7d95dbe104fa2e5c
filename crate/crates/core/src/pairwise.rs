//! Pairwise ranking trainer for factorization machines.
//!
//! Training data are (user, positive item, negative item) triples: positives
//! are bootstrap-sampled with replacement from the observed interactions, the
//! negative is drawn uniformly from the items the user has not interacted
//! with. Each triple moves the parameters one SGD step up the regularized
//! log-likelihood `sum ln sigmoid(g) - sum lambda * theta^2`, where `g` is the
//! pairwise utility of the triple under the positive interaction's auxiliary
//! features.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{diverged, FMModel};
use crate::rng::{self, ChaCha8Rng};
use crate::space::{FeatureSpace, Namespace};
use crate::sparse::{FeatureId, SparseVector};

use rand::Rng;

/// Hyper-parameters shared by the trainers.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Factorization dimension.
    pub k: usize,
    pub epochs: usize,
    /// SGD learning rate (eta). Constant across epochs.
    pub learn_rate: f64,
    /// Regularization per parameter group.
    pub reg_w0: f64,
    pub reg_w: f64,
    pub reg_v: f64,
    /// Std-dev of the zero-mean normal initialization of factors.
    pub sigma0: f64,
    pub seed: u64,
    /// Update the first-order item weights w_i / w_j. Disabling them (and
    /// using no aux features) makes the trainer coincide with BPR-MF.
    pub item_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 10,
            epochs: 300,
            learn_rate: 0.005,
            reg_w0: 0.0,
            reg_w: 0.0,
            reg_v: 0.0,
            sigma0: 0.1,
            seed: 42,
            item_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learn_rate.is_nan() || self.learn_rate <= 0.0 {
            return Err(Error::domain("learn_rate must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::domain("epochs must be >= 1"));
        }
        if self.reg_w0 < 0.0 || self.reg_w < 0.0 || self.reg_v < 0.0 {
            return Err(Error::domain("regularization values must be >= 0"));
        }
        if self.sigma0.is_nan() || self.sigma0 < 0.0 {
            return Err(Error::domain("sigma0 must be >= 0"));
        }
        Ok(())
    }
}

/// One sampled training triple. The auxiliary vector is the one attached to
/// the positive interaction; the negative side reuses it.
#[derive(Debug, Clone)]
pub struct PairSample<'a> {
    pub user: FeatureId,
    pub pos_item: FeatureId,
    pub neg_item: FeatureId,
    pub aux: &'a SparseVector,
}

impl<'a> PairSample<'a> {
    /// Construct with namespace validation against a feature space.
    pub fn checked(
        space: &FeatureSpace,
        user: FeatureId,
        pos_item: FeatureId,
        neg_item: FeatureId,
        aux: &'a SparseVector,
    ) -> Result<Self> {
        let expect = |fid: FeatureId, ns: Namespace| -> Result<()> {
            match space.namespace_of(fid) {
                Some(actual) if actual == ns => Ok(()),
                Some(actual) => Err(Error::domain(format!(
                    "feature {fid} is in namespace {} but {} was required",
                    actual.label(),
                    ns.label()
                ))),
                None => Err(Error::domain(format!("feature {fid} is not registered"))),
            }
        };
        expect(user, Namespace::User)?;
        expect(pos_item, Namespace::Item)?;
        expect(neg_item, Namespace::Item)?;
        for (z, _) in aux.iter() {
            expect(z, Namespace::Aux)?;
        }
        Ok(PairSample {
            user,
            pos_item,
            neg_item,
            aux,
        })
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)` without overflow for large |x|.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// The SGD multiplier `delta = 1/(1 + e^g) = sigmoid(-g)`, i.e. the
/// derivative of `ln sigmoid(g)` with respect to `g`.
pub(crate) fn ascent_multiplier(g: f64) -> f64 {
    sigmoid(-g)
}

/// Reusable per-step buffers (all length k).
pub struct SgdScratch {
    /// sum_z x_z * v_zf
    zsum: Vec<f64>,
    /// v_if - v_jf at step entry
    diff: Vec<f64>,
    /// v_uf + zsum_f at step entry
    usum: Vec<f64>,
}

impl SgdScratch {
    pub fn new(k: usize) -> Self {
        SgdScratch {
            zsum: vec![0.0; k],
            diff: vec![0.0; k],
            usum: vec![0.0; k],
        }
    }
}

/// Draw one training triple: a positive `(u, i)` uniformly with replacement
/// from the interactions, then a negative item uniformly from `I \ I+_u`
/// (rejection sampling). Positives whose user has no unobserved item are
/// redrawn; if no user has one the dataset is untrainable.
pub fn sample_pair<'d>(data: &'d Dataset, gen: &mut ChaCha8Rng) -> Result<PairSample<'d>> {
    if data.is_empty() {
        return Err(Error::domain("cannot sample from an empty dataset"));
    }
    if !data.trainable() {
        return Err(Error::Untrainable);
    }
    let n_items = data.item_count();
    loop {
        let rec = &data.records()[gen.random_range(0..data.len())];
        if data.user_items(rec.user).len() == n_items {
            continue; // no negative exists for this user
        }
        let neg_item = loop {
            let fid = data.item_fid(gen.random_range(0..n_items));
            if !data.user_has_item(rec.user, fid) {
                break fid;
            }
        };
        return Ok(PairSample {
            user: rec.user,
            pos_item: rec.item,
            neg_item,
            aux: &rec.aux,
        });
    }
}

/// One SGD ascent step on `ln sigmoid(g) - reg`, touching only the parameters
/// with non-zero gradient:
///
/// ```text
/// dg/dw_i  = 1                     dg/dv_uf = v_if - v_jf
/// dg/dw_j  = -1                    dg/dv_if = v_uf + sum_z x_z v_zf
/// dg/dv_zf = x_z (v_if - v_jf)     dg/dv_jf = -(v_uf + sum_z x_z v_zf)
/// ```
///
/// each as `theta += eta * (delta * dg/dtheta - lambda * theta)` with
/// `delta = 1/(1+e^g)`. Gradients use the parameter values at step entry
/// (simultaneous update). Returns `ln sigmoid(g)` before the update.
///
/// `w0` never appears in `g` and is not updated.
pub fn sgd_step(model: &mut FMModel, s: &PairSample, cfg: &TrainConfig) -> Result<f64> {
    let mut scratch = SgdScratch::new(model.k());
    sgd_step_with(model, s, cfg, &mut scratch)
}

/// [`sgd_step`] with caller-provided buffers; the training loop reuses them.
pub fn sgd_step_with(
    model: &mut FMModel,
    s: &PairSample,
    cfg: &TrainConfig,
    scratch: &mut SgdScratch,
) -> Result<f64> {
    let g = model.pair_utility(s.user, s.pos_item, s.neg_item, s.aux)?;
    if !g.is_finite() {
        return Err(diverged("utility"));
    }
    let delta = ascent_multiplier(g);
    let loss = log_sigmoid(g);
    let eta = cfg.learn_rate;
    let k = model.k();

    // entry-value caches
    scratch.zsum.fill(0.0);
    for (z, xz) in s.aux.iter() {
        let vz = model.factors(z);
        for f in 0..k {
            scratch.zsum[f] += xz * vz[f];
        }
    }
    {
        let vi = model.factors(s.pos_item);
        let vj = model.factors(s.neg_item);
        for f in 0..k {
            scratch.diff[f] = vi[f] - vj[f];
        }
    }
    {
        let vu = model.factors(s.user);
        for f in 0..k {
            scratch.usum[f] = vu[f] + scratch.zsum[f];
        }
    }

    if cfg.item_bias {
        let w = model.weights_mut();
        let wi = &mut w[s.pos_item as usize];
        *wi += eta * (delta - cfg.reg_w * *wi);
        let wj = &mut w[s.neg_item as usize];
        *wj += eta * (-delta - cfg.reg_w * *wj);
        if !w[s.pos_item as usize].is_finite() || !w[s.neg_item as usize].is_finite() {
            return Err(diverged("w"));
        }
    }

    let reg_v = cfg.reg_v;
    {
        let vu = model.factors_mut(s.user);
        for f in 0..k {
            vu[f] += eta * (delta * scratch.diff[f] - reg_v * vu[f]);
        }
    }
    {
        let vi = model.factors_mut(s.pos_item);
        for f in 0..k {
            vi[f] += eta * (delta * scratch.usum[f] - reg_v * vi[f]);
        }
    }
    {
        let vj = model.factors_mut(s.neg_item);
        for f in 0..k {
            vj[f] += eta * (-delta * scratch.usum[f] - reg_v * vj[f]);
        }
    }
    for (z, xz) in s.aux.iter() {
        let vz = model.factors_mut(z);
        for f in 0..k {
            vz[f] += eta * (delta * xz * scratch.diff[f] - reg_v * vz[f]);
        }
    }

    for row in [s.user, s.pos_item, s.neg_item] {
        if !model.factors(row).iter().all(|x| x.is_finite()) {
            return Err(diverged("v"));
        }
    }
    for (z, _) in s.aux.iter() {
        if !model.factors(z).iter().all(|x| x.is_finite()) {
            return Err(diverged("v"));
        }
    }
    Ok(loss)
}

/// Per-epoch summary handed to training observers.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean objective over the epoch's updates: `ln sigmoid(g)` for the
    /// pairwise trainer, squared error for the pointwise trainer.
    pub mean_loss: f64,
}

/// Train a pairwise FM. One epoch is `|D|` bootstrap draws; the whole run is
/// deterministic given `cfg.seed` (one ChaCha8 stream for initialization and
/// a derived one for sampling).
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<FMModel> {
    train_observed(data, cfg, |_, _| {})
}

/// [`train`] invoking `observer` after every epoch with that epoch's stats
/// and the model so far.
pub fn train_observed(
    data: &Dataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(EpochStats, &FMModel),
) -> Result<FMModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if !data.trainable() {
        return Err(Error::Untrainable);
    }

    let mut model = FMModel::seeded(data.space().len(), cfg.k, cfg.sigma0, cfg.seed);
    let mut sampler = rng::stream(rng::mix(&[cfg.seed, rng::tags::TRAIN_SAMPLER]));
    let mut scratch = SgdScratch::new(cfg.k);
    let draws = data.len();

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for iter in 0..draws {
            let s = sample_pair(data, &mut sampler)?;
            let loss = sgd_step_with(&mut model, &s, cfg, &mut scratch).map_err(|e| match e {
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
