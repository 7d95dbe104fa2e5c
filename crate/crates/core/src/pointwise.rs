//! Pointwise squared-loss trainer: the standard FM fit by SGD, used for the
//! implicit-to-explicit mapping baseline and for raw rating prediction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{diverged, FMModel};
use crate::pairwise::{EpochStats, TrainConfig};
use crate::rng::{self, ChaCha8Rng};
use crate::sparse::SparseVector;

/// One labelled training point `(x, y)`.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub x: SparseVector,
    pub y: f64,
}

/// Reusable per-step buffers.
pub struct PointwiseScratch {
    /// sum_j v_jf x_j per factor
    sums: Vec<f64>,
}

impl PointwiseScratch {
    pub fn new(k: usize) -> Self {
        PointwiseScratch {
            sums: vec![0.0; k],
        }
    }
}

/// One SGD descent step on `(f(x) - y)^2 + sum lambda theta^2`:
/// with residual `e = f(x) - y`, every touched parameter moves by
/// `theta -= eta * (2 e df/dtheta + 2 lambda theta)` where
/// `df/dw0 = 1`, `df/dw_j = x_j`, and
/// `df/dv_jf = x_j (sum_j' v_j'f x_j' - v_jf x_j)`.
/// Gradients use the values at step entry. Returns `e^2` before the update.
pub fn pointwise_step(model: &mut FMModel, inst: &LabeledInstance, cfg: &TrainConfig) -> Result<f64> {
    let mut scratch = PointwiseScratch::new(model.k());
    pointwise_step_with(model, inst, cfg, &mut scratch)
}

/// [`pointwise_step`] with caller-provided buffers.
pub fn pointwise_step_with(
    model: &mut FMModel,
    inst: &LabeledInstance,
    cfg: &TrainConfig,
    scratch: &mut PointwiseScratch,
) -> Result<f64> {
    let k = model.k();

    // prediction, keeping the factor sums for the gradient
    scratch.sums.fill(0.0);
    let mut pred = model.w0();
    for (j, xj) in inst.x.iter() {
        model.check_id(j)?;
        pred += model.weights()[j as usize] * xj;
    }
    let mut sq = 0.0;
    for (j, xj) in inst.x.iter() {
        let row = model.factors(j);
        for f in 0..k {
            let t = row[f] * xj;
            scratch.sums[f] += t;
            sq += t * t;
        }
    }
    for f in 0..k {
        pred += 0.5 * scratch.sums[f] * scratch.sums[f];
    }
    pred -= 0.5 * sq;

    if !pred.is_finite() {
        return Err(diverged("prediction"));
    }
    let e = pred - inst.y;
    let eta = cfg.learn_rate;

    {
        let w0 = model.w0_mut();
        *w0 -= eta * (2.0 * e + 2.0 * cfg.reg_w0 * *w0);
        if !w0.is_finite() {
            return Err(diverged("w0"));
        }
    }
    for (j, xj) in inst.x.iter() {
        let wj = &mut model.weights_mut()[j as usize];
        *wj -= eta * (2.0 * e * xj + 2.0 * cfg.reg_w * *wj);
        if !wj.is_finite() {
            return Err(diverged("w"));
        }
    }
    for (j, xj) in inst.x.iter() {
        let row = model.factors_mut(j);
        for f in 0..k {
            let grad = xj * (scratch.sums[f] - row[f] * xj);
            row[f] -= eta * (2.0 * e * grad + 2.0 * cfg.reg_v * row[f]);
        }
        if !row.iter().all(|x| x.is_finite()) {
            return Err(diverged("v"));
        }
    }
    Ok(e * e)
}

/// Train a pointwise FM over a feature space of size `n`. Each epoch visits
/// every instance once in a seeded-shuffled order; deterministic given
/// `cfg.seed`.
pub fn train_pointwise(n: usize, data: &[LabeledInstance], cfg: &TrainConfig) -> Result<FMModel> {
    train_pointwise_observed(n, data, cfg, |_, _| {})
}

/// [`train_pointwise`] with a per-epoch observer; `mean_loss` is the epoch's
/// mean squared error.
pub fn train_pointwise_observed(
    n: usize,
    data: &[LabeledInstance],
    cfg: &TrainConfig,
    mut observer: impl FnMut(EpochStats, &FMModel),
) -> Result<FMModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty instance list"));
    }
    for inst in data {
        if let Some(id) = inst.x.max_id() {
            if id as usize >= n {
                return Err(Error::IndexOutOfRange { id, n });
            }
        }
    }

    let mut model = FMModel::seeded(n, cfg.k, cfg.sigma0, cfg.seed);
    let mut shuffler = rng::stream(rng::mix(&[cfg.seed, rng::tags::POINTWISE_SHUFFLE]));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut scratch = PointwiseScratch::new(cfg.k);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffler);
        let mut loss_sum = 0.0;
        for (iter, &idx) in order.iter().enumerate() {
            let loss = pointwise_step_with(&mut model, &data[idx], cfg, &mut scratch).map_err(
                |e| match e {
                    Error::NumericDivergence { group, .. } => {
                        Error::NumericDivergence { group, epoch, iter }
                    }
                    other => other,
                },
            )?;
            loss_sum += loss;
        }
        observer(
            EpochStats {
                epoch,
                mean_loss: loss_sum / data.len() as f64,
            },
            &model,
        );
    }
    Ok(model)
}

/// Map a positive-only dataset to labelled pointwise instances: one
/// `(x_{u,i,z}, +1)` per positive, plus per user as many `(x_{u,j}, neg_label)`
/// instances as that user has positives, with `j` drawn uniformly from the
/// user's unobserved items (sampled with replacement across draws).
///
/// Users who have interacted with every item contribute no negatives; the
/// dataset as a whole must be trainable.
pub fn build_fm_map_training(
    data: &Dataset,
    neg_label: f64,
    gen: &mut ChaCha8Rng,
) -> Result<Vec<LabeledInstance>> {
    if data.is_empty() {
        return Err(Error::domain("cannot build instances from an empty dataset"));
    }
    if !data.trainable() {
        return Err(Error::Untrainable);
    }
    let n_items = data.item_count();
    let mut out = Vec::with_capacity(2 * data.len());

    for rec in data.records() {
        // blocked id layout keeps user < item < aux, so entries are sorted
        let mut entries = vec![(rec.user, 1.0), (rec.item, 1.0)];
        entries.extend(rec.aux.iter());
        out.push(LabeledInstance {
            x: SparseVector::from_sorted(entries)?,
            y: 1.0,
        });
    }

    for user in 0..data.user_count() as u32 {
        let positives = data.user_items(user).len();
        if positives == n_items {
            continue; // saturated user: no unobserved item exists
        }
        for _ in 0..positives {
            let neg = loop {
                let fid = data.item_fid(gen.random_range(0..n_items));
                if !data.user_has_item(user, fid) {
                    break fid;
                }
            };
            out.push(LabeledInstance {
                x: SparseVector::from_sorted(vec![(user, 1.0), (neg, 1.0)])?,
                y: neg_label,
            });
        }
    }
    Ok(out)
}
