//! Seeded random models and vectors for tests. Not part of the public API.

use rand::Rng;
use rand_distr::Normal;

use crate::model::FMModel;
use crate::rng;
use crate::sparse::SparseVector;

/// A model with every parameter (bias, weights, factors) drawn from
/// `Normal(0, 0.3)` on a ChaCha8 stream.
pub fn random_model(n: usize, k: usize, seed: u64) -> FMModel {
    let mut m = FMModel::seeded(n, k, 0.3, seed);
    let normal = Normal::new(0.0, 0.3).unwrap();
    let mut gen = rng::stream(rng::mix(&[seed, 0xF00D]));
    *m.w0_mut() = gen.sample(normal);
    for w in m.weights_mut() {
        *w = gen.sample(normal);
    }
    m
}

/// Addressable model parameter, for gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    W0,
    W(u32),
    V(u32, usize),
}

/// Add `delta` to one parameter.
pub fn nudge(model: &mut FMModel, p: Param, delta: f64) {
    match p {
        Param::W0 => *model.w0_mut() += delta,
        Param::W(j) => model.weights_mut()[j as usize] += delta,
        Param::V(j, f) => model.factors_mut(j)[f] += delta,
    }
}

/// Central finite difference of `f` with respect to parameter `p`.
pub fn central_diff(model: &FMModel, p: Param, h: f64, f: impl Fn(&FMModel) -> f64) -> f64 {
    let mut plus = model.clone();
    nudge(&mut plus, p, h);
    let mut minus = model.clone();
    nudge(&mut minus, p, -h);
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// A canonical sparse vector with `nnz` distinct ids below `n` and values in
/// `[-2, 2] \ {0}`.
pub fn random_vector(n: usize, nnz: usize, seed: u64) -> SparseVector {
    assert!(nnz <= n);
    let mut gen = rng::stream(rng::mix(&[seed, 0xBEEF]));
    let mut ids = rand::seq::index::sample(&mut gen, n, nnz).into_vec();
    ids.sort_unstable();
    let entries = ids
        .into_iter()
        .map(|id| {
            let mut v: f64 = gen.random_range(-2.0..2.0);
            if v == 0.0 {
                v = 1.0;
            }
            (id as u32, v)
        })
        .collect();
    SparseVector::from_sorted(entries).unwrap()
}
