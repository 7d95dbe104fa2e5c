//! The order-2 factorization machine model and its scoring functions.
//!
//! A model over `n` features holds a global bias `w0`, first-order weights
//! `w[j]`, and a dense `n x k` factor matrix `V` whose rows are the factor
//! vectors `v_j`. The score of a sparse vector `x` is
//!
//! ```text
//! f(x) = w0 + sum_j w_j x_j + sum_{j<j'} <v_j, v_j'> x_j x_j'
//! ```
//!
//! [`FMModel::predict`] evaluates this through the factorized reformulation
//! `0.5 * sum_f [ (sum_j v_jf x_j)^2 - sum_j v_jf^2 x_j^2 ]`, which is linear
//! in the number of non-zeros; [`FMModel::predict_naive`] is the literal
//! double loop and exists as a differential-testing oracle only.

use rand::Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::{FeatureId, SparseVector};

/// Parameters of an order-2 factorization machine. All values are `f64`;
/// accumulation is in `f64` as well.
#[derive(Debug, Clone, PartialEq)]
pub struct FMModel {
    w0: f64,
    w: Vec<f64>,
    /// Row-major `n x k`.
    v: Vec<f64>,
    k: usize,
}

impl FMModel {
    /// All-zero model over `n` features with `k` factors.
    pub fn zeros(n: usize, k: usize) -> Self {
        FMModel {
            w0: 0.0,
            w: vec![0.0; n],
            v: vec![0.0; n * k],
            k,
        }
    }

    /// Standard initialization: `w0 = 0`, `w = 0`, and every factor drawn
    /// i.i.d. from `Normal(0, sigma0^2)`.
    ///
    /// Draws come from a ChaCha8 stream seeded with `seed`, filling `V` in
    /// row-major order (row 0 first), so the same seed yields a bit-identical
    /// model.
    pub fn seeded(n: usize, k: usize, sigma0: f64, seed: u64) -> Self {
        let mut model = FMModel::zeros(n, k);
        let normal = Normal::new(0.0, sigma0).expect("sigma0 must be finite and >= 0");
        let mut gen = rng::stream(seed);
        for x in model.v.iter_mut() {
            *x = gen.sample(normal);
        }
        model
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub(crate) fn w0_mut(&mut self) -> &mut f64 {
        &mut self.w0
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    /// Factor row `v_j`.
    pub fn factors(&self, j: FeatureId) -> &[f64] {
        let j = j as usize;
        &self.v[j * self.k..(j + 1) * self.k]
    }

    pub(crate) fn factors_mut(&mut self, j: FeatureId) -> &mut [f64] {
        let j = j as usize;
        &mut self.v[j * self.k..(j + 1) * self.k]
    }

    /// Raw factor storage (row-major), used by tests asserting locality.
    pub fn factor_matrix(&self) -> &[f64] {
        &self.v
    }

    fn check_ids(&self, x: &SparseVector) -> Result<()> {
        // canonical form: the largest id comes last
        if let Some(id) = x.max_id() {
            if id as usize >= self.n() {
                return Err(Error::IndexOutOfRange { id, n: self.n() });
            }
        }
        Ok(())
    }

    pub(crate) fn check_id(&self, id: FeatureId) -> Result<()> {
        if (id as usize) < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { id, n: self.n() })
        }
    }

    /// Model score `f(x)` via the O(k * nnz) factorized form.
    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        self.check_ids(x)?;
        let mut score = self.w0;
        for (j, xj) in x.iter() {
            score += self.w[j as usize] * xj;
        }
        for f in 0..self.k {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (j, xj) in x.iter() {
                let t = self.v[j as usize * self.k + f] * xj;
                sum += t;
                sum_sq += t * t;
            }
            score += 0.5 * (sum * sum - sum_sq);
        }
        Ok(score)
    }

    /// Literal double-loop evaluation of the order-2 model. Oracle only:
    /// O(nnz^2 * k).
    pub fn predict_naive(&self, x: &SparseVector) -> Result<f64> {
        self.check_ids(x)?;
        let mut score = self.w0;
        for (j, xj) in x.iter() {
            score += self.w[j as usize] * xj;
        }
        let e = x.entries();
        for a in 0..e.len() {
            for b in (a + 1)..e.len() {
                let (ja, xa) = e[a];
                let (jb, xb) = e[b];
                let dot: f64 = self
                    .factors(ja)
                    .iter()
                    .zip(self.factors(jb))
                    .map(|(p, q)| p * q)
                    .sum();
                score += dot * xa * xb;
            }
        }
        Ok(score)
    }

    /// Pairwise utility `g_z(u, i, j)`: the score difference between the
    /// interactions `(u, i, z)` and `(u, j, z)` after all terms not involving
    /// the item cancel:
    ///
    /// ```text
    /// g = (w_i - w_j) + sum_f v_uf (v_if - v_jf)
    ///                 + sum_z x_z sum_f v_zf (v_if - v_jf)
    /// ```
    pub fn pair_utility(
        &self,
        user: FeatureId,
        pos_item: FeatureId,
        neg_item: FeatureId,
        aux: &SparseVector,
    ) -> Result<f64> {
        self.check_id(user)?;
        self.check_id(pos_item)?;
        self.check_id(neg_item)?;
        self.check_ids(aux)?;

        let mut g = self.w[pos_item as usize] - self.w[neg_item as usize];
        let vu = self.factors(user);
        let vi = self.factors(pos_item);
        let vj = self.factors(neg_item);
        let mut acc = 0.0;
        for f in 0..self.k {
            acc += vu[f] * (vi[f] - vj[f]);
        }
        g += acc;
        for (z, xz) in aux.iter() {
            let vz = self.factors(z);
            let mut zacc = 0.0;
            for f in 0..self.k {
                zacc += vz[f] * (vi[f] - vj[f]);
            }
            g += xz * zacc;
        }
        Ok(g)
    }

    /// Errors if any parameter is NaN/Inf; names the offending group.
    pub fn ensure_finite(&self) -> Result<()> {
        if !self.w0.is_finite() {
            return Err(diverged("w0"));
        }
        if !self.w.iter().all(|x| x.is_finite()) {
            return Err(diverged("w"));
        }
        if !self.v.iter().all(|x| x.is_finite()) {
            return Err(diverged("v"));
        }
        Ok(())
    }
}

pub(crate) fn diverged(group: &'static str) -> Error {
    Error::NumericDivergence {
        group,
        epoch: 0,
        iter: 0,
    }
}
