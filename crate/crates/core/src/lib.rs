//! Learning-to-rank recommendations with factorization machines.
//!
//! The core model is an order-2 FM scoring sparse `(user, item, aux)`
//! feature vectors. It can be trained two ways:
//!
//! * [`pairwise`] — BPR-style ranking loss over (user, positive, sampled
//!   negative) triples, the method of choice for implicit feedback. With
//!   item biases disabled and no aux features it degenerates exactly to
//!   BPR-MF (see [`baselines`]).
//! * [`pointwise`] — classic squared-loss SGD, used for the implicit-to-
//!   explicit mapping baseline and for rating prediction.
//!
//! [`features`] builds auxiliary vectors from interaction context or from a
//! user's history in other item domains; [`eval`] ranks held-out positives
//! against sampled unobserved items (one-plus-random) and reports Recall@N
//! and MRR@N; [`experiment`] wires everything into a config-file-driven
//! cross-validation runner with timing sweeps.
//!
//! All randomness flows through explicitly seeded ChaCha8 streams ([`rng`]),
//! so every run — sampling, initialization, splits, candidate draws — is
//! reproducible bit for bit from the seeds in the config.

// the SGD kernels index several factor slices by the same loop variable
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod model;
pub mod pairwise;
pub mod pointwise;
pub mod rng;
pub mod space;
pub mod sparse;
pub mod synth;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
