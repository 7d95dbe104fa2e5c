//! Synthetic implicit-feedback datasets with planted taste clusters, used by
//! the timing sweeps and the test suites.

use rand::Rng;

use crate::data::Interaction;
use crate::rng;

/// Users and items are split into `clusters` groups (round-robin by index);
/// each user draws `per_user` distinct items, picking uniformly inside the
/// own cluster with probability `1 - noise` and uniformly anywhere with
/// probability `noise`.
pub fn clustered_implicit(
    n_users: usize,
    n_items: usize,
    clusters: usize,
    per_user: usize,
    noise: f64,
    seed: u64,
) -> Vec<Interaction> {
    assert!(clusters >= 1 && n_items >= clusters);
    assert!(per_user <= n_items);
    let mut rows = Vec::with_capacity(n_users * per_user);
    for u in 0..n_users {
        let cluster = u % clusters;
        let mut gen = rng::stream(rng::mix(&[seed, rng::tags::SYNTH, u as u64]));
        let mut chosen: Vec<usize> = Vec::with_capacity(per_user);
        while chosen.len() < per_user {
            let item = if gen.random_range(0.0..1.0) < noise {
                gen.random_range(0..n_items)
            } else {
                // round-robin layout: items of this cluster are cluster, cluster+clusters, ...
                let own = (n_items - cluster).div_ceil(clusters);
                cluster + clusters * gen.random_range(0..own)
            };
            if !chosen.contains(&item) {
                chosen.push(item);
            }
        }
        for item in chosen {
            rows.push(Interaction::implicit(&format!("u{u}"), &format!("i{item}")));
        }
    }
    rows
}

/// Two-domain variant: the same users interact in a sparse target domain and
/// a denser source domain, with one shared taste cluster per user. Item keys
/// are prefixed by their domain. The two domains take separate noise levels:
/// a noisier source models tastes that transfer at the user level while the
/// source co-occurrence structure itself stays fuzzy.
#[allow(clippy::too_many_arguments)]
pub fn clustered_two_domain(
    n_users: usize,
    clusters: usize,
    target_items: usize,
    target_per_user: usize,
    source_items: usize,
    source_per_user: usize,
    target_noise: f64,
    source_noise: f64,
    seed: u64,
    target_domain: &str,
    source_domain: &str,
) -> Vec<Interaction> {
    assert!(clusters >= 1 && target_items >= clusters && source_items >= clusters);
    let mut rows = Vec::new();
    for u in 0..n_users {
        let cluster = u % clusters;
        let user = format!("u{u}");
        let mut gen = rng::stream(rng::mix(&[seed, rng::tags::SYNTH, 1, u as u64]));
        for (domain, n_items, per_user, noise, prefix) in [
            (target_domain, target_items, target_per_user, target_noise, "t"),
            (source_domain, source_items, source_per_user, source_noise, "s"),
        ] {
            let mut chosen: Vec<usize> = Vec::with_capacity(per_user);
            while chosen.len() < per_user.min(n_items) {
                let item = if gen.random_range(0.0..1.0) < noise {
                    gen.random_range(0..n_items)
                } else {
                    let own = (n_items - cluster).div_ceil(clusters);
                    cluster + clusters * gen.random_range(0..own)
                };
                if !chosen.contains(&item) {
                    chosen.push(item);
                }
            }
            for item in chosen {
                rows.push(Interaction {
                    domain: Some(domain.to_owned()),
                    ..Interaction::implicit(&user, &format!("{prefix}{item}"))
                });
            }
        }
    }
    rows
}
