//! Auxiliary feature construction: contextual/categorical features and
//! cross-domain features built from a user's source-domain history.
//!
//! Both builders come in two flavours: `build_*` interns new aux features
//! into a mutable [`FeatureSpace`] (training side), `resolve_*` only looks
//! keys up against a frozen space and silently drops unknown ones (test
//! side), so a frozen model is never asked about features it has no
//! parameters for.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::ChaCha8Rng;
use crate::space::{FeatureSpace, Namespace};
use crate::sparse::SparseVector;

/// How one context dimension maps to aux features.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextKind {
    /// Each distinct value becomes its own aux feature. Raw values may be
    /// pipe-joined lists (`action|comedy`), one feature per part.
    Categorical,
    /// Real values are bucketed by ascending boundaries `b0..bm`: bin `i`
    /// covers `[b_i, b_{i+1})`, the last bin is closed. Values outside
    /// `[b0, bm]` are a bin error.
    Binned(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextDim {
    pub name: String,
    pub kind: ContextKind,
    /// Value written into the sparse vector for this dimension's features.
    pub weight: f64,
}

impl ContextDim {
    pub fn categorical(name: &str) -> Self {
        ContextDim {
            name: name.to_owned(),
            kind: ContextKind::Categorical,
            weight: 1.0,
        }
    }

    pub fn binned(name: &str, boundaries: Vec<f64>) -> Self {
        ContextDim {
            name: name.to_owned(),
            kind: ContextKind::Binned(boundaries),
            weight: 1.0,
        }
    }
}

/// Declares which context dimensions become aux features and how.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextSchema {
    pub dims: Vec<ContextDim>,
    /// When set, the entries of each built vector are scaled to sum to 1.
    pub normalize: bool,
}

impl ContextSchema {
    pub fn new(dims: Vec<ContextDim>) -> Result<Self> {
        let schema = ContextSchema {
            dims,
            normalize: false,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.dims.iter().enumerate() {
            if self.dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::domain(format!("duplicate context dimension `{}`", d.name)));
            }
            if let ContextKind::Binned(bounds) = &d.kind {
                if bounds.len() < 2 {
                    return Err(Error::domain(format!(
                        "dimension `{}` needs at least two bin boundaries",
                        d.name
                    )));
                }
                if bounds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::domain(format!(
                        "bin boundaries of `{}` must be strictly ascending",
                        d.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self, name: &str) -> Option<&ContextDim> {
        self.dims.iter().find(|d| d.name == name)
    }
}

fn bin_index(name: &str, bounds: &[f64], v: f64) -> Result<usize> {
    let last = *bounds.last().unwrap();
    if v < bounds[0] || v > last {
        return Err(Error::domain(format!(
            "value {v} of dimension `{name}` falls outside the bins [{}, {last}]",
            bounds[0]
        )));
    }
    if v == last {
        return Ok(bounds.len() - 2);
    }
    Ok(bounds.windows(2).position(|w| v >= w[0] && v < w[1]).unwrap())
}

enum SpaceAccess<'a> {
    Intern(&'a mut FeatureSpace),
    Lookup(&'a FeatureSpace),
}

impl SpaceAccess<'_> {
    fn aux_id(&mut self, key: &str) -> Result<Option<u32>> {
        match self {
            SpaceAccess::Intern(space) => space.intern(Namespace::Aux, key).map(Some),
            SpaceAccess::Lookup(space) => Ok(space.id(Namespace::Aux, key)),
        }
    }
}

fn context_vector(
    schema: &ContextSchema,
    raw: &BTreeMap<String, String>,
    mut space: SpaceAccess,
) -> Result<SparseVector> {
    for dim in raw.keys() {
        if schema.dim(dim).is_none() {
            return Err(Error::domain(format!(
                "context dimension `{dim}` is not declared in the schema"
            )));
        }
    }
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for dim in &schema.dims {
        let Some(value) = raw.get(&dim.name) else {
            continue;
        };
        match &dim.kind {
            ContextKind::Categorical => {
                let mut seen: Vec<&str> = Vec::new();
                for part in value.split('|').filter(|p| !p.is_empty()) {
                    if seen.contains(&part) {
                        continue;
                    }
                    seen.push(part);
                    let key = format!("{}={part}", dim.name);
                    if let Some(id) = space.aux_id(&key)? {
                        entries.push((id, dim.weight));
                    }
                }
            }
            ContextKind::Binned(bounds) => {
                let v: f64 = value.parse().map_err(|_| {
                    Error::domain(format!(
                        "dimension `{}` is binned but value `{value}` is not numeric",
                        dim.name
                    ))
                })?;
                let bin = bin_index(&dim.name, bounds, v)?;
                let key = format!("{}:bin{bin}", dim.name);
                if let Some(id) = space.aux_id(&key)? {
                    entries.push((id, dim.weight));
                }
            }
        }
    }
    if schema.normalize && !entries.is_empty() {
        let total: f64 = entries.iter().map(|(_, v)| v).sum();
        if total != 0.0 {
            for e in &mut entries {
                e.1 /= total;
            }
        }
    }
    SparseVector::from_pairs(entries)
}

/// Turn raw context values into an aux vector, registering new aux features.
/// Every dimension in `raw` must be declared in the schema.
pub fn build_context_vector(
    schema: &ContextSchema,
    raw: &BTreeMap<String, String>,
    space: &mut FeatureSpace,
) -> Result<SparseVector> {
    context_vector(schema, raw, SpaceAccess::Intern(space))
}

/// As [`build_context_vector`] but read-only: context values never seen
/// during training resolve to nothing.
pub fn resolve_context_vector(
    schema: &ContextSchema,
    raw: &BTreeMap<String, String>,
    space: &FeatureSpace,
) -> Result<SparseVector> {
    context_vector(schema, raw, SpaceAccess::Lookup(space))
}

/// Feature value scheme for cross-domain features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueScheme {
    /// Presence indicator: every selected source item gets value 1.
    Binary,
    /// `1 / |I_j(u)|`, the user's full feedback count in that source domain
    /// (not the selected count).
    CountNormalized,
}

/// Cross-domain feature construction settings.
#[derive(Debug, Clone)]
pub struct CrossDomainConfig {
    pub target: String,
    pub sources: Vec<String>,
    pub scheme: ValueScheme,
    /// At most this many source items per user per source domain.
    pub max_per_domain: usize,
    pub seed: u64,
}

impl CrossDomainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_per_domain < 1 {
            return Err(Error::domain("cd_max_per_domain must be >= 1"));
        }
        if self.sources.contains(&self.target) {
            return Err(Error::domain(format!(
                "target domain `{}` cannot also be a source",
                self.target
            )));
        }
        if self.sources.is_empty() {
            return Err(Error::domain("at least one source domain is required"));
        }
        Ok(())
    }
}

fn cross_domain_vector(
    cfg: &CrossDomainConfig,
    history: &BTreeMap<String, Vec<String>>,
    mut space: SpaceAccess,
    gen: &mut ChaCha8Rng,
) -> Result<SparseVector> {
    cfg.validate()?;
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for (domain, raw_items) in history {
        if *domain == cfg.target || !cfg.sources.contains(domain) {
            continue;
        }
        // history lists are sets of items; dedupe preserving first occurrence
        let mut items: Vec<&String> = Vec::with_capacity(raw_items.len());
        for it in raw_items {
            if !items.contains(&it) {
                items.push(it);
            }
        }
        if items.is_empty() {
            continue;
        }
        let full = items.len();
        let value = match cfg.scheme {
            ValueScheme::Binary => 1.0,
            ValueScheme::CountNormalized => 1.0 / full as f64,
        };
        let selected: Vec<&String> = if full <= cfg.max_per_domain {
            items
        } else {
            rand::seq::index::sample(gen, full, cfg.max_per_domain)
                .into_iter()
                .map(|i| items[i])
                .collect()
        };
        for item in selected {
            let key = format!("cd:{domain}:{item}");
            if let Some(id) = space.aux_id(&key)? {
                entries.push((id, value));
            }
        }
    }
    SparseVector::from_pairs(entries)
}

/// Build a user's cross-domain aux vector from their per-domain source
/// histories, selecting at most `max_per_domain` items per source domain by
/// seeded uniform sampling without replacement. `gen` should be a per-user
/// stream so selections are reproducible per user.
pub fn build_cross_domain_vector(
    cfg: &CrossDomainConfig,
    history: &BTreeMap<String, Vec<String>>,
    space: &mut FeatureSpace,
    gen: &mut ChaCha8Rng,
) -> Result<SparseVector> {
    cross_domain_vector(cfg, history, SpaceAccess::Intern(space), gen)
}

/// As [`build_cross_domain_vector`] but read-only against a frozen space.
/// With the same per-user stream the selection is identical; items whose
/// features were never interned resolve to nothing.
pub fn resolve_cross_domain_vector(
    cfg: &CrossDomainConfig,
    history: &BTreeMap<String, Vec<String>>,
    space: &FeatureSpace,
    gen: &mut ChaCha8Rng,
) -> Result<SparseVector> {
    cross_domain_vector(cfg, history, SpaceAccess::Lookup(space), gen)
}
