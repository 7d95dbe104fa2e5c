//! Sparse feature vectors in canonical form: strictly increasing feature ids,
//! no explicit zeros.

use crate::error::{Error, Result};

/// Index into a model's feature/parameter space.
pub type FeatureId = u32;

/// A sparse feature vector, `x = {(j, x_j) | x_j != 0}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(FeatureId, f64)>,
}

impl SparseVector {
    /// The empty vector (all features zero).
    pub fn empty() -> Self {
        SparseVector::default()
    }

    /// Build from entries that are already sorted by strictly increasing id.
    ///
    /// Errors if ids are not strictly increasing or any value is exactly 0.
    pub fn from_sorted(entries: Vec<(FeatureId, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::domain(format!(
                    "sparse vector ids not strictly increasing: {} before {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((id, _)) = entries.iter().find(|(_, v)| *v == 0.0) {
            return Err(Error::domain(format!(
                "sparse vector holds an explicit zero at feature {id}"
            )));
        }
        Ok(SparseVector { entries })
    }

    /// Build from entries in any order; zeros are dropped, ids are sorted.
    ///
    /// Errors on duplicate ids.
    pub fn from_pairs(mut entries: Vec<(FeatureId, f64)>) -> Result<Self> {
        entries.retain(|(_, v)| *v != 0.0);
        entries.sort_by_key(|(id, _)| *id);
        Self::from_sorted(entries)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(FeatureId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest feature id, if any. Entries are sorted, so this is the last one.
    pub fn max_id(&self) -> Option<FeatureId> {
        self.entries.last().map(|(id, _)| *id)
    }
}
