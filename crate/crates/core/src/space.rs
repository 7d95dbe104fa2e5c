//! Dictionary encoding of external keys into a contiguous, namespace-blocked
//! feature space.
//!
//! Ids are laid out `[users | items | aux]`: user ids start at 0, item ids at
//! `user_count`, aux ids at `user_count + item_count`. To keep the blocks
//! contiguous, interning an item freezes the user block and interning an aux
//! feature freezes the item block; interning into a frozen block is an error
//! unless the key already exists.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sparse::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Namespace {
    User,
    Item,
    Aux,
}

impl Namespace {
    pub fn label(self) -> &'static str {
        match self {
            Namespace::User => "user",
            Namespace::Item => "item",
            Namespace::Aux => "aux",
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Block {
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl Block {
    fn intern(&mut self, key: &str) -> u32 {
        if let Some(&i) = self.index.get(key) {
            return i;
        }
        let i = self.keys.len() as u32;
        self.keys.push(key.to_owned());
        self.index.insert(key.to_owned(), i);
        i
    }

    fn get(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    fn len(&self) -> usize {
        self.keys.len()
    }
}

/// Bijective map between `(namespace, external key)` and dense feature ids.
#[derive(Debug, Clone, Default)]
pub struct FeatureSpace {
    users: Block,
    items: Block,
    aux: Block,
}

impl FeatureSpace {
    pub fn new() -> Self {
        FeatureSpace::default()
    }

    /// Register (or look up) a key, returning its feature id.
    pub fn intern(&mut self, ns: Namespace, key: &str) -> Result<FeatureId> {
        match ns {
            Namespace::User => {
                if self.users.get(key).is_none() && (self.items.len() > 0 || self.aux.len() > 0) {
                    return Err(Error::domain(format!(
                        "user block is frozen (items/aux already registered); cannot intern user `{key}`"
                    )));
                }
                Ok(self.users.intern(key))
            }
            Namespace::Item => {
                if self.items.get(key).is_none() && self.aux.len() > 0 {
                    return Err(Error::domain(format!(
                        "item block is frozen (aux already registered); cannot intern item `{key}`"
                    )));
                }
                Ok(self.items.intern(key) + self.item_offset())
            }
            Namespace::Aux => Ok(self.aux.intern(key) + self.aux_offset()),
        }
    }

    /// Look up a key without registering it.
    pub fn id(&self, ns: Namespace, key: &str) -> Option<FeatureId> {
        match ns {
            Namespace::User => self.users.get(key),
            Namespace::Item => self.items.get(key).map(|i| i + self.item_offset()),
            Namespace::Aux => self.aux.get(key).map(|i| i + self.aux_offset()),
        }
    }

    /// Inverse lookup: feature id back to `(namespace, key)`.
    pub fn feature(&self, id: FeatureId) -> Option<(Namespace, &str)> {
        let id = id as usize;
        let (u, i) = (self.users.len(), self.items.len());
        if id < u {
            Some((Namespace::User, &self.users.keys[id]))
        } else if id < u + i {
            Some((Namespace::Item, &self.items.keys[id - u]))
        } else if id < u + i + self.aux.len() {
            Some((Namespace::Aux, &self.aux.keys[id - u - i]))
        } else {
            None
        }
    }

    pub fn namespace_of(&self, id: FeatureId) -> Option<Namespace> {
        self.feature(id).map(|(ns, _)| ns)
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn aux_count(&self) -> usize {
        self.aux.len()
    }

    /// Total number of features, `n`.
    pub fn len(&self) -> usize {
        self.users.len() + self.items.len() + self.aux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn item_offset(&self) -> u32 {
        self.users.len() as u32
    }

    pub fn aux_offset(&self) -> u32 {
        (self.users.len() + self.items.len()) as u32
    }

    /// Feature id of the item with block ordinal `ord`.
    pub fn item_fid(&self, ord: usize) -> FeatureId {
        debug_assert!(ord < self.items.len());
        ord as u32 + self.item_offset()
    }

    /// Block ordinal of an item feature id.
    pub fn item_ordinal(&self, fid: FeatureId) -> Option<usize> {
        let off = self.item_offset();
        if fid >= off && ((fid - off) as usize) < self.items.len() {
            Some((fid - off) as usize)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocked_layout_and_roundtrip() {
        let mut s = FeatureSpace::new();
        let u0 = s.intern(Namespace::User, "alice").unwrap();
        let u1 = s.intern(Namespace::User, "bob").unwrap();
        let i0 = s.intern(Namespace::Item, "apple").unwrap();
        let z0 = s.intern(Namespace::Aux, "mood=happy").unwrap();
        assert_eq!((u0, u1, i0, z0), (0, 1, 2, 3));

        // round-trip id -> (ns, key) -> id for every registered feature
        for fid in 0..s.len() as u32 {
            let (ns, key) = s.feature(fid).unwrap();
            assert_eq!(s.id(ns, key), Some(fid));
        }
        assert_eq!(s.feature(4), None);
    }

    #[test]
    fn interning_same_key_is_stable() {
        let mut s = FeatureSpace::new();
        let a = s.intern(Namespace::User, "u").unwrap();
        let b = s.intern(Namespace::User, "u").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_blocks_reject_new_keys() {
        let mut s = FeatureSpace::new();
        s.intern(Namespace::User, "u").unwrap();
        s.intern(Namespace::Item, "i").unwrap();
        // user block frozen by the item; existing keys still resolve
        assert!(s.intern(Namespace::User, "u2").is_err());
        assert_eq!(s.intern(Namespace::User, "u").unwrap(), 0);
        s.intern(Namespace::Aux, "z").unwrap();
        assert!(s.intern(Namespace::Item, "i2").is_err());
        assert_eq!(s.intern(Namespace::Item, "i").unwrap(), 1);
    }

    #[test]
    fn item_ordinal_mapping() {
        let mut s = FeatureSpace::new();
        s.intern(Namespace::User, "u").unwrap();
        s.intern(Namespace::Item, "a").unwrap();
        s.intern(Namespace::Item, "b").unwrap();
        assert_eq!(s.item_fid(1), 2);
        assert_eq!(s.item_ordinal(2), Some(1));
        assert_eq!(s.item_ordinal(0), None);
    }
}
