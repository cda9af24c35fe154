use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mark::EdgeCategory;
use super::pag::{pair_key, PairKey};
use crate::error::{Error, Result};

/// Pinned edge facts carried across batches.
///
/// Categories are stored oriented to the (lo, hi) key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundKnowledge {
    facts: BTreeMap<PairKey, EdgeCategory>,
    provenance: BTreeMap<PairKey, usize>,
}

impl BackgroundKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pin `cat` for the ordered pair (a, b), promoted at `batch`.
    ///
    /// Re-inserting the same fact is a no-op; a different category for an
    /// already pinned pair is an error.
    pub fn insert(&mut self, a: usize, b: usize, cat: EdgeCategory, batch: usize) -> Result<()> {
        if a == b {
            return Err(Error::Config("background fact on a single variable".into()));
        }
        let key = pair_key(a, b);
        let norm = if a < b { cat } else { cat.reversed() };
        match self.facts.get(&key) {
            Some(existing) if *existing == norm => Ok(()),
            Some(existing) => Err(Error::Config(format!(
                "fact {key:?} already pinned as {existing:?}, refusing {norm:?}"
            ))),
            None => {
                self.facts.insert(key, norm);
                self.provenance.insert(key, batch);
                Ok(())
            }
        }
    }

    /// Category of (a, b) read with a as the first endpoint.
    pub fn get(&self, a: usize, b: usize) -> Option<EdgeCategory> {
        let c = *self.facts.get(&pair_key(a, b))?;
        Some(if a < b { c } else { c.reversed() })
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.facts.contains_key(&pair_key(a, b))
    }

    pub fn provenance(&self, a: usize, b: usize) -> Option<usize> {
        self.provenance.get(&pair_key(a, b)).copied()
    }

    /// Facts in key order as ((lo, hi), category oriented lo -> hi).
    pub fn iter(&self) -> impl Iterator<Item = (PairKey, EdgeCategory)> + '_ {
        self.facts.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Largest variable index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.facts.keys().map(|&(_, hi)| hi).max()
    }

    /// Human-readable lines such as `A -> B`, in key order.
    pub fn describe(&self, names: &[String]) -> Vec<String> {
        self.iter()
            .map(|((lo, hi), c)| match c.glyph() {
                Some(g) => format!("{} {} {}", names[lo], g, names[hi]),
                None => format!("{} no edge {}", names[lo], names[hi]),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_is_normalized() {
        let mut b = BackgroundKnowledge::new();
        b.insert(2, 0, EdgeCategory::Directed, 1).unwrap();
        assert_eq!(b.get(2, 0), Some(EdgeCategory::Directed));
        assert_eq!(b.get(0, 2), Some(EdgeCategory::ReverseDirected));
        assert_eq!(b.provenance(0, 2), Some(1));
    }

    #[test]
    fn contradiction_rejected_and_repeat_accepted() {
        let mut b = BackgroundKnowledge::new();
        b.insert(0, 1, EdgeCategory::Bidirected, 0).unwrap();
        b.insert(1, 0, EdgeCategory::Bidirected, 3).unwrap();
        assert_eq!(b.provenance(0, 1), Some(0));
        assert!(b.insert(0, 1, EdgeCategory::NoEdge, 3).is_err());
        assert_eq!(b.len(), 1);
    }
}
