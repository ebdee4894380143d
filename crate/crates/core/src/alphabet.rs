use std::collections::HashMap;
use std::fmt;

use crate::error::{Result, SmError};

/// Dense identifier of a class label, contiguous in `[0, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub u32);

impl LabelId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense identifier of a binary feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(pub u32);

impl FeatureId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// The ordered set of class labels. Names are unique and ids are assigned
/// contiguously from 0 in insertion order.
#[derive(Debug, Clone)]
pub struct LabelAlphabet {
    names: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl LabelAlphabet {
    /// Builds an alphabet from distinct label names. Requires at least two
    /// labels; duplicates are rejected.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = LabelAlphabet { names: Vec::new(), index: HashMap::new() };
        for name in names {
            let name = name.into();
            if out.index.contains_key(&name) {
                return Err(SmError::InvalidInput(format!("duplicate label {name:?}")));
            }
            let id = LabelId(out.names.len() as u32);
            out.index.insert(name.clone(), id);
            out.names.push(name);
        }
        if out.names.len() < 2 {
            return Err(SmError::InvalidInput(format!(
                "alphabet needs at least 2 labels, got {}",
                out.names.len()
            )));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id.idx()]
    }

    pub fn contains(&self, id: LabelId) -> bool {
        id.idx() < self.names.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (0..self.names.len() as u32).map(LabelId)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }
}

/// A binary-feature example: the set of active feature ids, plus an optional
/// gold label for training.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseExample {
    features: Vec<FeatureId>,
    pub gold: Option<LabelId>,
}

impl SparseExample {
    /// Builds an example from active feature ids; duplicates are collapsed
    /// and the set is kept sorted.
    pub fn new<I: IntoIterator<Item = FeatureId>>(features: I) -> Self {
        let mut features: Vec<FeatureId> = features.into_iter().collect();
        features.sort_unstable();
        features.dedup();
        SparseExample { features, gold: None }
    }

    pub fn with_gold(mut self, gold: LabelId) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn features(&self) -> &[FeatureId] {
        &self.features
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.features.binary_search(&f).is_ok()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_assigns_contiguous_ids() {
        let a = LabelAlphabet::new(["NN", "VB", "JJ"]).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.id("NN"), Some(LabelId(0)));
        assert_eq!(a.id("JJ"), Some(LabelId(2)));
        assert_eq!(a.name(LabelId(1)), "VB");
        assert_eq!(a.id("XX"), None);
    }

    #[test]
    fn alphabet_rejects_duplicates_and_singletons() {
        assert!(LabelAlphabet::new(["NN", "NN"]).is_err());
        assert!(LabelAlphabet::new(["NN"]).is_err());
        assert!(LabelAlphabet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn sparse_example_dedupes_and_sorts() {
        let x = SparseExample::new([FeatureId(3), FeatureId(1), FeatureId(3)]);
        assert_eq!(x.features(), &[FeatureId(1), FeatureId(3)]);
        assert!(x.contains(FeatureId(3)));
        assert!(!x.contains(FeatureId(2)));
    }
}
