use std::collections::HashMap;

use crate::alphabet::FeatureId;

/// Bidirectional map between string feature names and dense feature ids.
/// Ids are assigned in interning order, so rebuilding an interner from the
/// same name sequence reproduces the same ids.
#[derive(Debug, Clone, Default)]
pub struct FeatureInterner {
    names: Vec<String>,
    index: HashMap<String, FeatureId>,
}

impl FeatureInterner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, creating one on first sight.
    pub fn intern(&mut self, name: &str) -> FeatureId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = FeatureId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    /// Lookup without inserting; `None` for names never seen in training.
    pub fn lookup(&self, name: &str) -> Option<FeatureId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: FeatureId) -> Option<&str> {
        self.names.get(id.idx()).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_idempotent_and_injective() {
        let mut interner = FeatureInterner::new();
        let a = interner.intern("t-1=NN");
        let b = interner.intern("t+1=VB");
        assert_ne!(a, b);
        assert_eq!(interner.intern("t-1=NN"), a);
        assert_eq!(interner.lookup("t+1=VB"), Some(b));
        assert_eq!(interner.lookup("never"), None);
        assert_eq!(interner.name(a), Some("t-1=NN"));
        assert_eq!(interner.len(), 2);
    }
}
