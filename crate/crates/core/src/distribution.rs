use crate::alphabet::{LabelAlphabet, LabelId};
use crate::error::{Result, SmError};

/// Tolerance on the sum-to-one invariant of a [`LabelDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// The set of class labels still under consideration. Always non-empty and
/// kept sorted by label id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionSet {
    members: Vec<LabelId>,
}

impl ConfusionSet {
    /// Builds a set from label ids; duplicates collapse. Errors when empty.
    pub fn new<I: IntoIterator<Item = LabelId>>(members: I) -> Result<Self> {
        let mut members: Vec<LabelId> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(SmError::InvalidInput("confusion set must be non-empty".into()));
        }
        Ok(ConfusionSet { members })
    }

    pub fn singleton(id: LabelId) -> Self {
        ConfusionSet { members: vec![id] }
    }

    /// The full alphabet as a confusion set.
    pub fn full(alphabet: &LabelAlphabet) -> Self {
        ConfusionSet { members: alphabet.ids().collect() }
    }

    pub fn contains(&self, id: LabelId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[LabelId] {
        &self.members
    }

    pub fn is_subset_of(&self, other: &ConfusionSet) -> bool {
        self.members.iter().all(|id| other.contains(*id))
    }

    pub fn intersect(&self, other: &ConfusionSet) -> Option<ConfusionSet> {
        let members: Vec<LabelId> =
            self.members.iter().copied().filter(|id| other.contains(*id)).collect();
        if members.is_empty() {
            None
        } else {
            Some(ConfusionSet { members })
        }
    }
}

/// A probability distribution over a subset of the label alphabet. Only
/// strictly positive probabilities are stored, so the support is exactly the
/// stored key set; the stored mass sums to 1 within [`NORMALIZATION_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    /// Sorted by label id.
    probs: Vec<(LabelId, f64)>,
}

impl LabelDistribution {
    /// Builds a distribution from already-normalized pairs. Entries must be
    /// strictly positive, distinct, and sum to 1 within tolerance.
    pub fn new<I: IntoIterator<Item = (LabelId, f64)>>(pairs: I) -> Result<Self> {
        let mut probs: Vec<(LabelId, f64)> = pairs.into_iter().collect();
        probs.sort_unstable_by_key(|(id, _)| *id);
        if probs.is_empty() {
            return Err(SmError::InvalidInput("distribution has empty support".into()));
        }
        for w in probs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SmError::InvalidInput(format!("duplicate label {}", w[0].0)));
            }
        }
        let mut sum = 0.0;
        for &(id, p) in &probs {
            if !(p > 0.0) || !p.is_finite() {
                return Err(SmError::InvalidInput(format!(
                    "probability for label {id} must be positive and finite, got {p}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(SmError::InvalidInput(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(LabelDistribution { probs })
    }

    /// Builds a distribution from non-negative weights by dropping zeros and
    /// normalizing the rest. Errors when every weight is zero.
    pub fn from_weights<I: IntoIterator<Item = (LabelId, f64)>>(weights: I) -> Result<Self> {
        let mut probs: Vec<(LabelId, f64)> = weights
            .into_iter()
            .filter(|&(_, w)| w > 0.0 && w.is_finite())
            .collect();
        probs.sort_unstable_by_key(|(id, _)| *id);
        probs.dedup_by_key(|(id, _)| *id);
        let total: f64 = probs.iter().map(|&(_, w)| w).sum();
        if probs.is_empty() || !(total > 0.0) || !total.is_finite() {
            return Err(SmError::InvalidInput("all weights are zero".into()));
        }
        for (_, w) in probs.iter_mut() {
            *w /= total;
        }
        Ok(LabelDistribution { probs })
    }

    /// The uniform distribution over a confusion set.
    pub fn uniform(cs: &ConfusionSet) -> Self {
        let p = 1.0 / cs.len() as f64;
        LabelDistribution { probs: cs.iter().map(|id| (id, p)).collect() }
    }

    /// Probability of a label; 0 outside the support.
    pub fn get(&self, id: LabelId) -> f64 {
        match self.probs.binary_search_by_key(&id, |(i, _)| *i) {
            Ok(k) => self.probs[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LabelId, f64)> + '_ {
        self.probs.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.probs.iter().map(|(id, _)| *id)
    }

    pub fn support_subset_of(&self, cs: &ConfusionSet) -> bool {
        self.probs.iter().all(|(id, _)| cs.contains(*id))
    }

    /// Highest-probability label, ties broken by lowest label id. The scan
    /// runs in ascending id order with a strict comparison, which makes the
    /// tie-break total and deterministic.
    pub fn argmax(&self) -> LabelId {
        let mut best = self.probs[0];
        for &(id, p) in &self.probs[1..] {
            if p > best.1 {
                best = (id, p);
            }
        }
        best.0
    }

    /// Restricts the distribution to `cs` and renormalizes. Errors when the
    /// intersection of the support with `cs` is empty.
    pub fn restrict(&self, cs: &ConfusionSet) -> Result<LabelDistribution> {
        LabelDistribution::from_weights(
            self.probs.iter().copied().filter(|(id, _)| cs.contains(*id)),
        )
        .map_err(|_| SmError::InvalidInput("restriction has empty support".into()))
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().map(|&(_, p)| p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u32) -> LabelId {
        LabelId(n)
    }

    #[test]
    fn confusion_set_rejects_empty() {
        assert!(ConfusionSet::new(Vec::new()).is_err());
    }

    #[test]
    fn confusion_set_subset_and_intersection() {
        let a = ConfusionSet::new([id(0), id(1), id(2)]).unwrap();
        let b = ConfusionSet::new([id(1), id(2)]).unwrap();
        assert!(b.is_subset_of(&a));
        assert!(!a.is_subset_of(&b));
        assert_eq!(a.intersect(&b).unwrap(), b);
        let c = ConfusionSet::singleton(id(7));
        assert!(a.intersect(&c).is_none());
    }

    #[test]
    fn distribution_validates_mass() {
        assert!(LabelDistribution::new([(id(0), 0.5), (id(1), 0.5)]).is_ok());
        assert!(LabelDistribution::new([(id(0), 0.5), (id(1), 0.4)]).is_err());
        assert!(LabelDistribution::new([(id(0), 1.0), (id(0), 0.0)]).is_err());
        assert!(LabelDistribution::new(Vec::new()).is_err());
        assert!(LabelDistribution::new([(id(0), 0.0), (id(1), 1.0)]).is_err());
    }

    #[test]
    fn from_weights_drops_zeros_and_normalizes() {
        let d = LabelDistribution::from_weights([(id(0), 3.0), (id(1), 0.0), (id(2), 1.0)])
            .unwrap();
        assert_eq!(d.support().collect::<Vec<_>>(), vec![id(0), id(2)]);
        assert!((d.get(id(0)) - 0.75).abs() < 1e-12);
        assert_eq!(d.get(id(1)), 0.0);
        assert!(LabelDistribution::from_weights([(id(0), 0.0)]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_by_lowest_id() {
        let d = LabelDistribution::new([(id(2), 0.4), (id(0), 0.3), (id(1), 0.3)]).unwrap();
        assert_eq!(d.argmax(), id(2));
        let tie = LabelDistribution::new([(id(3), 0.5), (id(1), 0.5)]).unwrap();
        assert_eq!(tie.argmax(), id(1));
    }

    #[test]
    fn restrict_renormalizes() {
        let d = LabelDistribution::new([(id(0), 0.5), (id(1), 0.3), (id(2), 0.2)]).unwrap();
        let cs = ConfusionSet::new([id(0), id(1)]).unwrap();
        let r = d.restrict(&cs).unwrap();
        assert!((r.get(id(0)) - 0.625).abs() < 1e-12);
        assert!((r.get(id(1)) - 0.375).abs() < 1e-12);
        assert_eq!(r.get(id(2)), 0.0);
        let outside = ConfusionSet::singleton(id(9));
        assert!(d.restrict(&outside).is_err());
    }
}
