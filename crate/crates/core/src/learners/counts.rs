use std::collections::BTreeMap;

use crate::alphabet::{FeatureId, LabelId, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution};
use crate::error::Result;
use crate::model::StageClassifier;

/// Count-based filter classifier: a table of feature -> per-label counts.
/// Prediction sums counts over the active features, drops labels below the
/// support floor, and normalizes over the confusion set. Unseen inputs fall
/// back to uniform so the filter never removes a label it knows nothing
/// about.
#[derive(Debug, Clone)]
pub struct CountClassifier {
    table: BTreeMap<FeatureId, BTreeMap<LabelId, u64>>,
    min_support: u64,
}

impl CountClassifier {
    pub fn new(min_support: u64) -> Self {
        CountClassifier { table: BTreeMap::new(), min_support: min_support.max(1) }
    }

    pub fn min_support(&self) -> u64 {
        self.min_support
    }

    /// Records one observation of `feature` with `gold`.
    pub fn train(&mut self, feature: FeatureId, gold: LabelId) {
        *self.table.entry(feature).or_default().entry(gold).or_insert(0) += 1;
    }

    pub fn add_count(&mut self, feature: FeatureId, gold: LabelId, count: u64) {
        if count > 0 {
            *self.table.entry(feature).or_default().entry(gold).or_insert(0) += count;
        }
    }

    /// Per-label count totals over the active features of `x`, restricted to
    /// the confusion set.
    pub fn support_totals(&self, x: &SparseExample, cs: &ConfusionSet) -> Vec<(LabelId, u64)> {
        let mut totals: Vec<(LabelId, u64)> = cs.iter().map(|l| (l, 0)).collect();
        for f in x.features() {
            if let Some(row) = self.table.get(f) {
                for (label, count) in row {
                    if let Ok(k) = totals.binary_search_by_key(label, |(l, _)| *l) {
                        totals[k].1 += count;
                    }
                }
            }
        }
        totals
    }

    /// Count-proportional distribution over the confusion set. Labels whose
    /// total support falls below `min_support` are zeroed; when nothing
    /// survives the result is uniform over the set.
    pub fn predict(&self, x: &SparseExample, cs: &ConfusionSet) -> LabelDistribution {
        let totals = self.support_totals(x, cs);
        let weights = totals
            .into_iter()
            .map(|(l, c)| (l, if c >= self.min_support { c as f64 } else { 0.0 }));
        LabelDistribution::from_weights(weights)
            .unwrap_or_else(|_| LabelDistribution::uniform(cs))
    }

    pub fn rows(&self) -> impl Iterator<Item = (FeatureId, &BTreeMap<LabelId, u64>)> {
        self.table.iter().map(|(f, row)| (*f, row))
    }

    pub fn row(&self, feature: FeatureId) -> Option<&BTreeMap<LabelId, u64>> {
        self.table.get(&feature)
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl StageClassifier for CountClassifier {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        Ok(self.predict(x, cs))
    }

    fn kind(&self) -> &'static str {
        "count"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u32) -> LabelId {
        LabelId(n)
    }

    fn fid(n: u32) -> FeatureId {
        FeatureId(n)
    }

    fn cs(ids: &[u32]) -> ConfusionSet {
        ConfusionSet::new(ids.iter().map(|&i| id(i))).unwrap()
    }

    #[test]
    fn count_normalization() {
        let mut cc = CountClassifier::new(1);
        for _ in 0..9 {
            cc.train(fid(0), id(0));
        }
        cc.train(fid(0), id(1));
        let d = cc.predict(&SparseExample::new([fid(0)]), &cs(&[0, 1, 2]));
        assert!((d.get(id(0)) - 0.9).abs() < 1e-12);
        assert!((d.get(id(1)) - 0.1).abs() < 1e-12);
        assert_eq!(d.get(id(2)), 0.0);
    }

    #[test]
    fn unseen_features_fall_back_to_uniform() {
        let cc = CountClassifier::new(1);
        let d = cc.predict(&SparseExample::new([fid(9)]), &cs(&[0, 1]));
        assert!((d.get(id(0)) - 0.5).abs() < 1e-12);
        assert!((d.get(id(1)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_support_row_is_certain() {
        let mut cc = CountClassifier::new(1);
        for _ in 0..5 {
            cc.train(fid(3), id(1));
        }
        let d = cc.predict(&SparseExample::new([fid(3)]), &cs(&[0, 1]));
        assert!((d.get(id(1)) - 1.0).abs() < 1e-12);
        assert_eq!(d.support_len(), 1);
    }

    #[test]
    fn min_support_zeroes_weak_labels() {
        let mut cc = CountClassifier::new(3);
        for _ in 0..5 {
            cc.train(fid(0), id(0));
        }
        cc.train(fid(0), id(1));
        let d = cc.predict(&SparseExample::new([fid(0)]), &cs(&[0, 1]));
        assert!((d.get(id(0)) - 1.0).abs() < 1e-12);
        assert_eq!(d.get(id(1)), 0.0);
    }

    #[test]
    fn counts_sum_across_active_features() {
        let mut cc = CountClassifier::new(1);
        cc.train(fid(0), id(0));
        cc.train(fid(1), id(0));
        cc.train(fid(1), id(1));
        let d = cc.predict(&SparseExample::new([fid(0), fid(1)]), &cs(&[0, 1]));
        assert!((d.get(id(0)) - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.get(id(1)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn restriction_has_zero_mass_outside_set() {
        let mut cc = CountClassifier::new(1);
        cc.train(fid(0), id(0));
        cc.train(fid(0), id(2));
        let d = cc.predict(&SparseExample::new([fid(0)]), &cs(&[0, 1]));
        assert!((d.get(id(0)) - 1.0).abs() < 1e-12);
        assert_eq!(d.get(id(2)), 0.0);
    }
}
