use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::alphabet::{FeatureId, LabelAlphabet, LabelId, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution};
use crate::error::{Result, SmError};
use crate::learners::FeatureInterner;
use crate::model::StageClassifier;

/// Hyperparameters of the multiplicative-update rule and of the sigmoid that
/// maps raw scores into `[0, 1]`.
#[derive(Debug, Clone)]
pub struct WinnowParams {
    /// Promotion factor applied to active-feature weights on a false
    /// negative. Must be > 1.
    pub promotion: f64,
    /// Demotion factor applied on a false positive. Must be in (0, 1).
    pub demotion: f64,
    /// Decision threshold on the raw score. Must be > 0.
    pub threshold: f64,
    /// Weight given to a feature when it first links to a node.
    pub initial_weight: f64,
    /// Temperature of the sigmoid activation around the threshold.
    pub temperature: f64,
    /// Upper bound on training epochs; training also stops at the first
    /// epoch that makes no updates.
    pub max_epochs: usize,
    /// When true, every wrong in-set label scoring above threshold is
    /// demoted; when false, only the highest-scoring wrong label is.
    pub demote_all: bool,
}

impl Default for WinnowParams {
    fn default() -> Self {
        WinnowParams {
            promotion: 1.5,
            demotion: 0.8,
            threshold: 1.0,
            initial_weight: 0.1,
            temperature: 1.0,
            max_epochs: 5,
            demote_all: true,
        }
    }
}

impl WinnowParams {
    /// Scales the initial weight so that a fresh node's raw score sits well
    /// below threshold: `w0 = 0.1 * theta / mean_active_features`.
    pub fn with_estimated_initial_weight(mut self, mean_active_features: f64) -> Self {
        if mean_active_features > 0.0 {
            self.initial_weight = 0.1 * self.threshold / mean_active_features;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.promotion > 1.0) {
            return Err(SmError::InvalidInput(format!("promotion {} must be > 1", self.promotion)));
        }
        if !(self.demotion > 0.0 && self.demotion < 1.0) {
            return Err(SmError::InvalidInput(format!("demotion {} must be in (0,1)", self.demotion)));
        }
        if !(self.threshold > 0.0) {
            return Err(SmError::InvalidInput(format!("threshold {} must be > 0", self.threshold)));
        }
        if !(self.initial_weight > 0.0) {
            return Err(SmError::InvalidInput(format!(
                "initial weight {} must be > 0",
                self.initial_weight
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(SmError::InvalidInput(format!(
                "temperature {} must be > 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// The per-label linear function: a sparse map from feature id to a strictly
/// positive weight. A feature is linked only once it has been active in an
/// example presented to this node.
#[derive(Debug, Clone)]
pub struct TargetNode {
    pub label: LabelId,
    weights: HashMap<FeatureId, f64>,
}

impl TargetNode {
    pub fn new(label: LabelId) -> Self {
        TargetNode { label, weights: HashMap::new() }
    }

    /// Raw score at prediction time: unlinked features contribute 0.
    pub fn raw(&self, x: &SparseExample) -> f64 {
        x.features().iter().map(|f| self.weights.get(f).copied().unwrap_or(0.0)).sum()
    }

    /// Sigmoid mapping of the raw score into `[0, 1]`, centered on the
    /// threshold: `1 / (1 + exp(-(raw - theta) / T))`.
    pub fn activation(&self, x: &SparseExample, params: &WinnowParams) -> f64 {
        let raw = self.raw(x);
        1.0 / (1.0 + (-(raw - params.threshold) / params.temperature).exp())
    }

    pub fn weight(&self, f: FeatureId) -> Option<f64> {
        self.weights.get(&f).copied()
    }

    pub fn linked(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.weights.iter().map(|(f, w)| (*f, *w))
    }

    pub(crate) fn set_weight(&mut self, f: FeatureId, w: f64) {
        self.weights.insert(f, w);
    }

    /// Raw score during a training exposure: active unlinked features are
    /// linked at the initial weight first.
    fn raw_linking(&mut self, x: &SparseExample, w0: f64) -> f64 {
        let mut raw = 0.0;
        for &f in x.features() {
            raw += *self.weights.entry(f).or_insert(w0);
        }
        raw
    }

    fn scale_active(&mut self, x: &SparseExample, factor: f64) {
        for f in x.features() {
            if let Some(w) = self.weights.get_mut(f) {
                *w *= factor;
            }
        }
    }
}

/// Result of presenting one training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainOutcome {
    /// Number of node promotions/demotions performed; 0 means no mistake.
    Updated(u32),
    /// The gold label was outside the confusion set; the example was skipped
    /// and the caller should count it.
    Filtered,
}

/// A pre-extracted training example: active features, gold label, and the
/// confusion set the example is trained against.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub x: SparseExample,
    pub gold: LabelId,
    pub cs: ConfusionSet,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpochStats {
    /// Examples that triggered at least one node update.
    pub mistaken_examples: u64,
    /// Total promotions + demotions in the epoch.
    pub node_updates: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    pub total_node_updates: u64,
    /// Presentations skipped because the gold label was filtered out of the
    /// confusion set.
    pub filtered_examples: u64,
    pub wall: Duration,
}

impl TrainingReport {
    /// True when training ended because a full epoch made no updates.
    pub fn converged(&self) -> bool {
        self.epochs.last().is_some_and(|e| e.node_updates == 0)
    }
}

/// A sparse network of Winnow-trained target nodes, one per label, over a
/// shared interned feature space.
#[derive(Debug, Clone)]
pub struct SnowNetwork {
    alphabet: Arc<LabelAlphabet>,
    params: WinnowParams,
    nodes: Vec<TargetNode>,
    interner: Arc<FeatureInterner>,
}

impl SnowNetwork {
    pub fn new(
        alphabet: Arc<LabelAlphabet>,
        params: WinnowParams,
        interner: Arc<FeatureInterner>,
    ) -> Self {
        let nodes = alphabet.ids().map(TargetNode::new).collect();
        SnowNetwork { alphabet, params, nodes, interner }
    }

    pub fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    pub fn params(&self) -> &WinnowParams {
        &self.params
    }

    pub fn interner(&self) -> &Arc<FeatureInterner> {
        &self.interner
    }

    pub fn node(&self, label: LabelId) -> &TargetNode {
        &self.nodes[label.idx()]
    }

    pub fn nodes(&self) -> &[TargetNode] {
        &self.nodes
    }

    pub(crate) fn node_mut(&mut self, label: LabelId) -> &mut TargetNode {
        &mut self.nodes[label.idx()]
    }

    /// Activations over the confusion set, normalized to sum 1. The argmax of
    /// the result equals the argmax of the raw activations because the
    /// sigmoid is monotone and normalization preserves order. If every
    /// activation underflows to zero the distribution falls back to uniform.
    pub fn predict(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        let mut weights = Vec::with_capacity(cs.len());
        for label in cs.iter() {
            if label.idx() >= self.nodes.len() {
                return Err(SmError::InvalidInput(format!(
                    "label {label} outside network alphabet of size {}",
                    self.nodes.len()
                )));
            }
            weights.push((label, self.nodes[label.idx()].activation(x, &self.params)));
        }
        LabelDistribution::from_weights(weights)
            .or_else(|_| Ok(LabelDistribution::uniform(cs)))
    }

    /// Mistake-driven update on one example. Every node in the confusion set
    /// sees the example (active unlinked features link at the initial
    /// weight); the gold node is promoted when its raw score is at or below
    /// threshold, and wrong in-set nodes scoring above threshold are demoted.
    /// Nodes outside the confusion set are untouched.
    pub fn train_example(
        &mut self,
        x: &SparseExample,
        gold: LabelId,
        cs: &ConfusionSet,
    ) -> TrainOutcome {
        if !cs.contains(gold) {
            return TrainOutcome::Filtered;
        }
        if x.is_empty() {
            return TrainOutcome::Updated(0);
        }
        let w0 = self.params.initial_weight;
        let theta = self.params.threshold;

        let raws: Vec<(LabelId, f64)> = cs
            .iter()
            .map(|label| (label, self.nodes[label.idx()].raw_linking(x, w0)))
            .collect();

        let mut updates = 0u32;
        let mut top_wrong: Option<(LabelId, f64)> = None;
        for &(label, raw) in &raws {
            if label == gold {
                if raw <= theta {
                    self.nodes[label.idx()].scale_active(x, self.params.promotion);
                    updates += 1;
                }
            } else if raw > theta {
                if self.params.demote_all {
                    self.nodes[label.idx()].scale_active(x, self.params.demotion);
                    updates += 1;
                } else if top_wrong.map_or(true, |(_, best)| raw > best) {
                    top_wrong = Some((label, raw));
                }
            }
        }
        if let Some((label, _)) = top_wrong {
            self.nodes[label.idx()].scale_active(x, self.params.demotion);
            updates += 1;
        }
        TrainOutcome::Updated(updates)
    }
}

impl StageClassifier for SnowNetwork {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        self.predict(x, cs)
    }

    fn kind(&self) -> &'static str {
        "snow"
    }

    fn alphabet_len(&self) -> Option<usize> {
        Some(self.alphabet.len())
    }
}

/// Sweeps the example stream for up to `max_epochs` epochs, stopping early
/// after an epoch that makes no updates.
pub fn train_epochs(net: &mut SnowNetwork, examples: &[TrainExample]) -> TrainingReport {
    let start = Instant::now();
    let mut report = TrainingReport::default();
    if examples.is_empty() {
        report.wall = start.elapsed();
        return report;
    }
    for _ in 0..net.params.max_epochs.max(1) {
        let mut stats = EpochStats::default();
        for ex in examples {
            match net.train_example(&ex.x, ex.gold, &ex.cs) {
                TrainOutcome::Updated(n) => {
                    if n > 0 {
                        stats.mistaken_examples += 1;
                        stats.node_updates += n as u64;
                    }
                }
                TrainOutcome::Filtered => report.filtered_examples += 1,
            }
        }
        let converged = stats.node_updates == 0;
        report.total_node_updates += stats.node_updates;
        report.epochs.push(stats);
        if converged {
            break;
        }
    }
    report.wall = start.elapsed();
    report
}
