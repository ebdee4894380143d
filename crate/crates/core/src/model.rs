//! The sequential pipeline: stages emit label distributions over the
//! surviving candidates, the running distribution is combined and thresholded,
//! and the candidate set shrinks monotonically until a final label is chosen.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::alphabet::{LabelAlphabet, LabelId, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution, NORMALIZATION_TOLERANCE};
use crate::error::{Result, SmError};

/// Contract for a stage classifier: given an example (already projected onto
/// the stage's feature subspace) and the surviving candidate set, emit a
/// probability distribution whose support lies inside that set.
pub trait StageClassifier: Send + Sync {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution>;

    /// Short identifier used in diagnostics and serialization.
    fn kind(&self) -> &'static str;

    /// Number of labels the classifier was built for, when it has a fixed
    /// alphabet. `None` means alphabet-agnostic.
    fn alphabet_len(&self) -> Option<usize> {
        None
    }
}

/// Projects an example onto a stage's feature subspace.
pub trait FeatureView: Send + Sync {
    fn project(&self, x: &SparseExample) -> SparseExample;
}

impl<F> FeatureView for F
where
    F: Fn(&SparseExample) -> SparseExample + Send + Sync,
{
    fn project(&self, x: &SparseExample) -> SparseExample {
        self(x)
    }
}

/// Identity projection: the stage reads the whole feature space.
pub struct IdentityView;

impl FeatureView for IdentityView {
    fn project(&self, x: &SparseExample) -> SparseExample {
        x.clone()
    }
}

/// Name of the identity view every registry starts with.
pub const FULL_VIEW: &str = "full";

/// Named feature-subspace extractors a model's stages can refer to.
#[derive(Clone)]
pub struct ViewRegistry {
    views: BTreeMap<String, Arc<dyn FeatureView>>,
}

impl Default for ViewRegistry {
    fn default() -> Self {
        let mut views: BTreeMap<String, Arc<dyn FeatureView>> = BTreeMap::new();
        views.insert(FULL_VIEW.to_string(), Arc::new(IdentityView));
        ViewRegistry { views }
    }
}

impl ViewRegistry {
    pub fn register(&mut self, name: impl Into<String>, view: Arc<dyn FeatureView>) {
        self.views.insert(name.into(), view);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn FeatureView>> {
        self.views.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.views.contains_key(name)
    }
}

impl fmt::Debug for ViewRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.views.keys()).finish()
    }
}

/// How a stage's distribution is merged with the running one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Selective product of experts: pointwise product, renormalized.
    Product,
    /// Each stage's distribution supersedes the running one, restricted to
    /// the surviving labels.
    Replace,
}

impl CombineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CombineMode::Product => "product",
            CombineMode::Replace => "replace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(CombineMode::Product),
            "replace" => Ok(CombineMode::Replace),
            other => Err(SmError::InvalidInput(format!("unknown combine mode {other:?}"))),
        }
    }
}

/// One pipeline stage: a classifier, its filter threshold, and the name of
/// the feature subspace it reads.
#[derive(Clone)]
pub struct Stage {
    pub classifier: Arc<dyn StageClassifier>,
    pub epsilon: f64,
    pub view: String,
}

impl Stage {
    pub fn new(classifier: Arc<dyn StageClassifier>, epsilon: f64, view: impl Into<String>) -> Self {
        Stage { classifier, epsilon, view: view.into() }
    }
}

impl fmt::Debug for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stage")
            .field("kind", &self.classifier.kind())
            .field("epsilon", &self.epsilon)
            .field("view", &self.view)
            .finish()
    }
}

/// Structural problem found by [`SequentialModel::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Offending stage, when the problem is stage-local.
    pub stage: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(i) => write!(f, "stage {i}: {}", self.message),
            None => write!(f, "model: {}", self.message),
        }
    }
}

/// Record of a single stage evaluation inside a prediction.
#[derive(Debug, Clone)]
pub struct StageRecord {
    /// Candidate set the stage received.
    pub input: ConfusionSet,
    /// Distribution the stage emitted (before combining).
    pub emitted: LabelDistribution,
    /// Candidate set after combining and thresholding.
    pub survivors: ConfusionSet,
}

/// Full account of one prediction: the per-stage shrinking candidate sets and
/// the final decision.
#[derive(Debug, Clone)]
pub struct PredictionTrace {
    pub stages: Vec<StageRecord>,
    pub final_distribution: LabelDistribution,
    pub final_label: LabelId,
}

impl PredictionTrace {
    /// Candidate-set sizes after each stage, handy for reports.
    pub fn survivor_sizes(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.survivors.len()).collect()
    }
}

/// Thresholds a distribution against the previous candidate set:
/// keeps `{c in prev | dist(c) > epsilon}`. When the threshold empties the
/// set, falls back to the singleton argmax so the pipeline always has a
/// candidate left.
pub fn stage_filter(
    dist: &LabelDistribution,
    epsilon: f64,
    prev: &ConfusionSet,
) -> Result<ConfusionSet> {
    if dist.support_len() == 0 {
        return Err(SmError::InvalidInput("distribution has empty support".into()));
    }
    if !dist.support_subset_of(prev) {
        return Err(SmError::InvalidInput(
            "distribution support extends outside the previous confusion set".into(),
        ));
    }
    let survivors: Vec<LabelId> =
        dist.iter().filter(|&(_, p)| p > epsilon).map(|(id, _)| id).collect();
    if survivors.is_empty() {
        Ok(ConfusionSet::singleton(dist.argmax()))
    } else {
        ConfusionSet::new(survivors)
    }
}

/// Pointwise product of two distributions restricted to `survivors`,
/// renormalized to sum 1. Accumulates in the log domain so long pipelines do
/// not underflow. Labels where either factor is zero drop out; if every
/// product is zero the classifiers contradict each other and a
/// degenerate-product error is returned.
pub fn combine_distributions(
    running: &LabelDistribution,
    new: &LabelDistribution,
    survivors: &ConfusionSet,
) -> Result<LabelDistribution> {
    let mut logs: Vec<(LabelId, f64)> = Vec::with_capacity(survivors.len());
    let mut max_log = f64::NEG_INFINITY;
    for id in survivors.iter() {
        let a = running.get(id);
        let b = new.get(id);
        if a > 0.0 && b > 0.0 {
            let l = a.ln() + b.ln();
            if l > max_log {
                max_log = l;
            }
            logs.push((id, l));
        }
    }
    if logs.is_empty() {
        return Err(SmError::DegenerateProduct { stage: None });
    }
    LabelDistribution::from_weights(logs.into_iter().map(|(id, l)| (id, (l - max_log).exp())))
}

/// The sequential model: an alphabet, an ordered list of stages, their
/// combine mode, and the registry resolving each stage's feature view.
pub struct SequentialModel {
    pub alphabet: Arc<LabelAlphabet>,
    pub stages: Vec<Stage>,
    pub combine: CombineMode,
    pub views: ViewRegistry,
}

impl SequentialModel {
    pub fn new(alphabet: Arc<LabelAlphabet>, stages: Vec<Stage>, combine: CombineMode) -> Self {
        SequentialModel { alphabet, stages, combine, views: ViewRegistry::default() }
    }

    pub fn with_views(mut self, views: ViewRegistry) -> Self {
        self.views = views;
        self
    }

    /// Structural checks. Returns an empty list iff the model is well-formed;
    /// never panics or errors on a malformed model.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.stages.is_empty() {
            out.push(Diagnostic { stage: None, message: "model has no stages".into() });
        }
        if self.alphabet.len() < 2 {
            out.push(Diagnostic {
                stage: None,
                message: format!("alphabet has {} labels, need at least 2", self.alphabet.len()),
            });
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if !(stage.epsilon >= 0.0 && stage.epsilon < 1.0) {
                out.push(Diagnostic {
                    stage: Some(i),
                    message: format!("threshold {} outside [0, 1)", stage.epsilon),
                });
            }
            if !self.views.contains(&stage.view) {
                out.push(Diagnostic {
                    stage: Some(i),
                    message: format!("unresolvable domain view {:?}", stage.view),
                });
            }
            if let Some(n) = stage.classifier.alphabet_len() {
                if n != self.alphabet.len() {
                    out.push(Diagnostic {
                        stage: Some(i),
                        message: format!(
                            "classifier built for {n} labels, model alphabet has {}",
                            self.alphabet.len()
                        ),
                    });
                }
            }
        }
        out
    }

    /// Runs the pipeline on one example. Stage 0 receives the full alphabet;
    /// every later stage receives the survivors of the previous one. The
    /// final label is the argmax of the final distribution over the final
    /// set, ties broken by lowest label id.
    pub fn predict(&self, x: &SparseExample) -> Result<PredictionTrace> {
        if self.stages.is_empty() {
            return Err(SmError::InvalidInput("model has no stages".into()));
        }
        let mut prev = ConfusionSet::full(&self.alphabet);
        let mut running: Option<LabelDistribution> = None;
        let mut records = Vec::with_capacity(self.stages.len());

        for (i, stage) in self.stages.iter().enumerate() {
            let fail = |source: SmError| SmError::ClassifierFailure {
                stage: i,
                source: Box::new(source),
            };
            let view = self
                .views
                .get(&stage.view)
                .ok_or_else(|| fail(SmError::InvalidInput(format!(
                    "unresolvable domain view {:?}",
                    stage.view
                ))))?;
            let projected = view.project(x);
            let emitted = stage.classifier.emit(&projected, &prev).map_err(fail)?;
            if !emitted.support_subset_of(&prev) {
                return Err(fail(SmError::InvalidInput(
                    "stage emitted mass outside its input confusion set".into(),
                )));
            }
            if (emitted.sum() - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(fail(SmError::InvalidInput(format!(
                    "stage distribution sums to {}",
                    emitted.sum()
                ))));
            }

            let combined = match (self.combine, &running) {
                (CombineMode::Product, Some(run)) => combine_distributions(run, &emitted, &prev)
                    .map_err(|e| match e {
                        SmError::DegenerateProduct { .. } => {
                            SmError::DegenerateProduct { stage: Some(i) }
                        }
                        other => other,
                    })?,
                _ => emitted.clone(),
            };

            let survivors = stage_filter(&combined, stage.epsilon, &prev).map_err(fail)?;
            running = Some(combined.restrict(&survivors).map_err(fail)?);
            records.push(StageRecord { input: prev, emitted, survivors: survivors.clone() });
            prev = survivors;
        }

        let final_distribution = running.expect("at least one stage ran");
        let final_label = final_distribution.argmax();
        Ok(PredictionTrace { stages: records, final_distribution, final_label })
    }
}

impl fmt::Debug for SequentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequentialModel")
            .field("labels", &self.alphabet.len())
            .field("stages", &self.stages)
            .field("combine", &self.combine)
            .finish()
    }
}

/// Fixed-distribution classifier, mostly useful in tests and in pipelines
/// whose stages are known tables.
pub struct FnClassifier<F> {
    f: F,
    kind: &'static str,
}

impl<F> FnClassifier<F>
where
    F: Fn(&SparseExample, &ConfusionSet) -> Result<LabelDistribution> + Send + Sync,
{
    pub fn new(kind: &'static str, f: F) -> Self {
        FnClassifier { f, kind }
    }
}

impl<F> StageClassifier for FnClassifier<F>
where
    F: Fn(&SparseExample, &ConfusionSet) -> Result<LabelDistribution> + Send + Sync,
{
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        (self.f)(x, cs)
    }

    fn kind(&self) -> &'static str {
        self.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u32) -> LabelId {
        LabelId(n)
    }

    fn abc() -> Arc<LabelAlphabet> {
        Arc::new(LabelAlphabet::new(["A", "B", "C"]).unwrap())
    }

    fn dist(pairs: &[(u32, f64)]) -> LabelDistribution {
        LabelDistribution::new(pairs.iter().map(|&(i, p)| (id(i), p))).unwrap()
    }

    fn cs(ids: &[u32]) -> ConfusionSet {
        ConfusionSet::new(ids.iter().map(|&i| id(i))).unwrap()
    }

    /// Stage that emits a fixed table restricted to the incoming set.
    fn table_stage(pairs: &'static [(u32, f64)], epsilon: f64) -> Stage {
        Stage::new(
            Arc::new(FnClassifier::new("table", move |_x, cs| {
                LabelDistribution::from_weights(
                    pairs.iter().map(|&(i, p)| (id(i), p)).filter(|(l, _)| cs.contains(*l)),
                )
            })),
            epsilon,
            FULL_VIEW,
        )
    }

    #[test]
    fn stage_filter_thresholds() {
        let d = dist(&[(0, 0.5), (1, 0.3), (2, 0.2)]);
        let out = stage_filter(&d, 0.25, &cs(&[0, 1, 2])).unwrap();
        assert_eq!(out, cs(&[0, 1]));
    }

    #[test]
    fn stage_filter_falls_back_to_argmax_singleton() {
        let d = dist(&[(0, 0.5), (1, 0.3), (2, 0.2)]);
        let out = stage_filter(&d, 0.6, &cs(&[0, 1, 2])).unwrap();
        assert_eq!(out, cs(&[0]));
    }

    #[test]
    fn stage_filter_identity_case() {
        let d = dist(&[(0, 1.0)]);
        let out = stage_filter(&d, 0.0, &cs(&[0])).unwrap();
        assert_eq!(out, cs(&[0]));
    }

    #[test]
    fn stage_filter_rejects_support_outside_prev() {
        let d = dist(&[(0, 0.5), (2, 0.5)]);
        assert!(stage_filter(&d, 0.1, &cs(&[0, 1])).is_err());
    }

    #[test]
    fn combine_uniform_is_identity() {
        let running = dist(&[(0, 0.5), (1, 0.5)]);
        let new = dist(&[(0, 0.8), (1, 0.2)]);
        let out = combine_distributions(&running, &new, &cs(&[0, 1])).unwrap();
        assert!((out.get(id(0)) - 0.8).abs() < 1e-12);
        assert!((out.get(id(1)) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn combine_restricts_and_renormalizes() {
        let running = dist(&[(0, 0.5), (1, 0.5)]);
        let new = dist(&[(0, 0.5), (1, 0.5)]);
        let out = combine_distributions(&running, &new, &cs(&[0])).unwrap();
        assert!((out.get(id(0)) - 1.0).abs() < 1e-12);
        assert_eq!(out.support_len(), 1);
    }

    // Hand multiply-and-renormalize: 0.6*0.5/0.5 = 0.6, 0.4*0.5/0.5 = 0.4.
    #[test]
    fn combine_hand_product() {
        let running = dist(&[(0, 0.6), (1, 0.4)]);
        let new = dist(&[(0, 0.5), (1, 0.5)]);
        let out = combine_distributions(&running, &new, &cs(&[0, 1])).unwrap();
        assert!((out.get(id(0)) - 0.6).abs() < 1e-12);
        assert!((out.get(id(1)) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn combine_degenerate_product_errors() {
        let running = dist(&[(0, 1.0)]);
        let new = dist(&[(1, 1.0)]);
        let err = combine_distributions(&running, &new, &cs(&[0, 1])).unwrap_err();
        assert!(matches!(err, SmError::DegenerateProduct { .. }));
    }

    #[test]
    fn single_stage_prediction() {
        let model = SequentialModel::new(
            abc(),
            vec![table_stage(&[(0, 0.9), (1, 0.1)], 0.5)],
            CombineMode::Product,
        );
        let trace = model.predict(&SparseExample::default()).unwrap();
        assert_eq!(trace.final_label, id(0));
        assert_eq!(trace.stages[0].input, cs(&[0, 1, 2]));
        assert_eq!(trace.stages[0].survivors, cs(&[0]));
    }

    #[test]
    fn two_stage_composition() {
        for mode in [CombineMode::Product, CombineMode::Replace] {
            let model = SequentialModel::new(
                abc(),
                vec![
                    table_stage(&[(0, 0.45), (1, 0.45), (2, 0.10)], 0.2),
                    table_stage(&[(0, 0.3), (1, 0.7)], 0.0),
                ],
                mode,
            );
            let trace = model.predict(&SparseExample::default()).unwrap();
            assert_eq!(trace.stages[0].survivors, cs(&[0, 1]));
            assert_eq!(trace.final_label, id(1), "mode {mode:?}");
        }
    }

    #[test]
    fn trace_is_monotone_and_final_label_in_last_set() {
        let model = SequentialModel::new(
            abc(),
            vec![
                table_stage(&[(0, 0.4), (1, 0.35), (2, 0.25)], 0.3),
                table_stage(&[(0, 0.5), (1, 0.5)], 0.45),
            ],
            CombineMode::Product,
        );
        let trace = model.predict(&SparseExample::default()).unwrap();
        for (i, rec) in trace.stages.iter().enumerate() {
            assert!(rec.survivors.is_subset_of(&rec.input));
            assert!(!rec.survivors.is_empty());
            if i > 0 {
                assert_eq!(rec.input, trace.stages[i - 1].survivors);
            }
        }
        let last = &trace.stages.last().unwrap().survivors;
        assert!(last.contains(trace.final_label));
    }

    #[test]
    fn validate_flags_bad_threshold_and_view() {
        let mut model = SequentialModel::new(
            abc(),
            vec![
                table_stage(&[(0, 1.0)], 0.0),
                Stage::new(
                    Arc::new(FnClassifier::new("t", |_x, cs| {
                        Ok(LabelDistribution::uniform(cs))
                    })),
                    1.0,
                    "missing-view",
                ),
            ],
            CombineMode::Product,
        );
        let diags = model.validate();
        assert_eq!(diags.len(), 2);
        assert!(diags.iter().all(|d| d.stage == Some(1)));
        assert!(diags.iter().any(|d| d.message.contains("threshold")));
        assert!(diags.iter().any(|d| d.message.contains("missing-view")));

        model.stages.pop();
        assert!(model.validate().is_empty());
    }

    #[test]
    fn validate_ok_on_well_formed_model() {
        let model = SequentialModel::new(
            abc(),
            vec![
                table_stage(&[(0, 0.5), (1, 0.5)], 0.0),
                table_stage(&[(0, 0.5), (1, 0.25), (2, 0.25)], 0.1),
                table_stage(&[(1, 1.0)], 0.0),
            ],
            CombineMode::Product,
        );
        assert!(model.validate().is_empty());
    }

    #[test]
    fn zero_mass_contract_enforced() {
        // Stage ignores the confusion set and emits everything.
        let bad = Stage::new(
            Arc::new(FnClassifier::new("bad", |_x, _cs| {
                Ok(dist(&[(0, 0.5), (1, 0.3), (2, 0.2)]))
            })),
            0.0,
            FULL_VIEW,
        );
        let model = SequentialModel::new(
            abc(),
            vec![table_stage(&[(0, 0.6), (1, 0.4)], 0.0), bad],
            CombineMode::Product,
        );
        let err = model.predict(&SparseExample::default()).unwrap_err();
        match err {
            SmError::ClassifierFailure { stage, .. } => assert_eq!(stage, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
