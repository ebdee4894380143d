//! Multi-class classification by sequential filtering.
//!
//! Deciding among many classes is done here by an ordered pipeline of simple
//! probabilistic classifiers. Each stage emits a distribution over the labels
//! still in play, the distributions are combined multiplicatively and
//! thresholded, and the surviving candidate set shrinks stage by stage until
//! a final label is chosen. Early stages are cheap filters designed to almost
//! never drop the true label; the last stage does the fine-grained decision
//! among the few survivors.
//!
//! The crate ships:
//!
//! * the pipeline machinery itself ([`model`]),
//! * sparse Winnow-trained networks and count-based filter classifiers
//!   ([`learners`]),
//! * a part-of-speech tagging instantiation with contextual and lexical
//!   features ([`features`], [`tagger`], [`corpus`]),
//! * exhaustive desk-scale verification of the underlying mathematics
//!   ([`theory`]),
//! * an evaluation/benchmark harness and synthetic corpus generators
//!   ([`eval`], [`synth`]).

pub mod alphabet;
pub mod corpus;
pub mod distribution;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod model;
pub mod smv1;
pub mod synth;
pub mod tagger;
pub mod theory;

pub use alphabet::{FeatureId, LabelAlphabet, LabelId, SparseExample};
pub use distribution::{ConfusionSet, LabelDistribution};
pub use error::{Result, SmError};
pub use model::{
    combine_distributions, stage_filter, CombineMode, Diagnostic, PredictionTrace,
    SequentialModel, Stage, StageClassifier, ViewRegistry,
};
