//! Stage classifiers: a sparse network of Winnow-trained target nodes for the
//! final decision, and count-based filter classifiers for cheap candidate
//! restriction.

mod counts;
mod intern;
mod winnow;

pub use counts::CountClassifier;
pub use intern::FeatureInterner;
pub use winnow::{
    train_epochs, EpochStats, SnowNetwork, TargetNode, TrainExample, TrainOutcome,
    TrainingReport, WinnowParams,
};
