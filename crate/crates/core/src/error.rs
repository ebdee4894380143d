use thiserror::Error;

/// Errors produced by model construction, training, prediction and I/O.
#[derive(Debug, Error)]
pub enum SmError {
    /// A caller violated an operation precondition (empty support, bad index, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every pointwise product over the surviving labels was zero. This means
    /// two stages assigned disjoint supports, i.e. the classifiers contradict
    /// each other.
    #[error("degenerate product over surviving labels{}", match .stage { Some(s) => format!(" at stage {s}"), None => String::new() })]
    DegenerateProduct { stage: Option<usize> },

    /// A stage classifier failed; carries the stage index.
    #[error("classifier failure at stage {stage}: {source}")]
    ClassifierFailure {
        stage: usize,
        #[source]
        source: Box<SmError>,
    },

    /// Text-format parse problem with the offending line number (1-based).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Model file does not start with the expected format header.
    #[error("unsupported model version: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error("empty corpus")]
    EmptyCorpus,

    /// A corpus tag is not part of the configured label alphabet.
    #[error("tag {tag:?} is outside the configured alphabet")]
    AlphabetOverflow { tag: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SmError>;
