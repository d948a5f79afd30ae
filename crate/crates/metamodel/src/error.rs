//! Crate-wide error type.

use crate::sets::ElementId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("datasets `{a}` and `{b}` belong to different universes")]
    UniverseMismatch { a: String, b: String },

    #[error("`{subset}` is not contained in `{superset}`; stray elements: {stray:?}")]
    NotSubset {
        subset: String,
        superset: String,
        stray: Vec<ElementId>,
    },

    /// A dataset/model pair whose extension differs from the dataset.
    /// `missing` satisfy the model but are absent from the dataset;
    /// `stray` sit in the dataset but fail the model.
    #[error("pairing `{id}` is not bijective; missing: {missing:?}, stray: {stray:?}")]
    NotBijective {
        id: String,
        missing: Vec<ElementId>,
        stray: Vec<ElementId>,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("unknown element `{0}`")]
    UnknownElement(String),

    #[error("element `{element}` is already observed in the environment")]
    AlreadyObserved { element: ElementId },

    #[error("feature `{feature}` could not be extracted for element `{element}`: {message}")]
    FeatureExtraction {
        feature: String,
        element: ElementId,
        message: String,
    },

    #[error("model `{model}` requires feature `{feature}` which is not registered")]
    MissingFeature { model: String, feature: String },

    #[error("cyclic model reference through pairing `{0}`")]
    CyclicModel(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("expression contains unbound unknown `?{0}`")]
    UnboundUnknown(String),

    #[error("equations with more than {max} unknowns are unsupported (found {found})")]
    TooManyUnknowns { max: usize, found: usize },

    #[error("calibration failed: no interpretation reproduces the target size for model `{model}` (expected {expected}, candidates gave {got:?})")]
    Calibration {
        model: String,
        expected: usize,
        got: Vec<usize>,
    },

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for free-form domain errors.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
