use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("switch index {index} outside output of length {len}")]
    SwitchOutOfRange { index: usize, len: usize },
    #[error("gradient graph references node {input} from node {node}")]
    GraphCycle { node: usize, input: usize },
    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("split leaves class {class} without training rows")]
    DegenerateSplit { class: usize },
    #[error("k = {k} exceeds the {available} available features")]
    KTooLarge { k: usize, available: usize },
    #[error("feature {feature} out of range for {n_features} features")]
    InvalidFeature { feature: usize, n_features: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("impurity of an empty node")]
    EmptyNode,
    #[error("black-box predictions have zero variance")]
    ZeroVariance,
    #[error("exact Shapley enumeration supports at most 12 features, got {0}")]
    TooManyFeatures(usize),
    #[error("stacked models disagree on feature count: {0:?}")]
    MismatchedFeatureSpaces(Vec<usize>),
    #[error("no rule survives the filter thresholds")]
    NoRulesSurviveFilter,
    #[error("no counterfactual found within {0} evaluations")]
    NoCounterfactualFound(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
