use std::path::PathBuf;

/// Errors surfaced by the file formats, configuration and pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum XaiError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric cell at row {0}, column `{1}`")]
    NonNumericCell(usize, String),
    #[error("file has no header or no data rows")]
    EmptyFile,
    #[error("duplicate header `{0}`")]
    DuplicateHeader(String),
    #[error("row {row} has {got} cells, header has {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("missing artifact {0}; run the earlier stage first")]
    MissingArtifact(PathBuf),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] xai_core::Error),
}

pub type Result<T, E = XaiError> = std::result::Result<T, E>;

impl XaiError {
    /// Process exit status: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use xai_core::Error as E;
        match self {
            XaiError::Usage(_) | XaiError::UnknownKey(_) | XaiError::BadValue { .. } => 1,
            XaiError::Core(e) => match e {
                E::InvalidConfig(_) | E::KTooLarge { .. } | E::InvalidFeature { .. } | E::TooManyFeatures(_) => 1,
                E::NonFiniteLoss(_)
                | E::ZeroVariance
                | E::GraphCycle { .. }
                | E::ShapeMismatch { .. }
                | E::SwitchOutOfRange { .. } => 3,
                _ => 2,
            },
            _ => 2,
        }
    }

    /// Stable machine-readable tag printed on standard error.
    pub fn code(&self) -> &'static str {
        use xai_core::Error as E;
        match self {
            XaiError::Usage(_) => "usage",
            XaiError::UnknownKey(_) => "unknown-key",
            XaiError::BadValue { .. } => "bad-value",
            XaiError::MissingColumn(_) => "missing-column",
            XaiError::NonNumericCell(..) => "non-numeric-cell",
            XaiError::EmptyFile => "empty-file",
            XaiError::DuplicateHeader(_) => "duplicate-header",
            XaiError::RaggedRow { .. } => "ragged-row",
            XaiError::MissingArtifact(_) => "missing-artifact",
            XaiError::SchemaVersion(_) => "schema-version",
            XaiError::Io { .. } => "io",
            XaiError::Json { .. } => "json",
            XaiError::Csv(_) => "csv",
            XaiError::Core(e) => match e {
                E::ShapeMismatch { .. } => "shape-mismatch",
                E::SwitchOutOfRange { .. } => "switch-out-of-range",
                E::GraphCycle { .. } => "graph-cycle",
                E::NonFiniteLoss(_) => "non-finite-loss",
                E::InvalidConfig(_) => "invalid-config",
                E::InvalidData(_) => "invalid-data",
                E::DegenerateSplit { .. } => "degenerate-split",
                E::KTooLarge { .. } => "k-too-large",
                E::InvalidFeature { .. } => "invalid-feature",
                E::EmptySample => "empty-sample",
                E::EmptyNode => "empty-node",
                E::ZeroVariance => "zero-variance",
                E::TooManyFeatures(_) => "too-many-features",
                E::MismatchedFeatureSpaces(_) => "mismatched-feature-spaces",
                E::NoRulesSurviveFilter => "no-rules",
                E::NoCounterfactualFound(_) => "no-counterfactual",
            },
        }
    }
}
