//! Crate-wide error type.
//!
//! Every failure carries a short machine-parseable category (see
//! [`Error::category`]) which the CLI prints as `error[<category>]: ...`.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // ── dataset ──
    #[error("malformed manifest: {0}")]
    ManifestParse(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("ground-truth index out of range: query {query} points at reference {gt} of {n_refs}")]
    GroundTruthOutOfRange {
        query: usize,
        gt: usize,
        n_refs: usize,
    },
    #[error("undecodable image {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },
    #[error("invalid image dimensions: {0}")]
    ImageDimensions(String),
    #[error("pixel value out of range: {0}")]
    PixelOutOfRange(f64),
    #[error("split needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("train_fraction must lie in (0,1), got {0}")]
    InvalidTrainFraction(f64),
    #[error("degenerate synthetic parameters: {0}")]
    SyntheticParams(String),

    // ── matchers ──
    #[error("empty reference list")]
    EmptyReferenceList,
    #[error("image {width}x{height} too small for {variant} (minimum side {min_side})")]
    ImageTooSmall {
        variant: &'static str,
        width: usize,
        height: usize,
        min_side: usize,
    },
    #[error("invalid matcher parameters: {0}")]
    MatcherParams(String),

    // ── stats ──
    #[error("matching score outside [0,1]: {0}")]
    ScoreOutOfRange(f64),
    #[error("cannot train a profile from an empty results list")]
    EmptyResults,
    #[error("malformed profile: {0}")]
    ProfileParse(String),
    #[error("probability out of range: {field} = {value}")]
    ProbabilityOutOfRange { field: &'static str, value: f64 },
    #[error("bin likelihoods do not sum to 1 in bin {bin}: {sum}")]
    BinLikelihoodSum { bin: usize, sum: f64 },
    #[error("prior probabilities do not sum to 1: {0}")]
    PriorSum(f64),
    #[error("inconsistent profile counts: {0}")]
    ProfileCounts(String),

    // ── switch ──
    #[error("invalid switch configuration: {0}")]
    SwitchConfig(String),
    #[error("no profile for technique \"{0}\"")]
    MissingProfile(String),
    #[error("no matcher index for technique \"{0}\"")]
    MissingIndex(String),

    // ── eval ──
    #[error("empty result list")]
    EmptyEvalInput,
    #[error("precision-recall curve needs at least 2 distinct points, got {0}")]
    CurveTooShort(usize),
    #[error("inconsistent lengths: {0}")]
    InconsistentLengths(String),
    #[error("malformed trace CSV: {0}")]
    TraceParse(String),
    #[error("trace/query count mismatch: {traces} traces for {queries} queries")]
    TraceQueryMismatch { traces: usize, queries: usize },
    #[error("trace inconsistent with dataset: {0}")]
    TraceMismatch(String),

    // ── cli ──
    #[error("malformed config: {0}")]
    ConfigParse(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
}

impl Error {
    /// Stable one-word category used as the CLI error prefix.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            Io { .. } => "io",
            ManifestParse(_) | EmptyDataset(_) | GroundTruthOutOfRange { .. } => "manifest",
            ImageDecode { .. } | ImageDimensions(_) | PixelOutOfRange(_) => "image",
            TooFewQueries(_) | InvalidTrainFraction(_) | SyntheticParams(_) => "dataset",
            EmptyReferenceList | ImageTooSmall { .. } | MatcherParams(_) => "matcher",
            ScoreOutOfRange(_)
            | EmptyResults
            | ProfileParse(_)
            | ProbabilityOutOfRange { .. }
            | BinLikelihoodSum { .. }
            | PriorSum(_)
            | ProfileCounts(_) => "profile",
            SwitchConfig(_) | MissingProfile(_) | MissingIndex(_) => "switch",
            EmptyEvalInput
            | CurveTooShort(_)
            | InconsistentLengths(_)
            | TraceQueryMismatch { .. }
            | TraceMismatch(_) => "eval",
            TraceParse(_) => "trace",
            ConfigParse(_) | ConfigInvalid(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
