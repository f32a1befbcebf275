use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One offending line in a validated input.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the valid range of a model or conversion.
    #[error("domain error: {0}")]
    Domain(String),

    /// A codec profile or other configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// Least-squares design matrix does not have full column rank.
    #[error("rank-deficient design matrix; dependent terms: {}", fmt_terms(.dependent_terms))]
    RankDeficient { dependent_terms: Vec<(u32, u32)> },

    #[error("too few samples for fit: {samples} samples, {terms} terms")]
    TooFewSamples { samples: usize, terms: usize },

    #[error("coefficient count {coefficients} does not match term count {terms}")]
    CoefficientCount { coefficients: usize, terms: usize },

    #[error("length mismatch: {predicted} predicted vs {observed} observed values")]
    LengthMismatch { predicted: usize, observed: usize },

    #[error("observed value at index {index} is zero")]
    ZeroObserved { index: usize },

    #[error("empty input: {0}")]
    Empty(String),

    /// Row-level validation failures, all of them, not just the first.
    #[error("validation failed:\n{}", fmt_lines(.0))]
    Validation(Vec<LineError>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_terms(terms: &[(u32, u32)]) -> String {
    terms
        .iter()
        .map(|(i, j)| format!("x^{i}y^{j}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_lines(lines: &[LineError]) -> String {
    lines
        .iter()
        .map(|l| format!("  {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}
