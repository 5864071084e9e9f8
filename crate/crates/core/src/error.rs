//! Crate-wide error type.

use std::fmt;

/// Errors surfaced by model construction, analysis and design operations.
///
/// Decoding failures are not errors: decoders report them through
/// [`crate::decode::DecodeStatus`] so callers can distinguish "the data is
/// inconsistent" from "the request is malformed".
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or vector dimensions are mutually inconsistent.
    Dimension(String),
    /// A matrix entry is NaN or infinite.
    NonFinite(String),
    /// The observability matrix does not have full column rank.
    Unobservable { horizon: usize, rank: usize, n: usize },
    /// The pair (A, B) is not controllable.
    Uncontrollable { rank: usize, n: usize },
    /// A requested pole coincides with an eigenvalue of A, or fails the
    /// full-support admissibility requirement.
    InadmissiblePole {
        pole: (f64, f64),
        sensor: Option<usize>,
        suggestion: (f64, f64),
    },
    /// The eigenvalues of A do not have pairwise distinct magnitudes.
    EigenvalueMagnitudes(String),
    /// A subset enumeration would exceed the configured budget; pass
    /// `force = true` (CLI: `--force`) to run it anyway.
    CostGuard { estimated_tests: f64, budget: f64 },
    /// A file did not match the documented schema.
    Schema(String),
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite entry: {msg}"),
            Error::Unobservable { horizon, rank, n } => write!(
                f,
                "unobservable: stacked output map over {horizon} steps has rank {rank} < {n}"
            ),
            Error::Uncontrollable { rank, n } => {
                write!(f, "uncontrollable pair: controllability matrix rank {rank} < {n}")
            }
            Error::InadmissiblePole { pole, sensor, suggestion } => {
                write!(f, "inadmissible pole {}+{}i", pole.0, pole.1)?;
                if let Some(i) = sensor {
                    write!(f, ": sensor {} sees no component of the forced eigenvector", i + 1)?;
                }
                write!(
                    f,
                    " (a nearby candidate is {}+{}i; not applied automatically)",
                    suggestion.0, suggestion.1
                )
            }
            Error::EigenvalueMagnitudes(msg) => {
                write!(f, "eigenvalue magnitudes not pairwise distinct: {msg}")
            }
            Error::CostGuard { estimated_tests, budget } => write!(
                f,
                "refusing to run ~{estimated_tests:.3e} subset rank tests (budget {budget:.0e}); \
                 pass force/--force to override"
            ),
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
