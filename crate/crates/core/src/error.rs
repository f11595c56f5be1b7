use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unimplemented manifold `{0}`")]
    UnimplementedManifold(String),

    #[error("cannot parse manifold description `{0}`")]
    ManifoldSyntax(String),

    #[error("radius {radius} exceeds the admissible maximum {max} on {manifold}")]
    RadiusTooLarge {
        manifold: String,
        radius: f64,
        max: f64,
    },

    #[error("bandwidth {0} is too small (must be at least 1)")]
    BandwidthTooSmall(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("numerical integrity violation: {0}")]
    NumericalIntegrity(String),

    #[error("candidate set is degenerate, enlarge it: {0}")]
    EnlargeCandidates(String),

    #[error("family has no level at L = {0}")]
    MissingLevel(f64),

    #[error("family file, line {line}: {message}")]
    FamilyFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
