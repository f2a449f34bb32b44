use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} lies outside the unit interval [0, 1]")]
    Domain { x: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normal equations are rank deficient at dimension {dimension} of {size}")]
    RankDeficient { dimension: usize, size: usize },

    #[error("polynomial degree {requested} exceeds spline degree {max}")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("model `{model}`: feature `{feature}` is collinear with the preceding features")]
    Collinear { model: String, feature: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("model `{model}` violates the positivity guard: min f(x|beta) = {min} <= {threshold}")]
    Positivity {
        model: String,
        min: f64,
        threshold: f64,
    },

    #[error("model selection failed: {0}")]
    SelectionFailed(String),

    #[error("local polynomial of degree {degree} is singular at x = {x} (bandwidth {bandwidth})")]
    BandwidthTooSmall { x: f64, bandwidth: f64, degree: usize },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

impl Error {
    /// Process exit code for this failure class (2 input, 3 model constraint, 4 numerical).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. }
            | Error::InvalidInput(_)
            | Error::UnsupportedDegree { .. }
            | Error::Config(_)
            | Error::Io { .. }
            | Error::Csv { .. } => 2,
            Error::Positivity { .. } => 3,
            Error::RankDeficient { .. }
            | Error::Collinear { .. }
            | Error::DegenerateFit(_)
            | Error::SelectionFailed(_)
            | Error::BandwidthTooSmall { .. }
            | Error::Quadrature { .. }
            | Error::Invariant(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { x })
    }
}
