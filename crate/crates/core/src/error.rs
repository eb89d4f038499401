//! Error taxonomy shared by the whole crate.
//!
//! The variants map onto process exit codes in the CLI: configuration and
//! usage problems exit 2, numerical failures exit 3, and failed checks exit 1
//! (checks report through their result types, not through `Error`).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (non-unit
    /// direction, non-SPD matrix, negative radius, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The logarithm map was requested across a cut locus; carries the
    /// per-factor angle that triggered the failure.
    #[error("cut locus: factor angle {angle:.6} within tolerance of pi")]
    CutLocus { angle: f64 },

    /// Geodesic-sphere / tube radius exceeds the safe bound derived from the
    /// first conjugate radius of the ambient space.
    #[error("radius {radius:.6} exceeds admissible bound {bound:.6}")]
    RadiusBound { radius: f64, bound: f64 },

    /// A parallel hypersurface lost rank at the given offset.
    #[error("focal degeneracy: parallel surface at t = {t:.6} loses rank")]
    FocalDegenerate { t: f64 },

    /// Reconstruction was attempted at an offset that is not a focal radius.
    #[error("not a focal radius: {0}")]
    NotFocal(String),

    /// A numerical procedure failed to converge or stalled.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Inconsistent or incomplete caller-supplied configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Config file syntax or validation problem; carries a line number when
    /// the problem is syntactic.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
