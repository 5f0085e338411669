use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::scene::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}", ViolationList(.0))]
    InvalidScene(Vec<Violation>),

    #[error(
        "{grid} grid undersamples the chirp: {phase_per_step:.4} rad per step \
         (limit {limit:.4}) with step {step_m:e} m"
    )]
    Nyquist {
        grid: &'static str,
        step_m: f64,
        phase_per_step: f64,
        limit: f64,
    },

    #[error("grid of half-extent {half_extent_m:e} m cannot hold a support of half-width {support_m:e} m")]
    GridTooSmall { half_extent_m: f64, support_m: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate object: the test arm receives no light")]
    DegenerateObject,

    #[error("intensity-fluctuation correlation is zero everywhere on the detector grid")]
    ZeroCorrelation,

    #[error(
        "maxima of the fluctuation term and the coincidence rate do not coincide \
         (max G2 {max_g2:e}, G2 at fluctuation peak {g2_at_peak:e})"
    )]
    MaximaMismatch { max_g2: f64, g2_at_peak: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: String,
        reason: String,
    },

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parameter(name: &'static str, value: impl fmt::Display, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scene has {} violation(s)", self.0.len())?;
        for v in self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}
