//! Error type shared by the numerical modules.

use alloc::string::String;
use thiserror::Error;

/// Errors reported by model checks, law construction, estimators,
/// statistics and calibration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The quadrature for the normalising constant `G(S)` does not settle
    /// under grid refinement or domain extension; the model is not
    /// positive recurrent on the checked domain.
    #[error("G(S) quadrature diverges under refinement: {0}")]
    QuadratureDivergence(String),

    /// The invariant density could not be normalised.
    #[error("invariant density normalisation failed: {0}")]
    NormalizationFailure(String),

    /// A tail integral entering the variance clocks is numerically
    /// divergent, so the requested quantity is infinite.
    #[error("tail integral diverges at {side} edge for {what}")]
    TailDivergence { what: &'static str, side: &'static str },

    /// The argument is outside the domain where the quantity is defined.
    #[error("{what} is only defined for x >= median (got x = {x}, median = {median})")]
    DomainError { what: &'static str, x: f64, median: f64 },

    /// Two tabulated laws do not share a grid.
    #[error("laws are tabulated on incompatible grids")]
    GridMismatch,

    /// A spatial grid violates its construction invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A simulated path left the plausible range of the hypothesised law.
    #[error("path escaped to |x| = {reached:.3e} (limit {limit:.3e}) at step {step}; reduce dt or check ergodicity")]
    BlowupError { reached: f64, limit: f64, step: usize },

    /// Too much occupation time falls outside the evaluation grid.
    #[error("grid too narrow: {outside_fraction:.3}% of occupation time outside the grid")]
    GridTooNarrow { outside_fraction: f64 },

    /// The user-supplied weight for the unbiased estimator vanishes on the grid.
    #[error("weight function vanishes on the grid (|h| < {0:.1e})")]
    WeightVanishes(f64),

    /// A path is malformed (too short, non-finite values, bad dt).
    #[error("invalid sample path: {0}")]
    InvalidPath(String),

    /// The requested test level is not tabulated.
    #[error("level {0} not tabulated in the critical-value table")]
    LevelNotTabulated(f64),

    /// Too few Monte Carlo draws to extract stable quantiles.
    #[error("insufficient samples: {got} draws, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Calibration parameters are out of their supported range.
    #[error("invalid calibration parameters: {0}")]
    InvalidCalibration(String),

    /// The corrected composite statistic requires a family whose invariant
    /// median does not move with the parameter.
    #[error("median of the invariant law depends on the parameter for this family; corrected statistic is not available")]
    MedianVariesWithTheta,

    /// A parametric-family operation was requested on the wrong family.
    #[error("operation requires the {0} family")]
    WrongFamily(&'static str),
}
