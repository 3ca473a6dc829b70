use std::path::PathBuf;

use crate::dataset::Side;

/// Errors produced by the estimation, inference and diagnostic routines.
#[derive(Debug, thiserror::Error)]
pub enum RdError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),

    #[error("non-numeric value `{value}` in column `{column}` at data row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough observations {side} the cutoff: need {needed}, found {found}")]
    InsufficientObservations {
        side: Side,
        needed: usize,
        found: usize,
    },

    #[error("design matrix is singular {side} the cutoff (too few distinct score values in the bandwidth)")]
    SingularDesign { side: Side },

    #[error("bandwidth {0} is too small for the requested fit")]
    BandwidthTooSmall(f64),

    #[error("the data set has no received-treatment column")]
    MissingReceived,

    #[error("estimated first stage is numerically zero ({0:e})")]
    ZeroFirstStage(f64),

    #[error("no observations {0} the cutoff inside the window")]
    EmptySide(Side),

    #[error("the window contains no observations")]
    EmptyWindow,

    #[error("the grid of candidate effects is empty")]
    EmptyGrid,

    #[error("no grid value was retained by the test inversion")]
    EmptyConfidenceSet,

    #[error("score takes only {0} distinct values; the density test requires a continuous score")]
    DiscreteScore(usize),

    #[error("too few histogram bins on one side of the cutoff ({0})")]
    InsufficientBins(usize),

    #[error("placebo cutoff {0} lies outside the support of the score on either side")]
    CutoffOutsideSupport(f64),

    #[error("placebo cutoff {0} coincides with the true cutoff")]
    SideAmbiguous(f64),

    #[error("too few observations to build the plot: {0}")]
    TooFewObservations(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, RdError>;
