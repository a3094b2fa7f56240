use std::path::PathBuf;

use thiserror::Error;

use crate::qp::QpError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{column}` (available: {available})")]
    MissingColumn { column: String, available: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: value is not finite ({value})")]
    NonFinite {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("phase is not strictly increasing at row {row} ({prev} -> {next})")]
    NonMonotonePhase { row: usize, prev: f64, next: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("channel lengths differ: phase {phase}, angle {angle}, velocity {velocity}, torque {torque}")]
    LengthMismatch {
        phase: usize,
        angle: usize,
        velocity: usize,
        torque: usize,
    },
    #[error("phase must run from 0 to 1, got [{first}, {last}]")]
    PhaseRange { first: f64, last: f64 },
    #[error("invalid cycle duration {0} s")]
    CycleDuration(f64),
    #[error("noise standard deviation must be >= 0, got {0}")]
    NegativeNoise(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("phase {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
    #[error("stance end {0} must lie strictly inside (0, 1)")]
    StanceEnd(f64),
    #[error("profile needs at least one coefficient")]
    EmptyProfile,
    #[error("swing value {swing} must equal the constant coefficient {c0}")]
    SwingMismatch { swing: f64, c0: f64 },
    #[error("non-finite coefficient at index {0}")]
    NonFiniteCoefficient(usize),
    #[error("section boundaries must start at 0, end at 1 and strictly increase: {0:?}")]
    Boundaries(Vec<f64>),
    #[error("{sections} sections but {angles} equilibrium angles")]
    AngleCount { sections: usize, angles: usize },
    #[error("non-finite equilibrium angle in section {0}")]
    NonFiniteAngle(usize),
    #[error("stiffness and damping disagree on stance end ({stiffness} vs {damping})")]
    StanceEndMismatch { stiffness: f64, damping: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("tuning factors must be >= 0 (alpha {alpha}, beta {beta}, gamma {gamma})")]
    NegativeTuning { alpha: f64, beta: f64, gamma: f64 },
    #[error("grid needs at least {needed} points, got {got}")]
    GridTooSmall { needed: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("fit window [{0}, {1}] is empty or outside [0, 1]")]
    EmptyWindow(f64, f64),
    #[error("fit window [{0}, {1}] contains fewer than two samples")]
    WindowTooSparse(f64, f64),
    #[error("polynomial order must be >= 0")]
    Order,
    #[error("lipschitz bound must be finite and > 0, got {0}")]
    Lipschitz(f64),
    #[error("angle bounds for section {section} are inverted ({lo} > {hi})")]
    AngleBounds { section: usize, lo: f64, hi: f64 },
    #[error("{sections} sections but {bounds} angle bound pairs")]
    AngleBoundCount { sections: usize, bounds: usize },
    #[error("constraint grid needs >= 2 points, got {0}")]
    ConstraintGrid(usize),
    #[error("{step} subproblem failed: {source}")]
    Subproblem {
        step: &'static str,
        #[source]
        source: QpError,
    },
    #[error("cost became non-finite at iteration {0}")]
    NonFiniteCost(usize),
    #[error("need at least one start")]
    NoStarts,
    #[error("all {0} starts failed; first error: {1}")]
    AllStartsFailed(usize, String),
    #[error("nothing to compare")]
    EmptyComparison,
}
