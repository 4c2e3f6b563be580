use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum DpmError {
    #[error("projection onto the curve did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("point ({x}, {y}) lies outside the projection tube (distance {distance:e}, tube {tube:e})")]
    OutOfTube {
        x: f64,
        y: f64,
        distance: f64,
        tube: f64,
    },

    #[error("degenerate level set: vanishing gradient near ({x}, {y})")]
    DegenerateLevelSet { x: f64, y: f64 },

    #[error("geometry clearance violated: {0}")]
    Clearance(String),

    #[error("unsupported order {0}, expected 2 or 4")]
    UnsupportedOrder(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("history holds {have} snapshots but {need} are required")]
    InsufficientHistory { have: usize, need: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("boundary system is rank deficient: rank {rank} for {cols} unknowns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("side mismatch: {0}")]
    SideMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DpmError>;
