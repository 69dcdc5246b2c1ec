use thiserror::Error;

/// Errors raised by grid construction, operators, and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IbmgError {
    #[error("finest grid size {0} is not of the form 8 * 2^k")]
    InvalidGridSize(usize),

    #[error("level mismatch: expected n = {expected}, got n = {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected} entries, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("Lagrangian node {node} at ({x}, {y}) lies within the kernel support of the boundary")]
    NodeNearBoundary { node: usize, x: f64, y: f64 },

    #[error("could not place suspension (seed {seed}) after {attempts} attempts")]
    PlacementFailed { seed: u64, attempts: usize },

    #[error("subdomain box size {box_size} does not divide level size {n}")]
    InvalidPartition { box_size: usize, n: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("dense factorization failed: {0}")]
    Factorization(String),

    #[error("Krylov breakdown at iteration {0}")]
    Breakdown(usize),
}

pub type Result<T> = std::result::Result<T, IbmgError>;
