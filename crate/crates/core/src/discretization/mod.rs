//! Meshes of `Ω` (interval, unit disc), piecewise-linear bulk and surface
//! operators, and the trace map.

mod mesh;
mod operators;

pub use mesh::{build_disc_mesh, build_interval_mesh, Cells, Mesh, MAX_DISC_LEVEL};
pub use operators::{assemble, trace, Operators};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("an interval mesh needs at least 2 elements, got {0}")]
    TooFewElements(usize),
    #[error("interval length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("disc refinement level {levels} exceeds the maximum {max}")]
    LevelTooHigh { levels: usize, max: usize },
    #[error("degenerate cell {cell} with measure {measure}")]
    DegenerateCell { cell: usize, measure: f64 },
    #[error("degenerate boundary edge between nodes {a} and {b}")]
    DegenerateBoundaryEdge { a: usize, b: usize },
    #[error("vector size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}
