use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-manifold or inconsistently oriented edge ({0}, {1})")]
    NonManifold(usize, usize),

    #[error("open boundary: directed edge ({0}, {1}) has no twin")]
    OpenBoundary(usize, usize),

    #[error("degenerate face {0}")]
    DegenerateFace(usize),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("mesh has {0} connected components")]
    Disconnected(usize),

    #[error("degenerate triangle {0} in curvature evaluation")]
    DegenerateTriangle(usize),

    #[error("query point lies on the surface")]
    PointOnSurface,

    #[error("constraint differentials are degenerate (best |det| = {0:e})")]
    DegenerateConstraints(f64),

    #[error("targets outside the guaranteed ball: normalized distance {distance:e} > radius {radius:e}")]
    OutOfRadius { distance: f64, radius: f64 },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("region is not a graph over the fitted plane")]
    NotAGraph,

    #[error("region consists of {0} sheets")]
    MultiSheet(usize),

    #[error("linear solver failure: residual {0:e}")]
    SolverFailure(f64),

    #[error("stitch failure: {0}")]
    StitchFailure(String),

    #[error("line search stalled")]
    LineSearchStalled,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
