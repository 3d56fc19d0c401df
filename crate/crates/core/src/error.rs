use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("box side {axis} of length {length} is not an integer multiple of h = {h}")]
    NonMultipleSide { axis: usize, length: f64, h: f64 },

    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("tetrahedron {tet} is degenerate")]
    DegenerateTet { tet: usize },

    #[error("level set value at vertex {vertex} is not finite ({value})")]
    NonFiniteLevelSet { vertex: usize, value: f64 },

    #[error("the zero level set does not cut any tetrahedron; the surface left the domain")]
    EmptySurface,

    #[error("convection matrix requested without a velocity field")]
    MissingVelocity,

    #[error("diagonal entry {row} is {value}; cannot rescale")]
    BadDiagonal { row: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "GMRES did not converge after {iterations} iterations (relative residual {residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("fast marching heap exhausted while {active} vertices are still active")]
    HeapExhausted { active: usize },

    #[error(
        "vertex {vertex} of the new cut strip has no extended value from step {history_step}; \
         reduce the time step or widen the band (larger L)"
    )]
    BandInclusion { vertex: usize, history_step: usize },

    #[error("unknown experiment id {0} (expected 1..=5)")]
    UnknownExperiment(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
