//! Trace finite elements for transport-diffusion on evolving implicit
//! surfaces.
//!
//! A fixed Kuhn tetrahedral mesh carries a P1 level set. Each time level
//! extracts the piecewise planar zero level, assembles full-gradient trace
//! operators over it, solves with diagonally rescaled GMRES and extends the
//! solution into a narrow band by fast marching. Every numerical kernel is
//! generic over [`Real`] (`f32` or `f64`).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod fmm;
pub mod geometry;
pub mod integrator;
pub mod level_set;
pub mod mesh;
pub mod output;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod sparse;

pub use assembly::{DofMap, SurfaceOperator, TraceSpace};
pub use error::{Error, Result};
pub use experiments::Experiment;
pub use fields::{Analytic, ExactSolution, ScalarField, VectorField};
pub use fmm::{ExtendedField, NarrowBandState};
pub use geometry::Vec3;
pub use integrator::{Scheme, StepRecord, TransientConfig, TransientResult, TransportForm};
pub use level_set::{LevelSetField, SurfaceTriangulation};
pub use mesh::{Aabb, BackgroundMesh};
pub use scalar::Real;
pub use solver::{GmresOptions, SolveReport};
pub use sparse::CsrMatrix;

pub type Point = geometry::Vec3<f64>;
pub type Mesh = mesh::BackgroundMesh<f64>;
pub type Surface = level_set::SurfaceTriangulation<f64>;
pub type Matrix = sparse::CsrMatrix<f64>;
pub type Config = integrator::TransientConfig<f64>;
