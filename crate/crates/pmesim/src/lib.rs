//! Solver for the singular porous-media-type equation `∂ₜu = ½ ∂²ₓₓ β(u)` on the line,
//! with `β` a maximal monotone (possibly multivalued) graph, together with the
//! probabilistic particle representation of its solutions.
//!
//! The PDE is advanced by the implicit resolvent scheme of nonlinear semigroup
//! theory; the particle side simulates the associated diffusion whose coefficient
//! is read off the PDE solution. Diagnostics cross-validate the two.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod monotone_graph;
pub mod scenario;
pub mod sde;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid1D, GridDensity, ParticleEnsemble, SignedGridMeasure};
pub use monotone_graph::{MonotoneGraph, PhiKind, PhiSpec};
pub use solver::{PmeConfig, PmeSolution};
