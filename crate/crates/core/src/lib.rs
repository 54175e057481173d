//! Exact algebraic de Rham cohomology for small smooth affine varieties.
//!
//! Every effective step (certificates, lifts, cohomology slices) is reduced to a
//! bounded-degree linear system over ℚ and solved exactly.

pub mod error;
pub mod linsolve;
pub mod parse;
pub mod poly;
pub mod ring;
pub mod certificates;
pub mod cech;
pub mod gysin;
pub mod hypercoh;
pub mod resolve;
pub mod engine;

pub use error::{EdrcError, Result};
pub use poly::{MultiPoly, Scalar, Vars};
