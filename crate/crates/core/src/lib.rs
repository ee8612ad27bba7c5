//! Numerical laboratory for the weighted degenerate elliptic problem
//! `-div(|y|^a A grad u) = |y|^a f + div(|y|^a F)` with Dirichlet data on the
//! codimension-`n` set `{y = 0}`.

pub mod assembly;
pub mod cli;
pub mod curved;
pub mod error;
pub mod frequency;
pub mod geometry;
pub mod inequality;
pub mod jet;
pub mod linalg;
pub mod manufactured;
pub mod quadrature;
pub mod regularity;
pub mod solver;

pub use error::{LabError, Result};
