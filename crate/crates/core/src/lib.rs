//! Geometric multigrid for the semi-implicit Stokes immersed-boundary equations
//! on a staggered grid.

pub mod coupling;
pub mod dense;
pub mod driver;
pub mod error;
pub mod fiber;
pub mod grid;
pub mod krylov;
pub mod multigrid;
pub mod operators;
pub mod smoothers;
pub mod sparse;
pub mod system;
pub mod transfer;

pub use error::{IbmgError, Result};
pub use grid::{BlockVector, Dof, GridHierarchy, StaggeredLevel};
