//! Hierarchical and uniform hierarchical matrices for boundary-integral
//! kernel matrices on point geometries.

pub mod bench;
pub mod clustering;
mod dense;
pub mod error;
pub mod geometry;
pub mod hmatrix;
pub mod kernels;
pub mod lowrank;
pub mod parallel;
pub mod uniform;
pub mod verification;

pub use dense::orthonormality_defect;
pub use error::{Error, Result};
pub use faer::{c64, Mat};
