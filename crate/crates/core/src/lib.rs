//! Numerical toolkit for the augmented k-Hessian Dirichlet problem
//! `S_k[D^2 u - A(x, u, Du)] = B(x, u, Du)` in a box, `u = phi` on the boundary.
//!
//! * [`symfun`]: elementary symmetric functions, Gårding cones, `S_k^{1/k}` and
//!   its derivatives.
//! * [`model`]: coefficient matrix `A`, source `B`, boundary data and problem
//!   catalog.
//! * [`structure`]: sampled certification of the structural hypotheses.
//! * [`solver`]: finite differences and damped Newton with homotopy.
//! * [`verify`]: audits of barrier inequalities and second-derivative bounds.
//! * [`cli`]: configuration, command dispatch and file formats for `hessctl`.

pub mod cli;
pub mod error;
pub mod model;
pub mod solver;
pub mod structure;
pub mod symfun;
pub mod verify;

pub use error::{Error, Result};
