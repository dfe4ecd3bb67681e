//! Numerical verification of symmetry for least-energy k-invariant solutions
//! of semilinear Dirichlet problems on disks and annuli.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod nonlin;
pub mod solvers;
pub mod spectra;
pub mod symmetry;

pub use error::{Error, Result};
