//! Discretization and spectral analysis of the truncated-horizon fractional
//! p-Laplacian on one-dimensional intervals.
//!
//! The crate assembles the peridynamic Gagliardo energy of continuous
//! piecewise-linear functions, computes eigenpairs of the associated
//! nonlinear eigenvalue problem, and runs horizon sweeps that compare the
//! computed spectra against their local (`delta -> 0`) and fractional
//! (`delta -> infinity`) limits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolver;
pub mod energy;
pub mod error;
pub mod exec;
pub mod harness;
pub mod kernelmath;
pub mod mesh;
pub mod quadrature;

pub use eigensolver::{EigenPair, SolverOptions};
pub use energy::{EnergyBreakdown, NonlocalForm};
pub use error::{Error, Result};
pub use exec::Execution;
pub use kernelmath::{Horizon, KernelParams};
pub use mesh::{DiscreteFunction, DomainSpec, Mesh};
