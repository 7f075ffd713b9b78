//! Transition kernels of weakly coupled parabolic systems with unbounded,
//! equation-dependent diffusion.
//!
//! The crate covers the whole pipeline: the operator and its cooperative and
//! adjoint variants ([`coefficients`]), hypothesis checks and constant ledgers
//! ([`hypotheses`]), Lyapunov certificates ([`lyapunov`]), the kernel-bound
//! machinery ([`bounds`]), a finite-difference Dirichlet solver ([`solver`]) and
//! the property harness that checks one against the other ([`verify`]).
//!
//! Work that is naturally data parallel (kernel columns over sources, grid
//! suprema, random trials) goes through [`par`], which uses rayon when the
//! `parallel` feature is on and runs sequentially otherwise.

pub mod bounds;
pub mod coefficients;
pub mod error;
pub mod hypotheses;
pub mod logspace;
pub mod lyapunov;
pub mod par;
pub mod presets;
pub mod quadrature;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
