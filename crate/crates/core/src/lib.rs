//! Matrix-free Rosenbrock-Krylov time integration.
//!
//! The stage systems of a linearly-implicit Rosenbrock method are solved in a
//! Krylov subspace built from Jacobian-vector products, so the Jacobian is
//! never formed. The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod arnoldi;
mod error;
pub mod integrate;
pub mod linalg;
pub mod problem;
pub mod reference;
pub mod rok;
pub mod stability;
pub mod tableau;

pub use error::{Error, Result};
pub use linalg::{DenseLu, DenseMatrix, HessenbergFactorization};
pub use arnoldi::{build_adaptive, build_fixed, AdaptiveBasis, KrylovBasis};
pub use integrate::{integrate, BasisStrategy, IntegratorConfig, RunStats, Solution};
pub use problem::OdeProblem;
pub use rok::{rok_step, StepResult};
pub use tableau::Tableau;
