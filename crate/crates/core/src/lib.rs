//! Numerical toolkit for quasilinear elliptic systems driven by the
//! variable-exponent p(x)-Laplacian.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`]: uniform 1D and structured 2D P1 meshes with degree-5 Gauss
//!   quadrature, grid functions and CSV export.
//! * [`expr`]: a small arithmetic expression language used for exponents,
//!   right-hand sides and nonlinearities.
//! * [`exponents`]: variable exponent fields, their bounds, conjugates and
//!   directional monotonicity checks.
//! * [`modular`]: the modular, the Luxemburg norm and the norm-modular
//!   inequalities.
//! * [`operator`]: residual/Jacobian assembly for the p(x)-Laplacian, damped
//!   Newton Dirichlet solves, comparison, mean-value and Picone checks.
//! * [`eigen`]: first eigenpairs on a domain and on an enlarged domain.
//! * [`existence`]: hypothesis probes, sub/supersolution boxes and monotone
//!   iteration for constant-sign solutions.
//! * [`multiplicity`]: homotopy families, continuation, boundedness and
//!   nonexistence probes, multistart search for further solutions.
//! * [`config`] and [`cli`]: run configuration and command orchestration.

pub mod band;
pub mod cli;
pub mod config;
pub mod eigen;
pub mod error;
pub mod existence;
pub mod exponents;
pub mod expr;
pub mod mesh;
pub mod modular;
pub mod multiplicity;
pub mod newton;
pub mod operator;

pub use error::{Error, Result};
