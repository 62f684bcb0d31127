//! Numerical laboratory for the modified Burgers equation
//!
//! ```text
//! phi_t + c tanh(c x / 2) phi_x = phi_xx + phi_x^2,   c > 0,
//! ```
//!
//! whose characteristic speeds point away from the core at `x = 0`. The crate
//! provides the closed-form Green's function of the linearisation, Cole–Hopf
//! exact solutions, an IMEX finite-difference solver, the decomposition
//! `phi = log(1 + p(t) B(x, t)) + v` with its scalar ODE for `p`, and numerical
//! checks of the pointwise estimates that govern the decay of `v` and `p`.

// Guards are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod exact;
pub mod export;
pub mod kernels;
pub mod quadrature;
pub mod solver;
pub mod verify;

pub use decomposition::{DecompositionState, TemplateParams};
pub use error::{Error, Result};
pub use exact::InitialCondition;
pub use kernels::ModelParams;
pub use quadrature::{QuadratureRule, QuadratureSpec, Window};
pub use solver::{BoundaryCondition, Field, Grid, Scheme, SolverConfig};
pub use verify::BoundReport;
