//! Numerical toolkit for globally inverting nonlinear maps `F` between
//! finite-dimensional real spaces by driving the least-squares functional
//! `phi_y(x) = 1/2 |F(x) - y|^2` to zero.
//!
//! The distinguishing feature is the handling of *degenerate* critical
//! points, where both `F'` and `F''` vanish and progress is made through the
//! third directional derivative `F'''(x)h^3` via a sign-preserving cube-root
//! corrector. Around that core the crate provides:
//!
//! - [`operator`]: the operator abstraction (evaluation plus directional
//!   derivatives up to order three, with finite-difference fallbacks) and a
//!   registry of built-in problems,
//! - [`functional`]: the least-squares functional and its derivative chain,
//! - [`inverter`]: critical-point classification and the inversion driver,
//! - [`mountain_pass`]: a path-relaxation saddle finder, a discrete
//!   deformation flow, and an injectivity auditor,
//! - [`coercivity`]: ray-growth exponents and a Palais-Smale falsification
//!   probe,
//! - [`hammerstein`]: a quadrature discretization of the integral operator
//!   `F(x) = A(x^2)x + r(x)`.
//!
//! All randomized sampling is seeded; repeated runs with the same options
//! produce identical results.

pub mod coercivity;
pub mod error;
pub mod functional;
pub mod hammerstein;
pub mod inverter;
pub mod linalg;
pub mod mountain_pass;
pub mod operator;
mod sampling;

pub use error::{Error, Result};
pub use functional::{Functional, LeastSquaresFunctional};
pub use inverter::{
    classify_critical, invert, CriticalKind, CriticalPointClass, InvertOpts, SolveReport,
    SolveStatus,
};
pub use linalg::{Matrix, Vector};
pub use operator::{builtin, DerivativeMode, FdSteps, OperatorSpec};
