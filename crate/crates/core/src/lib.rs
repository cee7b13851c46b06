//! Scalar linear differential equations with infinitely many discrete delays,
//!
//! ```text
//! x'(t) = a x(t) + sum_{i>=1} b_i x(t - tau_i),   t >= 0
//! x(theta) = phi(theta),                          theta <= 0
//! ```
//!
//! solved constructively by the method of steps on the intervals
//! `[k tau_1, (k+1) tau_1]`, together with the Frechet phase-space seminorms
//! `||phi||_k` and `p_k(phi)` in which the solution operators form a strongly
//! continuous semigroup.
//!
//! Infinite coefficient sums are only ever truncated against a certified tail
//! bound (see [`coefficients::CoefficientFamily::tail_sum_bound`]), so every
//! reported seminorm carries an explicit truncation error.
//!
//! The crate is organised bottom-up:
//!
//! - [`coefficients`]: delays, coefficients, weights and tail certificates.
//! - [`history`]: initial functions, sup-seminorms, `p_k`, membership in `F` and `C_g`.
//! - [`stepper`]: the variation-of-constants method-of-steps solver.
//! - [`semigroup`]: `S_t` on top of trajectories and numerical checks of its axioms.
//! - [`oracle`]: an independent Runge-Kutta solver for truncated families.
//! - [`scenario`]: JSON scenario files, the check catalog and report output.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod history;
pub mod oracle;
pub mod poly;
pub mod quadrature;
pub mod scenario;
pub mod semigroup;
pub mod stepper;
pub mod tail;

pub use coefficients::{CoefficientFamily, Coefficients, Delays, TailBound, WeightFunction};
pub use error::{Error, Result};
pub use history::{HistoryFunction, SeminormValue, SeminormVerdict};
pub use semigroup::SemigroupOrbit;
pub use stepper::{EstimateCertificate, ProblemSpec, SolverConfig, Trajectory};
pub use oracle::{oracle_solve, OracleConfig};
