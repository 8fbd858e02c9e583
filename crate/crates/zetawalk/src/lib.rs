//! Numerical laboratory for the Riemann zeta function on the critical line
//! sampled along a Cauchy random walk.
//!
//! The crate evaluates `zeta(sigma + it)` through a truncated Dirichlet sum
//! with an integral correction term, generates reproducible Cauchy random
//! walks, implements the closed-form and asymptotic second-order moment
//! theory of the truncated system `Z_n(x)`, and verifies the closed forms
//! against parallel Monte Carlo estimates and quadrature oracles.
//!
//! Modules map onto the major subsystems:
//!
//! * [`zeta`] — truncated evaluator, Euler–Maclaurin oracle, real zeta.
//! * [`walk`] — keyed Cauchy increment streams and partial-sum walks.
//! * [`second_order`] — exact finite-`x` moments, asymptotics, `K_n`, the
//!   constant `C`, and covariance predictions.
//! * [`monte_carlo`] — deterministic parallel simulation and verification.
//! * [`quad`] — adaptive Gauss–Kronrod quadrature used by the oracles.
//! * [`output`] — CSV/JSON emission and run manifests for the CLI.

pub mod error;
pub mod kahan;
pub mod monte_carlo;
pub mod output;
pub mod quad;
pub mod second_order;
pub mod walk;
pub mod zeta;

pub use error::{Error, Result};
pub use num_complex::Complex64;
