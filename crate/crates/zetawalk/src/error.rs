//! Crate-wide error type.

/// Errors produced by evaluators, closed forms, and simulations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested at the pole s = 1.
    #[error("zeta has a pole at s = 1")]
    Pole,

    /// A sample's |t| exceeds the configured evaluation cap. Heavy-tailed
    /// Cauchy draws make the O(|t|) truncated sum infeasible beyond the cap;
    /// the sample is surfaced to the caller instead of silently clipped.
    #[error("|t| = {t:e} exceeds the evaluation cap {cap:e}")]
    CapExceeded { t: f64, cap: f64 },

    /// The reference evaluator was asked for |t| beyond its validated range.
    #[error("|t| = {t:e} is outside the oracle range |t| <= {max:e}")]
    RangeExceeded { t: f64, max: f64 },

    /// The closed form for E Z_{n2} conj(Z_{m2}) is singular when
    /// m - n = 2(1 - sigma); the quadrature route must be used instead.
    #[error(
        "closed form is singular at n = {n}, m = {m}, sigma = {sigma}; \
         use cross_n2m2_quadrature"
    )]
    SingularCross { n: u32, m: u32, sigma: f64 },

    /// A cost guard tripped before starting an infeasibly large computation.
    #[error("x = {x:e} exceeds the cost guard {max:e}")]
    CostGuard { x: f64, max: f64 },

    /// An iterative scheme failed to reach its tolerance within budget.
    #[error("{what} did not converge: reached {achieved:e}, requested {requested:e}")]
    NonConvergence {
        what: &'static str,
        achieved: f64,
        requested: f64,
    },

    /// A structurally invalid argument (counts, orderings, empty inputs).
    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
