//! The phi functions controlling the scaled B_k D_k sums, and the additive
//! constants they determine.
//!
//! ```text
//! phi(a)  = (a e^a - 2 e^a + a + 2) / (2 a^2 (e^a - 1))
//! phi1(a) = (a - 2 + a e^-a + 2 e^-a) / (2 a^2 (e^a - 1))
//! phi2(a) = (2 e^-a + a e^-a - 2) / (2 a^2)
//! ```
//!
//! They satisfy phi1 + phi2 = phi - 1/(2a) identically. Direct evaluation
//! cancels catastrophically below a ~ 0.5, where the numerators are
//! O(a^3) differences of O(1) exponentials; there we switch to the series
//! a e^a - 2 e^a + a + 2 = sum_{j>=3} (j-2)/j! a^j (and its alternating
//! mirror for e^{-a}), whose coefficients are exact.

use crate::error::{Error, Result};
use crate::quad;

/// Euler's constant.
pub const EULER_CONST: f64 = 0.577_215_664_901_532_9;

const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: usize = 24;

/// N(a)/a^3 where N(a) = a e^a - 2 e^a + a + 2; all-positive series.
fn n_over_a3(a: f64) -> f64 {
    // coefficients (i+1)/(i+3)! for i = 0..
    let mut fact = 6.0; // 3!
    let mut pow = 1.0;
    let mut acc = 0.0;
    for i in 0..SERIES_TERMS {
        acc += (i as f64 + 1.0) / fact * pow;
        pow *= a;
        fact *= i as f64 + 4.0;
    }
    acc
}

/// M(a)/a^3 where M(a) = a - 2 + a e^-a + 2 e^-a; alternating series.
fn m_over_a3(a: f64) -> f64 {
    let mut fact = 6.0;
    let mut pow = 1.0;
    let mut acc = 0.0;
    let mut sign = 1.0;
    for i in 0..SERIES_TERMS {
        acc += sign * (i as f64 + 1.0) / fact * pow;
        pow *= a;
        fact *= i as f64 + 4.0;
        sign = -sign;
    }
    acc
}

/// (phi, phi1, phi2) at alpha > 0.
///
/// The identity phi1 + phi2 = phi - 1/(2 alpha) holds to ~1e-14 absolute
/// across the whole range.
pub fn phi_funcs(alpha: f64) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "phi functions require alpha > 0, got {alpha}"
        )));
    }
    if alpha < SERIES_CUTOFF {
        let q = alpha.exp_m1() / alpha; // (e^a - 1)/a, stable
        let phi = n_over_a3(alpha) / (2.0 * q);
        let p1 = m_over_a3(alpha);
        let phi1 = alpha * p1 / (2.0 * alpha.exp_m1());
        let phi2 = -1.0 / (2.0 * alpha) + alpha * p1 / 2.0;
        Ok((phi, phi1, phi2))
    } else {
        let ea = alpha.exp();
        let ena = (-alpha).exp();
        let den = 2.0 * alpha * alpha * (ea - 1.0);
        let phi = (alpha * ea - 2.0 * ea + alpha + 2.0) / den;
        let phi1 = (alpha - 2.0 + alpha * ena + 2.0 * ena) / den;
        let phi2 = (2.0 * ena + alpha * ena - 2.0) / (2.0 * alpha * alpha);
        Ok((phi, phi1, phi2))
    }
}

fn phi_only(alpha: f64) -> f64 {
    phi_funcs(alpha).expect("alpha > 0").0
}

/// Breakdown of the additive constants of the second-order theory.
///
/// `kn_constant` is the limit of K_n - log n; `variance_constant` (exactly
/// one less, because the squared mean of the sampled zeta values tends to 1)
/// is the limit of the centered second moment minus log n.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstantCBreakdown {
    pub euler_const: f64,
    pub integral_0_1: f64,
    pub integral_1_inf: f64,
    pub kn_constant: f64,
    pub variance_constant: f64,
}

const TAIL_CUT: f64 = 200.0;

/// Compute the constant breakdown by adaptive quadrature.
///
/// On [1, inf) the integrand phi - 1/(2a) equals -1/a^2 + 1/(a(e^a - 1));
/// it is integrated to `TAIL_CUT` and the -1/a^2 tail is added analytically
/// (the remaining exponential tail is below e^-200).
pub fn constant_c() -> Result<ConstantCBreakdown> {
    let i01 = quad::integrate(phi_only, 0.0, 1.0, 1e-11)?.value;
    let body = quad::integrate_segments(
        |a| phi_only(a) - 0.5 / a,
        &[1.0, 4.0, 16.0, 64.0, TAIL_CUT],
        1e-11,
    )?
    .value;
    let i1inf = body - 1.0 / TAIL_CUT;
    let kn_constant = EULER_CONST + 2.0 * i01 + 2.0 * i1inf;
    Ok(ConstantCBreakdown {
        euler_const: EULER_CONST,
        integral_0_1: i01,
        integral_1_inf: i1inf,
        kn_constant,
        variance_constant: kn_constant - 1.0,
    })
}
