//! The additive constant K_n of the diagonal sum-part second moment,
//! and the scaled B_k / D_k building blocks.
//!
//! With p = n - 3/2 and s = n + 1/2,
//!
//! ```text
//! B_k = int_0^1 (k+t)^p (t - 1/2) dt,        D_k = sum_{l>k} l^{-s},
//! K_n = ((n-3/2)/(n+1/2)) zeta(n+1/2) + 2 (n-1/2) sum_{k>=1} B_k D_k.
//! ```
//!
//! The (n-1/2) weight is forced by the first-order Euler–Maclaurin identity
//!
//! ```text
//! sum_{k<=l} k^{n-1/2} = (l^{n+1/2}-1)/(n+1/2) + (l^{n-1/2}+1)/2
//!                        + (n-1/2) sum_{k<=l-1} B_k,
//! ```
//!
//! which is exact (the derivative of x^{n-1/2} is (n-1/2) x^{n-3/2}); the
//! defining property K_n ~ E|Z_{n1}|^2 - 2x/(n+1/2) pins it numerically.
//!
//! Everything is evaluated in scaled form: b~_k = B_k (k+1)^{-(n-1/2)} and
//! d~_k = D_k (k+1)^{n+1/2} stay O(1)..O(k/n), so no power ever overflows,
//! and the series term collapses to (n-1/2) b~_k d~_k / (k+1).

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::quad;
use crate::zeta::{zeta_real, B2J_OVER_FACT};

/// B_k (k+1)^{-(n-1/2)} via the closed antiderivative, in log space.
///
/// Accurate to a few ulps of the largest constituent; for k >> n the value
/// itself is ~ n/(12 k^2) and carries the inherent cancellation of the
/// antiderivative differences, which is harmless for the series total.
pub(crate) fn b_scaled_closed(n: u32, k: u64) -> f64 {
    let p = n as f64 - 1.5;
    let kf = k as f64;
    let l1p = (1.0 / kf).ln_1p();
    // 1 - (k/(k+1))^{p+1} and 1 - (k/(k+1))^{p+2} without cancellation
    let g1 = -(-(p + 1.0) * l1p).exp_m1();
    let g2 = -(-(p + 2.0) * l1p).exp_m1();
    1.0 / (p + 1.0) - (kf + 1.0) * g2 / ((p + 1.0) * (p + 2.0)) - g1 / (2.0 * (p + 1.0))
}

/// D_k (k+1)^{n+1/2}: direct summation while terms decay fast, switching to
/// Euler–Maclaurin once the index passes s = n + 1/2.
pub(crate) fn d_scaled(n: u32, k: u64) -> f64 {
    let s = n as f64 + 0.5;
    let a = k as f64 + 1.0;
    if a > s {
        return em_tail_scaled(s, a);
    }
    // Terms (1 + h/a)^{-s} fall like e^{-s h / a}; s/a >= 1 here so only a
    // few dozen terms are ever needed before either convergence or the
    // crossover to the Euler–Maclaurin regime.
    let mut acc = Kahan::new();
    let mut h = 0u64;
    loop {
        let term = (-s * (h as f64 / a).ln_1p()).exp();
        acc.add(term);
        h += 1;
        if term < 1e-18 * acc.value() {
            return acc.value();
        }
        if a + h as f64 > s {
            let l0 = a + h as f64;
            // remaining tail sum_{l >= l0} l^{-s}, rescaled back to a^s
            let tail = em_tail_scaled(s, l0) * (-s * (l0 / a).ln()).exp();
            return acc.value() + tail;
        }
    }
}

/// sum_{l >= a} l^{-s} scaled by a^s, via Euler–Maclaurin (valid for a > s):
/// a/(s-1) + 1/2 + sum_j B_{2j}/(2j)! * s(s+1)...(s+2j-2) / a^{2j-1}.
fn em_tail_scaled(s: f64, a: f64) -> f64 {
    let mut acc = a / (s - 1.0) + 0.5;
    let mut pp = s / a; // s(s+1)...(s+2j-2) / a^{2j-1}, by recurrence
    for (j, &b) in B2J_OVER_FACT.iter().enumerate() {
        acc += b * pp;
        let jj = 2.0 * (j as f64 + 1.0);
        pp *= (s + jj - 1.0) * (s + jj) / (a * a);
    }
    acc
}

/// Scaled building blocks (n B_k (k+1)^{-(n-1/2)}, D_k (k+1)^{n+1/2},
/// D'_k (k+1)^{n+1/2}), the first by adaptive quadrature of the scaled
/// integrand, all in log space.
pub fn bk_dk_scaled(n: u32, k: u64) -> Result<(f64, f64, f64)> {
    if n < 3 {
        return Err(Error::Domain(format!("bk_dk_scaled requires n >= 3, got {n}")));
    }
    if k < 1 {
        return Err(Error::Domain("bk_dk_scaled requires k >= 1".into()));
    }
    let p = n as f64 - 1.5;
    let kf = k as f64;
    // n B_k (k+1)^{-(n-1/2)} = (n/(k+1)) int_0^1 e^{p log((k+t)/(k+1))} (t-1/2) dt
    let integrand = |t: f64| (p * ((kf + t) / (kf + 1.0)).ln()).exp() * (t - 0.5);
    let quad_result = quad::integrate_segments(integrand, &[0.0, 0.5, 1.0], 1e-14)?;
    let b = n as f64 / (kf + 1.0) * quad_result.value;
    let d = d_scaled(n, k);
    Ok((b, d, d - 1.0))
}

const KN_REL_CUTOFF: f64 = 1e-13;
const KN_CONSEC: u32 = 10;
const KN_MAX_TERMS: u64 = 400_000_000;

/// The constant K_n: exact series with the asymptotically negligible part
/// dropped once ten consecutive terms fall below 1e-13 of the running total
/// (the terms decay like 2^{-beta_k} into a n/(k+1)^2 tail, not
/// monotonically at the crossover).
pub fn compute_kn(n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain(format!("compute_kn requires n >= 3, got {n}")));
    }
    let nf = n as f64;
    let s = nf + 0.5;
    let first = (nf - 1.5) / (nf + 0.5) * zeta_real(s)?;
    let weight = nf - 0.5;

    let mut series = Kahan::new();
    let mut consecutive = 0u32;
    let mut k = 1u64;
    loop {
        let term = weight * b_scaled_closed(n, k) * d_scaled(n, k) / (k as f64 + 1.0);
        series.add(term);
        let running = first + 2.0 * series.value();
        if term.abs() < KN_REL_CUTOFF * running.abs() {
            consecutive += 1;
            if consecutive >= KN_CONSEC {
                break;
            }
        } else {
            consecutive = 0;
        }
        k += 1;
        if k > KN_MAX_TERMS {
            return Err(Error::NonConvergence {
                what: "K_n series",
                achieved: term.abs(),
                requested: KN_REL_CUTOFF,
            });
        }
    }
    Ok(first + 2.0 * series.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::second_order::phi::constant_c;

    #[test]
    fn closed_form_b_matches_quadrature() {
        for &n in &[3u32, 5, 10, 100] {
            for &k in &[1u64, 2, 7, 50, 1000] {
                let closed = n as f64 * b_scaled_closed(n, k);
                let (b_quad, _, _) = bk_dk_scaled(n, k).unwrap();
                assert!(
                    (closed - b_quad).abs() < 1e-10 * b_quad.abs().max(1e-12),
                    "n={n} k={k}: {closed} vs {b_quad}"
                );
            }
        }
    }

    #[test]
    fn d_scaled_matches_brute_force() {
        for &n in &[3u32, 5, 12] {
            for &k in &[1u64, 2, 5, 9, 30, 200] {
                let s = n as f64 + 0.5;
                let mut brute = 0.0;
                for l in (k + 1)..(k + 2_000_000) {
                    let t = (-s * ((l as f64) / (k as f64 + 1.0)).ln()).exp();
                    brute += t;
                    if t < 1e-19 * brute {
                        break;
                    }
                }
                let d = d_scaled(n, k);
                assert!(
                    (d - brute).abs() < 1e-9 * brute,
                    "n={n} k={k}: {d} vs {brute}"
                );
            }
        }
    }

    #[test]
    fn dprime_is_d_minus_one() {
        let (_, d, dp) = bk_dk_scaled(1000, 1234).unwrap();
        assert_eq!(dp, d - 1.0);
    }

    #[test]
    fn scaled_limits_at_beta_one() {
        // n = 1000, k = n: beta = n/(k+1) ~ 1; limits
        // b: (1+e^-b)/2 + (e^-b - 1)/b  evaluated at b = 1000/1001,
        // d: 1/(1 - e^-b).
        let n = 1000u32;
        let (b, d, _) = bk_dk_scaled(n, 1000).unwrap();
        let beta = 1000.0 / 1001.0;
        let blim = (1.0 + (-beta).exp()) / 2.0 + ((-beta).exp() - 1.0) / beta;
        let dlim = 1.0 / (1.0 - (-beta).exp());
        assert!((b - blim).abs() / blim < 0.02, "b={b} blim={blim}");
        assert!((d - dlim).abs() / dlim < 0.02, "d={d} dlim={dlim}");
        // Hand value at beta ~ 1.
        assert!((b - 0.051_819).abs() / 0.051_819 < 0.10);
    }

    #[test]
    fn kn_domain() {
        assert!(compute_kn(2).is_err());
        assert!(bk_dk_scaled(2, 5).is_err());
    }

    #[test]
    fn kn_small_values_match_defining_sums() {
        // Brute-force E|Z_{n1}|^2 - 2x/(n+1/2) at x = 2e4 for n = 5.
        let n = 5u32;
        let x = 20_000u64;
        let mut outer = Kahan::new();
        let mut cum = Kahan::new();
        let mut harmonic = Kahan::new();
        for l in 1..=x {
            let lf = l as f64;
            cum.add(lf.powf(n as f64 - 0.5));
            outer.add(lf.powf(-(n as f64) - 0.5) * cum.value());
            harmonic.add(1.0 / lf);
        }
        let direct = 2.0 * outer.value() - harmonic.value() - 2.0 * x as f64 / (n as f64 + 0.5);
        let kn = compute_kn(n).unwrap();
        assert!((kn - direct).abs() < 1e-2, "kn={kn} direct={direct}");
    }

    #[test]
    fn kn_doubling_approaches_log_two() {
        let k1 = compute_kn(10_000).unwrap();
        let k2 = compute_kn(20_000).unwrap();
        assert!((k2 - k1 - std::f64::consts::LN_2).abs() < 0.02);
    }

    #[test]
    fn kn_minus_log_n_near_constant() {
        let c = constant_c().unwrap();
        let n = 1000u32;
        let gap = compute_kn(n).unwrap() - (n as f64).ln() - c.kn_constant;
        assert!(gap.abs() < 0.05, "gap = {gap}");
    }
}
