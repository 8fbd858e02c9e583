//! Closed-form, asymptotic, and limiting second-order quantities of the
//! truncated system Z_n(x) = Z_{n1} - Z_{n2}.
//!
//! Conventions, with w = 1 - sigma throughout:
//!
//! * `cross_n2m2`  — E Z_{n2} conj(Z_{m2}), closed form A + B x^{-n+w} +
//!   C x^{-(m-n)+2w}; singular exactly when m - n = 2w.
//! * `cross_n1m2`  — E Z_{n1} conj(Z_{m2}), a k-sum with three brackets.
//! * `cross_m1n2`  — E Z_{m1} conj(Z_{n2}), a two-bracket k-sum; its
//!   conjugate supplies the (n2, m1) block.
//! * `cross_n1m1`  — E Z_{n1} conj(Z_{m1}), the exact double sum evaluated
//!   through suffix sums in O(x).
//!
//! All power combinations that mix astronomically large and small factors
//! are assembled in log space before exponentiation.

pub mod kn;
pub mod phi;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::Kahan;
use crate::quad;
use crate::zeta::zeta_real;

pub use kn::{bk_dk_scaled, compute_kn};
pub use phi::{constant_c, phi_funcs, ConstantCBreakdown, EULER_CONST};

/// Indices and truncation identifying one second-order quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub n: u32,
    pub m: u32,
    pub sigma: f64,
    pub x: f64,
}

impl MomentQuery {
    pub fn new(n: u32, m: u32, sigma: f64, x: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if m < n {
            return Err(Error::Domain(format!("m >= n required, got n={n}, m={m}")));
        }
        if !(0.5..1.0).contains(&sigma) {
            return Err(Error::Domain(format!(
                "sigma must lie in [1/2, 1), got {sigma}"
            )));
        }
        if !(x >= 1.0) || !x.is_finite() {
            return Err(Error::Domain(format!("x >= 1 required, got {x}")));
        }
        Ok(Self { n, m, sigma, x })
    }

    pub fn diagonal(n: u32, sigma: f64, x: f64) -> Result<Self> {
        Self::new(n, n, sigma, x)
    }

    fn w(&self) -> f64 {
        1.0 - self.sigma
    }
}

/// Prediction interval induced by an unknown theta in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaInterval {
    pub fn new(a: f64, b: f64) -> Self {
        if a <= b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn widened(&self, margin: f64) -> Self {
        Self {
            lo: self.lo - margin,
            hi: self.hi + margin,
        }
    }
}

/// The four covariance blocks of E Z_n conj(Z_m) and their combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondMomentSet {
    pub c11: Complex64,
    pub c12: Complex64,
    pub c21: Complex64,
    pub c22: Complex64,
    pub combined: Complex64,
    /// Whether c22 came from the quadrature fallback route.
    pub c22_by_quadrature: bool,
}

/// E Z_n(x): sum_{k<=x} k^{-(sigma+n)} - 2n/(n^2 - w^2) + x^{w-n}/(n-w).
pub fn mean_zn(q: &MomentQuery) -> f64 {
    let n = q.n as f64;
    let w = q.w();
    let mut sum = Kahan::new();
    let k_max = q.x.floor() as u64;
    for k in 1..=k_max {
        sum.add((k as f64).powf(-(q.sigma + n)));
    }
    sum.value() - 2.0 * n / (n * n - w * w) + ((w - n) * q.x.ln()).exp() / (n - w)
}

fn singular_cross(q: &MomentQuery) -> bool {
    let gap = (q.m - q.n) as f64;
    (gap - 2.0 * q.w()).abs() < 1e-9
}

/// Closed form for E Z_{n2} conj(Z_{m2}), valid unless m - n = 2(1 - sigma)
/// (at sigma = 1/2 exactly the m = n + 1 band).
pub fn cross_n2m2(q: &MomentQuery) -> Result<f64> {
    if singular_cross(q) {
        return Err(Error::SingularCross {
            n: q.n,
            m: q.m,
            sigma: q.sigma,
        });
    }
    let n = q.n as f64;
    let gap = (q.m - q.n) as f64;
    let w = q.w();
    let a = 4.0 * n * gap / ((gap * gap - 4.0 * w * w) * (n * n - w * w));
    let b = 2.0 * gap / ((2.0 * n - q.m as f64 + w) * (q.m as f64 + w) * (n - w));
    let c = (3.0 * n - q.m as f64 + 2.0 * w)
        / ((2.0 * n - q.m as f64 + w) * (2.0 * w - gap) * (n + w));
    let lx = q.x.ln();
    Ok(a + b * ((w - n) * lx).exp() + c * ((2.0 * w - gap) * lx).exp())
}

/// The diagonal specialization x^{2w} / (w (n + w)) of the closed form.
pub fn diag_n2(n: u32, sigma: f64, x: f64) -> f64 {
    let w = 1.0 - sigma;
    (2.0 * w * x.ln()).exp() / (w * (n as f64 + w))
}

/// Quadrature route for E Z_{n2} conj(Z_{m2}):
///
/// x^{2w} * int_0^1 int_0^1 u^-sigma v^-sigma
///     e^{-|log(xv)|(m-n) - |log(v/u)| n} du dv,
///
/// by nested adaptive quadrature split along the kinks u = v and v = 1/x.
/// Covers the singular band excluded from the closed form.
pub fn cross_n2m2_quadrature(q: &MomentQuery) -> Result<f64> {
    let n = q.n as f64;
    let gap = (q.m - q.n) as f64;
    let sigma = q.sigma;
    let x = q.x;
    let scale = (2.0 * q.w() * x.ln()).exp();

    let inner_fail = std::cell::Cell::new(false);
    let inner = |v: f64| -> f64 {
        // int_0^1 u^-sigma e^{-n |log(v/u)|} du, kink at u = v
        let f = |u: f64| {
            let ratio = if u <= v { u / v } else { v / u };
            u.powf(-sigma) * (n * ratio.ln()).exp()
        };
        match quad::integrate_segments(f, &[0.0, v, 1.0], 1e-14) {
            Ok(r) => r.value,
            Err(_) => {
                inner_fail.set(true);
                0.0
            }
        }
    };
    let outer = |v: f64| -> f64 {
        let xv = x * v;
        let envelope = if xv <= 1.0 {
            (gap * xv.ln()).exp()
        } else {
            (-gap * xv.ln()).exp()
        };
        scale * v.powf(-sigma) * envelope * inner(v)
    };

    let split = (1.0 / x).min(1.0);
    let result = quad::integrate_segments(outer, &[0.0, split, 1.0], 1e-9)?;
    if inner_fail.get() {
        return Err(Error::NonConvergence {
            what: "inner quadrature of the covariance integral",
            achieved: f64::NAN,
            requested: 1e-14,
        });
    }
    Ok(result.value)
}

/// E Z_{n1} conj(Z_{m2}): the k-sum with three bracketed terms; the
/// k^{n-sigma} x^{-m+w} bracket is assembled in log space.
pub fn cross_n1m2(q: &MomentQuery) -> f64 {
    let n = q.n as f64;
    let m = q.m as f64;
    let gap = m - n;
    let w = q.w();
    let sigma = q.sigma;
    let lx = q.x.ln();
    let denom_mid = 2.0 * n - m + w;

    let mut sum = Kahan::new();
    let k_max = q.x.floor() as u64;
    for k in 1..=k_max {
        let lk = (k as f64).ln();
        let t1 = -2.0 * gap * (-(n + sigma) * lk).exp() / ((m + w) * denom_mid);
        let t2 = 2.0 * n * ((-gap + 1.0 - 2.0 * sigma) * lk).exp() / ((m - w) * denom_mid);
        let t3 = -((n - sigma) * lk + (w - m) * lx).exp() / (m - w);
        sum.add(t1 + t2 + t3);
    }
    sum.value()
}

/// E Z_{m1} conj(Z_{n2}): the two-bracket k-sum, log-space powers.
pub fn cross_m1n2(q: &MomentQuery) -> f64 {
    let n = q.n as f64;
    let m = q.m as f64;
    let gap = m - n;
    let w = q.w();
    let sigma = q.sigma;
    let lx = q.x.ln();

    let mut sum = Kahan::new();
    let k_max = q.x.floor() as u64;
    for k in 1..=k_max {
        let lk = (k as f64).ln();
        let t1 = 2.0 * n * ((-gap + 1.0 - 2.0 * sigma) * lk).exp() / (n * n - w * w);
        let t2 = -((2.0 * n - m - sigma) * lk + (w - n) * lx).exp() / (n - w);
        sum.add(t1 + t2);
    }
    sum.value()
}

const N1M1_COST_GUARD: f64 = 1e8;

/// E Z_{n1} conj(Z_{m1}): the exact double sum
/// sum_{k,l<=x} (kl)^{-sigma} (min/max)^n l^{-(m-n)},
/// evaluated through suffix sums in one descending O(x) pass.
pub fn cross_n1m1(q: &MomentQuery) -> Result<f64> {
    if q.x > N1M1_COST_GUARD {
        return Err(Error::CostGuard {
            x: q.x,
            max: N1M1_COST_GUARD,
        });
    }
    let n = q.n as f64;
    let m = q.m as f64;
    let sigma = q.sigma;
    let k_max = q.x.floor() as u64;

    // S1 = sum_k k^{n-sigma} T_m(k),  T_m(k) = sum_{l=k+1}^x l^{-m-sigma}
    // S2 = sum_k k^{2n-m-sigma} T_n(k), T_n(k) likewise with n
    // S0 = sum_k k^{-(m-n)-2 sigma}
    let mut s1 = Kahan::new();
    let mut s2 = Kahan::new();
    let mut s0 = Kahan::new();
    let mut tm = Kahan::new();
    let mut tn = Kahan::new();
    for k in (1..=k_max).rev() {
        let lk = (k as f64).ln();
        // suffix sums exclude l = k itself; at k = x they are empty (= 0,
        // whose log is -inf and exponentiates back to 0)
        s1.add(((n - sigma) * lk + tm.value().ln()).exp());
        s2.add(((2.0 * n - m - sigma) * lk + tn.value().ln()).exp());
        s0.add(((-(m - n) - 2.0 * sigma) * lk).exp());
        tm.add((-(m + sigma) * lk).exp());
        tn.add((-(n + sigma) * lk).exp());
    }
    Ok(s1.value() + s2.value() + s0.value())
}

/// Assemble the four blocks and their combination. The singular band of the
/// c22 closed form propagates as an error unless `quadrature_fallback`.
pub fn second_moment_with(q: &MomentQuery, quadrature_fallback: bool) -> Result<SecondMomentSet> {
    let c11 = cross_n1m1(q)?;
    let c12 = cross_n1m2(q);
    let c21 = cross_m1n2(q);
    let (c22, by_quad) = match cross_n2m2(q) {
        Ok(v) => (v, false),
        Err(Error::SingularCross { .. }) if quadrature_fallback => {
            (cross_n2m2_quadrature(q)?, true)
        }
        Err(e) => return Err(e),
    };
    let c11 = Complex64::new(c11, 0.0);
    let c12 = Complex64::new(c12, 0.0);
    let c21 = Complex64::new(c21, 0.0);
    let c22 = Complex64::new(c22, 0.0);
    Ok(SecondMomentSet {
        c11,
        c12,
        c21,
        c22,
        combined: c11 - c12 - c21 + c22,
        c22_by_quadrature: by_quad,
    })
}

/// Assemble the four blocks; errors on the singular c22 band.
pub fn second_moment(q: &MomentQuery) -> Result<SecondMomentSet> {
    second_moment_with(q, false)
}

/// A linear-in-x asymptote: slope * x + intercept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

/// x -> infinity limits of the four blocks at sigma = 1/2, plus the
/// x-linear diagonal asymptotes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymTerms {
    pub a22: f64,
    pub a12: f64,
    pub a21: f64,
    pub a11: ThetaInterval,
    pub d22_slope: f64,
    /// Diagonal cross asymptote 2x/(n+1/2) - 1/(2n-1); None for n <= 2.
    pub d12: Option<Affine>,
    /// Diagonal sum-part asymptote 2x/(n+1/2) + K_n; None for n <= 2.
    pub d11: Option<Affine>,
}

fn require_offdiag(n: u32, m: u32) -> Result<()> {
    if m <= n + 1 {
        return Err(Error::Domain(format!(
            "off-diagonal asymptotics require m > n + 1, got n={n}, m={m}"
        )));
    }
    Ok(())
}

/// Limit of E Z_{n2} conj(Z_{m2}) for m > n + 1 at sigma = 1/2.
pub fn asym_a22(n: u32, m: u32) -> Result<f64> {
    require_offdiag(n, m)?;
    let nf = n as f64;
    let gap = (m - n) as f64;
    Ok(4.0 * nf * gap / ((gap * gap - 1.0) * (nf * nf - 0.25)))
}

/// Limit of E Z_{n1} conj(Z_{m2}) for m > n + 1 at sigma = 1/2.
pub fn asym_a12(n: u32, m: u32) -> Result<f64> {
    require_offdiag(n, m)?;
    let nf = n as f64;
    let mf = m as f64;
    let gap = mf - nf;
    let mid = 2.0 * nf - mf + 0.5;
    Ok(-2.0 * gap * zeta_real(nf + 0.5)? / ((mf + 0.5) * mid)
        + 2.0 * nf * zeta_real(gap)? / ((mf - 0.5) * mid))
}

/// Limit of E Z_{m1} conj(Z_{n2}) for m > n + 1 at sigma = 1/2.
pub fn asym_a21(n: u32, m: u32) -> Result<f64> {
    require_offdiag(n, m)?;
    let nf = n as f64;
    Ok(2.0 * nf * zeta_real((m - n) as f64)? / (nf * nf - 0.25))
}

/// Limit interval of E Z_{n1} conj(Z_{m1}) for m > n + 1 at sigma = 1/2:
/// zeta(m-n+1) + theta (1/(m-1/2) + 1/(n-1/2)) zeta(m-n), theta in [0,1].
pub fn asym_a11(n: u32, m: u32) -> Result<ThetaInterval> {
    require_offdiag(n, m)?;
    let nf = n as f64;
    let mf = m as f64;
    let base = zeta_real((m - n) as f64 + 1.0)?;
    let span = (1.0 / (mf - 0.5) + 1.0 / (nf - 0.5)) * zeta_real((m - n) as f64)?;
    Ok(ThetaInterval::new(base, base + span))
}

/// Exact x-slope 2/(n+1/2) of the diagonal correction second moment.
pub fn diag_d22_slope(n: u32) -> f64 {
    2.0 / (n as f64 + 0.5)
}

/// Diagonal cross asymptote 2x/(n+1/2) - 1/(2n-1); requires n > 2.
pub fn diag_d12(n: u32) -> Result<Affine> {
    if n <= 2 {
        return Err(Error::Domain(format!(
            "diagonal cross asymptote requires n > 2, got {n}"
        )));
    }
    Ok(Affine {
        slope: 2.0 / (n as f64 + 0.5),
        intercept: -1.0 / (2.0 * n as f64 - 1.0),
    })
}

/// Diagonal sum-part asymptote 2x/(n+1/2) + K_n; requires n >= 3.
pub fn diag_d11(n: u32) -> Result<Affine> {
    Ok(Affine {
        slope: 2.0 / (n as f64 + 0.5),
        intercept: compute_kn(n)?,
    })
}

/// All asymptotic entries for an (n, m) pair with m > n + 1; the diagonal
/// affine pairs are None when n <= 2 (their derivations assume n > 2).
pub fn asym_terms(n: u32, m: u32) -> Result<AsymTerms> {
    require_offdiag(n, m)?;
    Ok(AsymTerms {
        a22: asym_a22(n, m)?,
        a12: asym_a12(n, m)?,
        a21: asym_a21(n, m)?,
        a11: asym_a11(n, m)?,
        d22_slope: diag_d22_slope(n),
        d12: diag_d12(n).ok(),
        d11: if n >= 3 { Some(diag_d11(n)?) } else { None },
    })
}

/// E zeta(1/2 + i S_n) in the x -> infinity limit:
/// zeta(n + 1/2) - 8n/(4n^2 - 1).
pub fn mean_zeta(n: u32) -> f64 {
    let nf = n as f64;
    zeta_real(nf + 0.5).expect("n + 1/2 > 1") - 8.0 * nf / (4.0 * nf * nf - 1.0)
}

/// Variance of the sampled zeta values:
/// K_n + 1/(n - 1/2) - (E zeta_n)^2; requires n >= 3 for K_n.
pub fn variance_zeta(n: u32) -> Result<f64> {
    let kn = compute_kn(n)?;
    let mean = mean_zeta(n);
    Ok(kn + 1.0 / (n as f64 - 0.5) - mean * mean)
}

/// Covariance bound c0 * max(1/n, 2^{-(m-n)}) for m > n + 1.
pub fn cov_bound(n: u32, m: u32, c0: f64) -> Result<f64> {
    require_offdiag(n, m)?;
    if !(c0 > 0.0) {
        return Err(Error::Domain("c0 must be positive".into()));
    }
    Ok(c0 * (1.0 / n as f64).max(2f64.powi(-((m - n) as i32))))
}

/// Predicted covariance interval for the centered zeta samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedCov {
    pub interval: ThetaInterval,
    /// The smallest c0 for which both endpoints fit under the covariance
    /// bound max(1/n, 2^{-(m-n)}).
    pub c0_required: f64,
}

/// Limit covariance interval: (block limits combined over theta in {0, 1})
/// minus the product of the limiting means.
pub fn predicted_cov_interval(n: u32, m: u32) -> Result<PredictedCov> {
    require_offdiag(n, m)?;
    let a11 = asym_a11(n, m)?;
    let rest = -asym_a12(n, m)? - asym_a21(n, m)? + asym_a22(n, m)?;
    let mean_product = mean_zeta(n) * mean_zeta(m);
    let interval = ThetaInterval::new(
        a11.lo + rest - mean_product,
        a11.hi + rest - mean_product,
    );
    let shape = (1.0 / n as f64).max(2f64.powi(-((m - n) as i32)));
    let c0_required = interval.lo.abs().max(interval.hi.abs()) / shape;
    Ok(PredictedCov {
        interval,
        c0_required,
    })
}
