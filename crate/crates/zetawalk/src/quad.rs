//! Adaptive Gauss–Kronrod quadrature (7-point Gauss, 15-point Kronrod).
//!
//! Panels are bisected until the QUADPACK-style error estimate meets the
//! requested absolute tolerance. Callers split domains at known kinks of
//! their integrands before integrating.

use crate::error::{Error, Result};
use crate::kahan::Kahan;

// 15-point Kronrod abscissae on [-1, 1]; even indices interleave the
// embedded 7-point Gauss nodes (odd indices of XGK plus the center).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_97,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

const MAX_DEPTH: u32 = 60;
const MAX_EVALS: usize = 4_000_000;

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evals: usize,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One G7K15 panel: returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let y1 = f(center - dx);
        let y2 = f(center + dx);
        fv1[j] = y1;
        fv2[j] = y2;
        res_kronrod += WGK[j] * (y1 + y2);
        res_abs += WGK[j] * (y1.abs() + y2.abs());
    }
    let mut res_gauss = f_center * WG[3];
    for j in 0..3 {
        let idx = 2 * j + 1;
        res_gauss += WG[j] * (fv1[idx] + fv2[idx]);
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = rescale_error((res_kronrod - res_gauss) * half, res_abs * half.abs(), res_asc * half.abs());
    (res_kronrod * half, err)
}

struct Adapt<'a, F> {
    f: &'a F,
    evals: usize,
    acc: Kahan,
    err_acc: f64,
}

impl<F: Fn(f64) -> f64> Adapt<'_, F> {
    fn descend(&mut self, a: f64, b: f64, tol: f64, depth: u32) -> Result<()> {
        self.evals += 15;
        if self.evals > MAX_EVALS {
            return Err(Error::NonConvergence {
                what: "adaptive quadrature (evaluation budget)",
                achieved: f64::INFINITY,
                requested: tol,
            });
        }
        let (value, err) = gk15(self.f, a, b);
        if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (a.abs() + b.abs() + 1.0) {
            if err > tol && depth >= MAX_DEPTH {
                return Err(Error::NonConvergence {
                    what: "adaptive quadrature (depth limit)",
                    achieved: err,
                    requested: tol,
                });
            }
            self.acc.add(value);
            self.err_acc += err;
            return Ok(());
        }
        let mid = 0.5 * (a + b);
        self.descend(a, mid, 0.5 * tol, depth + 1)?;
        self.descend(mid, b, 0.5 * tol, depth + 1)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadResult> {
    integrate_segments(f, &[a, b], abs_tol)
}

/// Integrate `f` over the union of segments given by consecutive
/// breakpoints, splitting the tolerance evenly across segments. Breakpoints
/// let callers isolate kinks so each panel sees a smooth integrand.
pub fn integrate_segments<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
) -> Result<QuadResult> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArg("need at least two breakpoints".into()));
    }
    if !breakpoints.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArg("breakpoints must be ascending".into()));
    }
    let nseg = breakpoints.len() - 1;
    let mut state = Adapt {
        f: &f,
        evals: 0,
        acc: Kahan::new(),
        err_acc: 0.0,
    };
    let seg_tol = abs_tol / nseg as f64;
    for w in breakpoints.windows(2) {
        if w[0] < w[1] {
            state.descend(w[0], w[1], seg_tol, 0)?;
        }
    }
    Ok(QuadResult {
        value: state.acc.value(),
        abs_error: state.err_acc,
        evals: state.evals,
    })
}
