//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use spe::mixture::{MixtureLayout, MixtureParams};
use spe::{FamilyTag, ScoreDistribution};

pub fn dist(family: FamilyTag, params: &[f64]) -> ScoreDistribution {
    ScoreDistribution::new(family, params.to_vec()).unwrap()
}

/// The synthetic detector used throughout: rare positives scored high.
pub fn reference_theta() -> MixtureParams {
    MixtureParams::new(
        0.1,
        dist(FamilyTag::Gamma, &[2.0, 0.05]),
        dist(FamilyTag::TruncatedNormal, &[0.7, 0.1]),
    )
    .unwrap()
}

pub fn reference_layout() -> MixtureLayout {
    MixtureLayout::new(FamilyTag::Gamma, FamilyTag::TruncatedNormal)
}

/// One well-behaved parameter set per family.
pub fn family_examples() -> Vec<ScoreDistribution> {
    vec![
        dist(FamilyTag::TruncatedNormal, &[0.7, 0.1]),
        dist(FamilyTag::TruncatedNormal, &[0.05, 0.3]),
        dist(FamilyTag::Gamma, &[2.0, 0.05]),
        dist(FamilyTag::Gamma, &[3.5, 0.2]),
        dist(FamilyTag::LogNormal, &[-1.0, 0.5]),
        dist(FamilyTag::GumbelLeft, &[0.6, 0.1]),
        dist(FamilyTag::GumbelRight, &[0.3, 0.1]),
        dist(FamilyTag::TruncatedStudentT, &[0.5, 0.2, 4.0]),
        dist(FamilyTag::Gompertz, &[0.5, 0.3]),
        dist(FamilyTag::FrechetRight, &[3.0, 0.4]),
    ]
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(&f, a, b, tol, 40)
}

/// `integral_0^inf f(x) dx` via `x = t / (1 - t)`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let x = t / (1.0 - t);
            let v = f(x) / ((1.0 - t) * (1.0 - t));
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
