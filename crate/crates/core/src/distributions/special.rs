use statrs::function::beta::beta_reg;
use libm::erfc;

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln P(Z > z)` for a standard normal `Z`, accurate in both tails.
pub(crate) fn ln_norm_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < -1.0 {
        (-0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln_1p()
    } else if z < 35.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills ratio asymptotic series.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + series.ln()
    }
}

/// `ln P(T > t)` for a standard Student's t with `nu` degrees of freedom.
pub(crate) fn ln_student_t_sf(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = nu / (nu + t * t);
    let tail = if x >= 1.0 { 0.5 } else { 0.5 * beta_reg(0.5 * nu, 0.5, x) };
    if t >= 0.0 {
        tail.ln()
    } else {
        (-tail).ln_1p()
    }
}
