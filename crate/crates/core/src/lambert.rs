//! Principal branch of the Lambert W function for real arguments.

use std::f64::consts::E;

use crate::error::{invalid, Result};

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITERATIONS: usize = 64;

/// Principal-branch Lambert W: the `w >= -1` solving `w * exp(w) = x`.
///
/// Uses a branch-point series, `ln(1 + x)` or the asymptotic `ln x - ln ln x`
/// as the starting point, then Halley iteration.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return invalid("lambert_w0 of NaN");
    }
    if x < BRANCH_POINT {
        // Admit arguments that miss the branch point by rounding only.
        if BRANCH_POINT - x <= 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return invalid(format!("lambert_w0 requires x >= -1/e, got {x}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l = x.ln();
        l - l.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: f64) -> f64 {
        let w = lambert_w0(x).unwrap();
        (w * w.exp() - x).abs() / x.abs()
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w0(BRANCH_POINT).unwrap(), -1.0);
    }

    #[test]
    fn back_substitution_at_negative_argument() {
        let w = lambert_w0(-0.05).unwrap();
        assert!(w > -1.0 && w < 0.0);
        assert!(residual(-0.05) <= 1e-12);
    }

    #[test]
    fn rejects_below_branch_point() {
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn near_branch_point() {
        for k in 1..40 {
            let x = BRANCH_POINT + 10f64.powi(-k / 3) * 0.5;
            assert!(residual(x) <= 1e-12, "x={x}");
            assert!(lambert_w0(x).unwrap() >= -1.0);
        }
    }

    #[test]
    fn large_arguments() {
        for &x in &[10.0, 1e3, 1e10, 1e100, 1e300] {
            assert!(residual(x) <= 1e-12, "x={x}");
        }
    }
}
