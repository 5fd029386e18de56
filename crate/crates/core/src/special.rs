//! Principal branch of the Lambert W function for real and complex
//! arguments.
//!
//! Halley iteration on `w e^w - z` from one of three seeds: the branch-point
//! series near `-1/e`, the `log z - log log z` asymptotic form for large
//! `|z|` (also used for `Re z < -1/2`), and a [3/3] Padé fit of `W(z)/z`
//! about zero otherwise.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use thiserror::Error;

/// `1/e` as an unevaluated double-double sum `HI + LO`.
const INV_E_HI: f64 = 0.367_879_441_171_442_33;
const INV_E_LO: f64 = -1.242_875_367_278_836_3e-17;

const MAX_ITERATIONS: usize = 50;
const STEP_TOL: f64 = 1e-15;

const BRANCH_RADIUS: f64 = 0.3;
const ASYMPTOTIC_RADIUS: f64 = 3.0;
const ASYMPTOTIC_RE_BELOW: f64 = -0.5;

// [3/3] Padé approximant of W(z)/z = 1 - z + 3/2 z^2 - 8/3 z^3 + ...
const PADE_NUM: [f64; 4] = [1.0, 3.278_947_368_421_010_6, 2.459_999_999_999_917_4, 0.169_035_087_719_286_33];
const PADE_DEN: [f64; 4] = [1.0, 4.278_947_368_421_011, 5.238_947_368_420_928, 1.656_228_070_175_365_3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W0Result {
    pub value: Complex64,
    pub iterations: usize,
    /// `|w e^w - z|`, or `|w + log w - log z|` for results computed from
    /// the logarithm of the argument.
    pub residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LambertError {
    #[error("real argument {0} is below the branch point -1/e")]
    BelowBranchPoint(f64),
    #[error("argument {0} is not finite")]
    NotFinite(Complex64),
    #[error("Halley iteration for W0({z}) did not converge in {iterations} steps (last iterate {last})")]
    NoConvergence { z: Complex64, iterations: usize, last: Complex64 },
}

/// Accurate `z + 1/e`.
fn offset_from_branch_point(z: Complex64) -> Complex64 {
    Complex64::new((z.re + INV_E_HI) + INV_E_LO, z.im)
}

fn branch_series(p: Complex64) -> Complex64 {
    // W = -1 + p - p^2/3 + 11/72 p^3 - 43/540 p^4 + 769/17280 p^5, p = sqrt(2(ez + 1))
    let coeffs = [-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0];
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * p + c)
}

fn asymptotic(log_z: Complex64) -> Complex64 {
    let l2 = log_z.ln();
    log_z - l2 + l2 / log_z
}

fn pade(z: Complex64) -> Complex64 {
    let eval = |c: &[f64; 4]| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k);
    z * eval(&PADE_NUM) / eval(&PADE_DEN)
}

/// Initial guess inside the principal branch's basin of attraction.
pub fn lambert_w0_seed(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return z;
    }
    let q = offset_from_branch_point(z);
    if q.norm() < BRANCH_RADIUS {
        let p = (2.0 * E * q).sqrt();
        return branch_series(p);
    }
    if z.norm() > ASYMPTOTIC_RADIUS || z.re < ASYMPTOTIC_RE_BELOW {
        return asymptotic(z.ln());
    }
    pade(z)
}

fn converged(step: f64, w: f64) -> bool {
    step <= STEP_TOL * (1.0 + w)
}

/// Principal branch `W0(z)`.
///
/// Real arguments (zero imaginary part) take a real-arithmetic path and
/// return a value with exactly zero imaginary part.
pub fn lambert_w0(z: Complex64) -> Result<W0Result, LambertError> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(LambertError::NotFinite(z));
    }
    if z.im == 0.0 {
        return lambert_w0_real(z.re).map(|r| W0Result { value: Complex64::new(r.value.re, 0.0), ..r });
    }
    let mut w = lambert_w0_seed(z);
    for it in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let wew = w * ew;
        let f = wew - z;
        // stop once the residual is at the rounding level of its own evaluation
        if f.norm() <= 2.0 * f64::EPSILON * (z.norm() + wew.norm()) {
            return Ok(W0Result { value: w, iterations: it, residual: f.norm() });
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if converged(step.norm(), w.norm()) {
            let residual = (w * w.exp() - z).norm();
            return Ok(W0Result { value: w, iterations: it + 1, residual });
        }
    }
    Err(LambertError::NoConvergence { z, iterations: MAX_ITERATIONS, last: w })
}

/// Real principal branch for `x >= -1/e`.
///
/// Arguments within rounding of `-1/e` (including `fl(-1/e)`, which lies just
/// below the true branch point) return exactly `-1`.
pub fn lambert_w0_real(x: f64) -> Result<W0Result, LambertError> {
    if !x.is_finite() {
        return Err(LambertError::NotFinite(Complex64::new(x, 0.0)));
    }
    if x == 0.0 {
        return Ok(W0Result { value: Complex64::new(0.0, 0.0), iterations: 0, residual: 0.0 });
    }
    let q = (x + INV_E_HI) + INV_E_LO;
    if q <= 0.0 {
        // fl(-1/e) sits 1.24e-17 below -1/e; anything further is rejected
        if q >= -2.0 * f64::EPSILON * INV_E_HI {
            let residual = (-INV_E_HI - x).abs();
            return Ok(W0Result { value: Complex64::new(-1.0, 0.0), iterations: 0, residual });
        }
        return Err(LambertError::BelowBranchPoint(x));
    }
    let mut w = if q < BRANCH_RADIUS {
        branch_series(Complex64::new((2.0 * E * q).sqrt(), 0.0)).re
    } else if x > ASYMPTOTIC_RADIUS {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    } else {
        pade(Complex64::new(x, 0.0)).re
    };
    for it in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let wew = w * ew;
        let f = wew - x;
        if f.abs() <= 2.0 * f64::EPSILON * (x.abs() + wew.abs()) {
            return Ok(W0Result { value: Complex64::new(w, 0.0), iterations: it, residual: f.abs() });
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if converged(step.abs(), w.abs()) {
            let residual = (w * w.exp() - x).abs();
            return Ok(W0Result { value: Complex64::new(w, 0.0), iterations: it + 1, residual });
        }
    }
    Err(LambertError::NoConvergence {
        z: Complex64::new(x, 0.0),
        iterations: MAX_ITERATIONS,
        last: Complex64::new(w, 0.0),
    })
}

/// `W0(exp(log_z))` for arguments whose modulus overflows.
///
/// Solves `w + log w = log_z` by Newton's method; `Im(log_z)` is first
/// wrapped into `(-pi, pi]` so the principal branch is selected.
pub fn lambert_w0_from_log(log_z: Complex64) -> Result<W0Result, LambertError> {
    if !(log_z.re.is_finite() && log_z.im.is_finite()) {
        return Err(LambertError::NotFinite(log_z));
    }
    let mut target = log_z;
    target.im = wrap_phase(target.im);
    if target.re < 2.0 {
        // the argument is representable; use the direct route
        return lambert_w0(target.exp());
    }
    let mut w = asymptotic(target);
    for it in 0..MAX_ITERATIONS {
        let g = w + w.ln() - target;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if converged(step.norm(), w.norm()) {
            let residual = (w + w.ln() - target).norm();
            return Ok(W0Result { value: w, iterations: it + 1, residual });
        }
    }
    Err(LambertError::NoConvergence { z: log_z, iterations: MAX_ITERATIONS, last: w })
}

fn wrap_phase(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut t = theta.rem_euclid(two_pi);
    if t > PI {
        t -= two_pi;
    }
    t
}

/// Whether `w` lies in the range of the principal branch: `|Im w| < pi` and
/// to the right of the curve `-eta cot(eta) + i eta`.
pub fn in_principal_range(w: Complex64) -> bool {
    let eta = w.im;
    if eta.abs() >= PI {
        return false;
    }
    if eta == 0.0 {
        return w.re >= -1.0;
    }
    w.re > -eta / eta.tan()
}
