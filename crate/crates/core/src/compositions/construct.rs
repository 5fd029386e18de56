//! Lie-Trotter, Strang, and complex triple-jump compositions.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{concat_stages, Scheme, SchemeError, Stage};

pub fn lie_trotter() -> Scheme {
    Scheme::new("lie-trotter", 1, vec![Stage::real(1.0, 1.0)])
}

/// Symmetric Strang splitting `A/2, B, A/2`, stored flattened as
/// `[(1/2, 1), (1/2, 0)]`.
pub fn strang() -> Scheme {
    Scheme::new("strang", 2, vec![Stage::real(0.5, 1.0), Stage::real(0.5, 0.0)])
}

/// Root `omega_k = 2^(1/(p+1)) exp(i pi (2k+1)/(p+1))` of `omega^(p+1) = -2`.
pub fn triple_jump_root(order: u32, root_index: usize) -> Result<Complex64, SchemeError> {
    if !order.is_multiple_of(2) || order == 0 {
        return Err(SchemeError::OddBaseOrder(order));
    }
    let count = order as usize + 1;
    if root_index >= count {
        return Err(SchemeError::RootIndex { index: root_index, order, count });
    }
    let q = (order + 1) as f64;
    let phase = PI * (2 * root_index + 1) as f64 / q;
    Ok(Complex64::from_polar(2f64.powf(1.0 / q), phase))
}

/// Outer and inner weights `(gamma_1, gamma_2)` of the triple jump that
/// raises an order-`order` symmetric method to `order + 2`.
///
/// They satisfy `2 gamma_1 + gamma_2 = 1` and
/// `2 gamma_1^(p+1) + gamma_2^(p+1) = 0`.
pub fn triple_jump_coefficients(order: u32, root_index: usize) -> Result<(Complex64, Complex64), SchemeError> {
    let omega = triple_jump_root(order, root_index)?;
    let root_real = omega.im.abs() < 1e-15 * omega.norm();
    if root_real {
        // real branch: omega = -2^(1/(p+1)); keep the arithmetic real
        let w = -(2f64.powf(1.0 / (order + 1) as f64));
        let g1 = 1.0 / (2.0 + w);
        return Ok((Complex64::new(g1, 0.0), Complex64::new(w * g1, 0.0)));
    }
    let g1 = 1.0 / (2.0 + omega);
    Ok((g1, omega * g1))
}

/// Three-fold composition `base(gamma_1) base(gamma_2) base(gamma_1)` with
/// adjacent half-steps merged.
pub fn triple_jump(base: &Scheme, root_index: usize) -> Result<Scheme, SchemeError> {
    let p = base.nominal_order;
    let (g1, g2) = triple_jump_coefficients(p, root_index)?;
    let mut stages = base.scaled(g1);
    concat_stages(&mut stages, &base.scaled(g2));
    concat_stages(&mut stages, &base.scaled(g1));
    let scheme = Scheme::new(format!("{}-tj{}", base.name, root_index), p + 2, stages);
    scheme.check_admissible()?;
    Ok(scheme)
}

fn compose_sequence(roots: &[usize]) -> Result<Scheme, SchemeError> {
    let mut scheme = strang();
    for &k in roots {
        let p = scheme.nominal_order;
        let (g1, g2) = triple_jump_coefficients(p, k)?;
        let mut stages = scheme.scaled(g1);
        concat_stages(&mut stages, &scheme.scaled(g2));
        concat_stages(&mut stages, &scheme.scaled(g1));
        scheme = Scheme::new("", p + 2, stages);
    }
    Ok(scheme)
}

/// Order-2 Strang raised to `order` by recursive complex triple jumps.
///
/// Every root sequence is tried; among those whose flattened coefficients
/// all have non-negative real part, the one minimizing the largest `|arg|`
/// wins, ties going to the lexicographically smallest root indices.
pub fn build_order(order: u32) -> Result<Scheme, SchemeError> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(SchemeError::UnsupportedOrder(order));
    }
    if order == 2 {
        return Ok(strang());
    }
    let levels: Vec<usize> = (2..order).step_by(2).map(|p| p as usize + 1).collect();
    let mut best: Option<(f64, Vec<usize>, Scheme)> = None;
    let mut roots = vec![0usize; levels.len()];
    loop {
        let scheme = compose_sequence(&roots)?;
        if scheme.check_admissible().is_ok() {
            let score = scheme.max_abs_arg();
            // strict improvement keeps the lexicographically first sequence on ties
            if best.as_ref().is_none_or(|(s, _, _)| score < *s - 1e-15) {
                best = Some((score, roots.clone(), scheme));
            }
        }
        // odometer over the root indices, last level fastest
        let mut level = levels.len();
        loop {
            if level == 0 {
                let (_, roots, mut scheme) = best.ok_or(SchemeError::NoAdmissibleRoots(order))?;
                let tag: Vec<String> = roots.iter().map(|k| k.to_string()).collect();
                scheme.name = format!("order{order}-tj[{}]", tag.join(","));
                return Ok(scheme);
            }
            level -= 1;
            roots[level] += 1;
            if roots[level] < levels[level] {
                break;
            }
            roots[level] = 0;
        }
    }
}
