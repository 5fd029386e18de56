//! Leading local error of Strang splitting for `u_t = D u_xx + f(x) u`.
//!
//! [`strang_error_terms`] evaluates the six individual terms of the
//! third-order error as sup-norms. [`strang_one_step_defect`] checks the
//! expansion against a dense matrix exponential of the discretised operator.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::compositions::{step, strang, OperatorOrdering, StepError};
use crate::spectral::{spectral_derivative, Field, Grid, SpectralError};
use crate::subflows::{HeatFlow, PotentialFlow};

/// Largest grid accepted by the dense oracle.
pub const DENSE_ORACLE_MAX_N: usize = 256;

#[derive(Debug, Error)]
pub enum ErrorAnalysisError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("dense oracle refuses n = {0} (limit {DENSE_ORACLE_MAX_N})")]
    TooLarge(usize),
    #[error("u must be real-valued (max |Im u| = {0:e})")]
    NotReal(f64),
    #[error("matrix exponential: singular Pade denominator")]
    Singular,
    #[error("table csv: {0}")]
    Csv(String),
}

/// The six terms, in table order. `f` is the potential.
pub const TERM_LABELS: [&str; 6] = [
    "D f [f u]_xx",
    "D^2 f u_xxxx / 2",
    "D f^2 u_xx / 2",
    "D [f^2 u]_xx / 2",
    "D^2 [f u]_xxxx / 2",
    "D^2 [f u_xx]_xx",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTermReport {
    pub term_label: &'static str,
    /// Discrete sup-norm.
    pub magnitude: f64,
    pub d: f64,
}

/// Sup-norms of the six error terms for diffusivity `d`.
pub fn strang_error_terms(u: &Field, d: f64, potential: &Field) -> Result<Vec<ErrorTermReport>, ErrorAnalysisError> {
    let imag = u.max_imag();
    if imag > 0.0 {
        return Err(ErrorAnalysisError::NotReal(imag));
    }
    let f = potential;
    let dxx = |g: &Field| spectral_derivative(g, 2);
    let d4 = |g: &Field| spectral_derivative(g, 4);
    let fu = f.mul(u)?;
    let ff = f.mul(f)?;
    let u_xx = dxx(u)?;
    let terms = [
        f.mul(&dxx(&fu)?)?.scaled(d.into()),
        f.mul(&d4(u)?)?.scaled((0.5 * d * d).into()),
        ff.mul(&u_xx)?.scaled((0.5 * d).into()),
        dxx(&ff.mul(u)?)?.scaled((0.5 * d).into()),
        d4(&fu)?.scaled((0.5 * d * d).into()),
        dxx(&f.mul(&u_xx)?)?.scaled((d * d).into()),
    ];
    Ok(TERM_LABELS
        .iter()
        .zip(terms)
        .map(|(&term_label, t)| ErrorTermReport { term_label, magnitude: t.norm_inf(), d })
        .collect())
}

/// CSV with one row per term and one magnitude column per diffusivity.
pub fn table1_csv(columns: &[Vec<ErrorTermReport>]) -> String {
    let mut out = String::from("term");
    for col in columns {
        out.push_str(&format!(",D={}", col.first().map_or(f64::NAN, |r| r.d)));
    }
    out.push('\n');
    for (i, label) in TERM_LABELS.iter().enumerate() {
        out.push_str(label);
        for col in columns {
            out.push_str(&format!(",{:e}", col[i].magnitude));
        }
        out.push('\n');
    }
    out
}

/// Reads [`table1_csv`] output back as `(diffusivities, rows)`.
pub fn parse_table1_csv(text: &str) -> Result<(Vec<f64>, Vec<(String, Vec<f64>)>), ErrorAnalysisError> {
    let bad = |m: String| ErrorAnalysisError::Csv(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("term") {
        return Err(bad("header must start with 'term'".into()));
    }
    let ds = cols
        .map(|c| c.strip_prefix("D=").and_then(|v| v.parse().ok()).ok_or_else(|| bad(format!("bad column '{c}'"))))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default().to_string();
        let vals = fields
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<f64>, _>>()?;
        if vals.len() != ds.len() {
            return Err(bad(format!("row {} has {} values, expected {}", i + 1, vals.len(), ds.len())));
        }
        rows.push((label, vals));
    }
    Ok((ds, rows))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneStepDefect {
    /// `|| Strang(dt) u - exp(dt (A + B)) u ||_inf`.
    pub defect_norm: f64,
    /// `dt^3 || E3 u ||_inf` with `E3` the exact third-order coefficient.
    pub predicted_leading: f64,
}

/// Dense matrix of `u -> D u_xx` on the grid.
fn diffusion_matrix(grid: &Arc<Grid>, d: f64) -> Result<DMatrix<f64>, SpectralError> {
    let n = grid.n();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = Field::zeros(grid.clone());
        e.values_mut()[j] = Complex64::new(1.0, 0.0);
        let col = spectral_derivative(&e, 2)?;
        for (i, c) in col.values().iter().enumerate() {
            m[(i, j)] = d * c.re;
        }
    }
    Ok(m)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, ErrorAnalysisError> {
    let n = a.nrows();
    let norm1 = a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let mut r = (&v - &u).lu().solve(&(&v + &u)).ok_or(ErrorAnalysisError::Singular)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Coefficients of the `dt^3` term of `exp(X/2) exp(Y) exp(X/2) - exp(X + Y)`
/// as words over `{X, Y}`, leftmost letter applied last.
fn strang_third_order_words() -> Vec<(f64, [bool; 3])> {
    // true = outer operator X, false = inner Y
    let fact = [1.0, 1.0, 2.0, 6.0];
    let mut coeff = [-1.0 / 6.0; 8];
    for i in 0..=3usize {
        for j in 0..=3 - i {
            let k = 3 - i - j;
            let mut bits = 0usize;
            for pos in 0..3 {
                let outer = pos < i || pos >= i + j;
                bits = bits << 1 | outer as usize;
            }
            coeff[bits] += 0.5f64.powi((i + k) as i32) / (fact[i] * fact[j] * fact[k]);
        }
    }
    (0..8)
        .filter(|&b| coeff[b].abs() > 1e-15)
        .map(|b| (coeff[b], [b & 4 != 0, b & 2 != 0, b & 1 != 0]))
        .collect()
}

/// Measured Strang defect against a dense matrix-exponential oracle, and the
/// leading-order prediction. The step uses the potential as the outer
/// (half-step) operator.
pub fn strang_one_step_defect(
    u: &Field,
    d: f64,
    potential: &Field,
    dt: f64,
) -> Result<OneStepDefect, ErrorAnalysisError> {
    let grid = u.grid().clone();
    let n = grid.n();
    if n > DENSE_ORACLE_MAX_N {
        return Err(ErrorAnalysisError::TooLarge(n));
    }
    if !u.same_grid(potential) {
        return Err(SpectralError::GridMismatch.into());
    }
    let imag = u.max_imag();
    if imag > 0.0 {
        return Err(ErrorAnalysisError::NotReal(imag));
    }

    let mut op = diffusion_matrix(&grid, d)?;
    for (i, p) in potential.values().iter().enumerate() {
        op[(i, i)] += p.re;
    }
    let e = expm(&(op * dt))?;
    let u_re = nalgebra::DVector::from_iterator(n, u.values().iter().map(|c| c.re));
    let exact = e * u_re;

    let mut heat = HeatFlow::new(grid.clone(), d);
    let mut pot = PotentialFlow::new(potential.clone());
    let mut split = u.clone();
    step(&strang(), OperatorOrdering::BFirst, &mut heat, &mut pot, &mut split, dt)?;
    let defect_norm =
        split.values().iter().zip(exact.iter()).map(|(s, x)| (s.re - x).abs()).fold(0.0, f64::max);

    let apply_a = |g: &Field| spectral_derivative(g, 2).map(|h| h.scaled(d.into()));
    let apply_b = |g: &Field| g.mul(potential);
    let mut leading = Field::zeros(grid.clone());
    for (c, word) in strang_third_order_words() {
        let mut g = u.clone();
        for &outer in word.iter().rev() {
            g = if outer { apply_b(&g)? } else { apply_a(&g)? };
        }
        leading = leading.add(&g.scaled(c.into()))?;
    }
    Ok(OneStepDefect { defect_norm, predicted_leading: dt.powi(3) * leading.norm_inf() })
}
