//! Exact and implicit-midpoint flow maps of the split operators, advanced
//! over complex time increments.
//!
//! Each operator has a pure function (`heat_flow`, `gs_linear_flow`, ...)
//! and a [`Flow`] implementation that caches per-increment multipliers, so a
//! time-stepping loop with a fixed step pays for the exponentials once.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{ExpFactor, Field, Grid, SpectralError};
use crate::special::{lambert_w0, lambert_w0_from_log, LambertError};

/// Above this value of `log|arg|` the Lambert argument is never formed
/// explicitly.
const LOG_ARG_OVERFLOW: f64 = 700.0;

const NEWTON_CAP: usize = 30;
const DAMPED_NEWTON_CAP: usize = 60;
const NEWTON_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("increment {tau} runs the {operator} semigroup backwards (Re(rate * tau) < 0)")]
    UnstableDirection { operator: &'static str, tau: Complex64 },
    #[error("node {node}: |v0| = {v0_abs:e} is below the Lambert floor {floor:e}; use the midpoint flow")]
    VanishingV { node: usize, v0_abs: f64, floor: f64 },
    #[error("node {node}: {source}")]
    Lambert {
        node: usize,
        #[source]
        source: LambertError,
    },
    #[error("node {node}: midpoint Newton iteration failed (u0 = {u0}, v0 = {v0}, tau = {tau})")]
    NewtonFailed { node: usize, u0: Complex64, v0: Complex64, tau: Complex64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Advances a state in place by a complex increment.
pub trait Flow<S> {
    fn advance(&mut self, state: &mut S, tau: Complex64) -> Result<(), FlowError>;
}

impl<S, F> Flow<S> for F
where
    F: FnMut(&mut S, Complex64) -> Result<(), FlowError>,
{
    fn advance(&mut self, state: &mut S, tau: Complex64) -> Result<(), FlowError> {
        self(state, tau)
    }
}

/// The fixed potential profile `(3 + sin 10x) cos 12x`.
pub fn standard_potential(x: f64) -> f64 {
    (3.0 + (10.0 * x).sin()) * (12.0 * x).cos()
}

/// Physical parameters of the split operators. Only the fields relevant to
/// a given problem are read.
#[derive(Clone, Copy, Debug)]
pub struct FlowParams {
    /// Diffusivity of the linear-potential problem.
    pub d: f64,
    pub d_u: f64,
    pub d_v: f64,
    /// Feed rate.
    pub alpha: f64,
    /// Kill rate.
    pub beta: f64,
    pub potential: fn(f64) -> f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { d: 0.0, d_u: 0.0, d_v: 0.0, alpha: 0.0, beta: 0.0, potential: standard_potential }
    }
}

impl FlowParams {
    pub fn linear_potential(d: f64) -> Self {
        Self { d, ..Self::default() }
    }

    pub fn gray_scott(d_u: f64, d_v: f64, alpha: f64, beta: f64) -> Self {
        Self { d_u, d_v, alpha, beta, ..Self::default() }
    }

    pub fn validate_gray_scott(&self) -> Result<(), FlowError> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(FlowError::InvalidParameter(format!(
                "alpha and beta must be positive (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        if !(self.d_u >= 0.0) || !(self.d_v >= 0.0) {
            return Err(FlowError::InvalidParameter("diffusivities must be non-negative".into()));
        }
        Ok(())
    }

    pub fn potential_field(&self, grid: Arc<Grid>) -> Field {
        Field::from_real_fn(grid, self.potential)
    }
}

/// Species pair of the Gray-Scott system.
#[derive(Clone, Debug, PartialEq)]
pub struct GSState {
    pub u: Field,
    pub v: Field,
}

impl GSState {
    pub fn new(u: Field, v: Field) -> Result<Self, FlowError> {
        if !u.same_grid(&v) {
            return Err(SpectralError::GridMismatch.into());
        }
        Ok(Self { u, v })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    pub fn project_real(&mut self) {
        self.u.project_real();
        self.v.project_real();
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

fn check_direction(operator: &'static str, rate: f64, tau: Complex64) -> Result<(), FlowError> {
    if rate * tau.re < 0.0 || !(tau.re.is_finite() && tau.im.is_finite()) {
        return Err(FlowError::UnstableDirection { operator, tau });
    }
    Ok(())
}

fn heat_factors(grid: &Grid, d: f64, tau: Complex64) -> Result<Vec<ExpFactor>, FlowError> {
    if !(d >= 0.0) {
        return Err(FlowError::InvalidParameter(format!("diffusivity {d} must be non-negative")));
    }
    check_direction("heat", d, tau)?;
    Ok(grid.wavenumbers().iter().map(|&k| ExpFactor::new(-d * k * k * tau)).collect())
}

/// Bin-wise `exp(-D k^2 tau)`.
pub fn heat_multipliers(grid: &Grid, d: f64, tau: Complex64) -> Result<Vec<Complex64>, FlowError> {
    Ok(heat_factors(grid, d, tau)?.iter().map(|f| f.value).collect())
}

/// Exact heat flow `u_hat(t) = u_hat(0) exp(-D k^2 t)`.
pub fn heat_flow(f: &Field, d: f64, tau: Complex64) -> Result<Field, FlowError> {
    let m = heat_factors(f.grid(), d, tau)?;
    let mut out = f.clone();
    f.grid().apply_factors(out.values_mut(), &m);
    Ok(out)
}

fn potential_factors(potential: &Field, tau: Complex64) -> Vec<ExpFactor> {
    potential.values().iter().map(|&p| ExpFactor::new(tau * p)).collect()
}

/// Exact potential flow `u(t) = u(0) exp(t V(x))`.
pub fn potential_flow(f: &Field, potential: &Field, tau: Complex64) -> Result<Field, FlowError> {
    if !f.same_grid(potential) {
        return Err(SpectralError::GridMismatch.into());
    }
    let factors = potential_factors(potential, tau);
    let mut out = f.clone();
    for (v, m) in out.values_mut().iter_mut().zip(&factors) {
        *v = m.apply(*v);
    }
    Ok(out)
}

/// Spectral multipliers of the Gray-Scott linear subsystem for one increment.
#[derive(Clone, Debug)]
pub struct GsLinearMultipliers {
    u_decay: Vec<ExpFactor>,
    v_decay: Vec<ExpFactor>,
    /// Bin-0 value of the forcing fixed point `alpha_hat / alpha`.
    fixed_point_bin0: f64,
}

pub fn gs_linear_multipliers(
    grid: &Grid,
    p: &FlowParams,
    tau: Complex64,
) -> Result<GsLinearMultipliers, FlowError> {
    p.validate_gray_scott()?;
    check_direction("Gray-Scott linear", 1.0, tau)?;
    let k = grid.wavenumbers();
    let u_decay = k.iter().map(|&k| ExpFactor::new(-(p.alpha + p.d_u * k * k) * tau)).collect();
    let v_decay = k.iter().map(|&k| ExpFactor::new(-(p.beta + p.d_v * k * k) * tau)).collect();
    // alpha_hat is alpha * n in bin 0 and zero elsewhere, so the fixed point
    // alpha_hat / (alpha + D_u k^2) only has a bin-0 component, equal to n.
    Ok(GsLinearMultipliers { u_decay, v_decay, fixed_point_bin0: grid.n() as f64 })
}

fn apply_gs_linear(s: &mut GSState, m: &GsLinearMultipliers) {
    let grid = s.u.grid().clone();
    // increment form, as in `Grid::apply_factors`
    let mut inc = s.u.values().to_vec();
    grid.forward_in_place(&mut inc);
    inc[0] -= Complex64::new(m.fixed_point_bin0, 0.0);
    for (c, d) in inc.iter_mut().zip(&m.u_decay) {
        *c *= d.minus_one;
    }
    grid.inverse_in_place(&mut inc);
    for (u, d) in s.u.values_mut().iter_mut().zip(&inc) {
        *u += d;
    }
    grid.apply_factors(s.v.values_mut(), &m.v_decay);
}

/// Exact flow of `u_t = D_u u_xx + alpha (1 - u)`, `v_t = D_v v_xx - beta v`.
pub fn gs_linear_flow(s: &GSState, p: &FlowParams, tau: Complex64) -> Result<GSState, FlowError> {
    let m = gs_linear_multipliers(s.grid(), p, tau)?;
    let mut out = s.clone();
    apply_gs_linear(&mut out, &m);
    Ok(out)
}

/// Splits `s0` into `(s0 - v, v)` so that `u + v` rounds back to `s0`.
///
/// `v` is replaced by `fl(s0 - fl(s0 - v))`; by the Fast2Sum lemma the pair
/// then sums to `s0` exactly in every component where `|v| <= |s0|`.
#[inline]
fn conserve(s0: Complex64, v: Complex64) -> (Complex64, Complex64) {
    let u = s0 - v;
    (u, s0 - u)
}

/// `|v0|` below which the closed-form nonlinear flow is refused.
pub fn lambert_floor(s0_max: f64) -> f64 {
    1e-8 * s0_max.max(1.0)
}

/// Closed-form `v(t)` for `v_t = (s0 - v) v^2`.
fn exact_v(u0: Complex64, v0: Complex64, tau: Complex64) -> Result<Complex64, LambertError> {
    if u0 == Complex64::new(0.0, 0.0) {
        return Ok(v0);
    }
    let s0 = u0 + v0;
    if u0.im == 0.0 && v0.im == 0.0 && tau.im == 0.0 {
        let (u0, v0, s0, t) = (u0.re, v0.re, s0.re, tau.re);
        let r = u0 / v0;
        let exponent = r - s0 * s0 * t;
        let w = if r > 0.0 && r.ln() + exponent > LOG_ARG_OVERFLOW {
            lambert_w0_from_log(Complex64::new(r.ln() + exponent, 0.0))?.value.re
        } else {
            crate::special::lambert_w0_real(r * exponent.exp())?.value.re
        };
        return Ok(Complex64::new(v_from_w_real(v0, s0, r, s0 * s0 * t, w), 0.0));
    }
    let r = u0 / v0;
    let exponent = r - s0 * s0 * tau;
    let log_mag = r.norm().ln() + exponent.re;
    let w = if r.norm() > 0.0 && log_mag > LOG_ARG_OVERFLOW {
        lambert_w0_from_log(r.ln() + exponent)?.value
    } else {
        lambert_w0(r * exponent.exp())?.value
    };
    Ok(v_from_w(v0, s0, r, s0 * s0 * tau, w))
}

/// `ln(1 + z)`, accurate for small `|z|`.
fn ln_1p(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    Complex64::new(0.5 * (2.0 * a + a * a + b * b).ln_1p(), b.atan2(1.0 + a))
}

const REFINE_STEPS: usize = 3;

// `W = r + d` solves `d + ln(1 + d / r) + c = 0` with `c = s0^2 tau`. Solving
// for `d` directly and forming `v0 - v0 d / (1 + W)` keeps the stage update
// accurate relative to the change in `v`, not to `v`; a direct
// `s0 / (1 + W)` carries a rounding bias that repeats every step.
fn v_from_w(v0: Complex64, s0: Complex64, r: Complex64, c: Complex64, w: Complex64) -> Complex64 {
    let mut d = w - r;
    for _ in 0..REFINE_STEPS {
        let g = d + ln_1p(d / r) + c;
        let step = g / (1.0 + 1.0 / (r + d));
        d -= step;
        if step.norm() <= f64::EPSILON * d.norm() {
            break;
        }
    }
    if !(d.re.is_finite() && d.im.is_finite()) || (d - (w - r)).norm() > 1e-8 * (1.0 + w.norm()) {
        return s0 / (1.0 + w);
    }
    v0 - v0 * d / (1.0 + r + d)
}

fn v_from_w_real(v0: f64, s0: f64, r: f64, c: f64, w: f64) -> f64 {
    let mut d = w - r;
    for _ in 0..REFINE_STEPS {
        let g = d + (d / r).ln_1p() + c;
        let step = g / (1.0 + 1.0 / (r + d));
        d -= step;
        if step.abs() <= f64::EPSILON * d.abs() {
            break;
        }
    }
    if !d.is_finite() || (d - (w - r)).abs() > 1e-8 * (1.0 + w.abs()) {
        return s0 / (1.0 + w);
    }
    v0 - v0 * d / (1.0 + r + d)
}

/// Closed-form flow of `u_t = -u v^2`, `v_t = u v^2` through the principal
/// Lambert W branch. Requires `|v0| >= lambert_floor(max |u0 + v0|)` at every
/// node.
pub fn gs_nonlinear_flow_exact(s: &GSState, tau: Complex64) -> Result<GSState, FlowError> {
    let mut out = s.clone();
    nonlinear_exact_in_place(&mut out, tau)?;
    Ok(out)
}

fn nonlinear_exact_in_place(s: &mut GSState, tau: Complex64) -> Result<(), FlowError> {
    if tau == Complex64::new(0.0, 0.0) {
        return Ok(());
    }
    let s_max = s
        .u
        .values()
        .iter()
        .zip(s.v.values())
        .map(|(a, b)| (a + b).norm())
        .fold(0.0, f64::max);
    let floor = lambert_floor(s_max);
    let (u, v) = (s.u.values_mut(), s.v.values_mut());
    for (node, (uj, vj)) in u.iter_mut().zip(v.iter_mut()).enumerate() {
        if vj.norm() < floor {
            return Err(FlowError::VanishingV { node, v0_abs: vj.norm(), floor });
        }
        let s0 = *uj + *vj;
        let v_new = exact_v(*uj, *vj, tau).map_err(|source| FlowError::Lambert { node, source })?;
        let (un, vn) = conserve(s0, v_new);
        *uj = un;
        *vj = vn;
    }
    Ok(())
}

/// One implicit-midpoint step of `v_t = (s0 - v) v^2` at a single node.
fn midpoint_v(v0: Complex64, s0: Complex64, tau: Complex64) -> Option<Complex64> {
    let residual = |y: Complex64| {
        let m = 0.5 * (v0 + y);
        y - v0 - tau * (s0 - m) * m * m
    };
    let slope = |y: Complex64| {
        let m = 0.5 * (v0 + y);
        1.0 - tau * (s0 * m - 1.5 * m * m)
    };
    let tol = NEWTON_TOL * (1.0 + v0.norm());
    let mut y = v0;
    for _ in 0..NEWTON_CAP {
        let g = residual(y);
        if g.norm() <= tol {
            return Some(y);
        }
        let dy = g / slope(y);
        y -= dy;
        if dy.norm() <= tol {
            return Some(y);
        }
    }
    // damped restart from the seed, halving until the residual decreases
    let mut y = v0;
    for _ in 0..DAMPED_NEWTON_CAP {
        let g = residual(y);
        if g.norm() <= tol {
            return Some(y);
        }
        let dy = g / slope(y);
        let mut lambda = 1.0;
        let mut next = y - dy;
        while residual(next).norm() >= g.norm() && lambda > 1e-4 {
            lambda *= 0.5;
            next = y - lambda * dy;
        }
        y = next;
        if (lambda * dy).norm() <= tol && residual(y).norm() <= 1e3 * tol {
            return Some(y);
        }
    }
    let g = residual(y);
    (g.norm() <= tol && y.re.is_finite() && y.im.is_finite()).then_some(y)
}

/// Implicit-midpoint flow of the nonlinear subsystem; valid for any `v0`.
pub fn gs_nonlinear_flow_midpoint(s: &GSState, tau: Complex64) -> Result<GSState, FlowError> {
    let mut out = s.clone();
    nonlinear_midpoint_in_place(&mut out, tau)?;
    Ok(out)
}

fn nonlinear_midpoint_in_place(s: &mut GSState, tau: Complex64) -> Result<(), FlowError> {
    if tau == Complex64::new(0.0, 0.0) {
        return Ok(());
    }
    let (u, v) = (s.u.values_mut(), s.v.values_mut());
    for (node, (uj, vj)) in u.iter_mut().zip(v.iter_mut()).enumerate() {
        let s0 = *uj + *vj;
        let v_new = midpoint_v(*vj, s0, tau)
            .ok_or(FlowError::NewtonFailed { node, u0: *uj, v0: *vj, tau })?;
        let (un, vn) = conserve(s0, v_new);
        *uj = un;
        *vj = vn;
    }
    Ok(())
}

fn tau_key(tau: Complex64) -> (u64, u64) {
    (tau.re.to_bits(), tau.im.to_bits())
}

const CACHE_LIMIT: usize = 512;

fn cached<'a, T>(
    cache: &'a mut HashMap<(u64, u64), T>,
    tau: Complex64,
    build: impl FnOnce() -> Result<T, FlowError>,
) -> Result<&'a T, FlowError> {
    if cache.len() >= CACHE_LIMIT && !cache.contains_key(&tau_key(tau)) {
        cache.clear();
    }
    match cache.entry(tau_key(tau)) {
        std::collections::hash_map::Entry::Occupied(e) => Ok(e.into_mut()),
        std::collections::hash_map::Entry::Vacant(e) => Ok(e.insert(build()?)),
    }
}

/// Heat flow with multiplier caching.
#[derive(Debug)]
pub struct HeatFlow {
    grid: Arc<Grid>,
    d: f64,
    cache: HashMap<(u64, u64), Vec<ExpFactor>>,
}

impl HeatFlow {
    pub fn new(grid: Arc<Grid>, d: f64) -> Self {
        Self { grid, d, cache: HashMap::new() }
    }
}

impl Flow<Field> for HeatFlow {
    fn advance(&mut self, f: &mut Field, tau: Complex64) -> Result<(), FlowError> {
        let (grid, d) = (self.grid.clone(), self.d);
        let m = cached(&mut self.cache, tau, || heat_factors(&grid, d, tau))?;
        grid.apply_factors(f.values_mut(), m);
        Ok(())
    }
}

/// Potential flow with per-increment factor caching.
#[derive(Debug)]
pub struct PotentialFlow {
    potential: Field,
    cache: HashMap<(u64, u64), Vec<ExpFactor>>,
}

impl PotentialFlow {
    pub fn new(potential: Field) -> Self {
        Self { potential, cache: HashMap::new() }
    }
}

impl Flow<Field> for PotentialFlow {
    fn advance(&mut self, f: &mut Field, tau: Complex64) -> Result<(), FlowError> {
        let pot = &self.potential;
        let factors = cached(&mut self.cache, tau, || Ok(potential_factors(pot, tau)))?;
        for (v, m) in f.values_mut().iter_mut().zip(factors) {
            *v = m.apply(*v);
        }
        Ok(())
    }
}

/// Gray-Scott linear flow with multiplier caching.
#[derive(Debug)]
pub struct GsLinearFlow {
    grid: Arc<Grid>,
    params: FlowParams,
    cache: HashMap<(u64, u64), GsLinearMultipliers>,
}

impl GsLinearFlow {
    pub fn new(grid: Arc<Grid>, params: FlowParams) -> Self {
        Self { grid, params, cache: HashMap::new() }
    }
}

impl Flow<GSState> for GsLinearFlow {
    fn advance(&mut self, s: &mut GSState, tau: Complex64) -> Result<(), FlowError> {
        let (grid, params) = (self.grid.clone(), self.params);
        let m = cached(&mut self.cache, tau, || gs_linear_multipliers(&grid, &params, tau))?;
        apply_gs_linear(s, m);
        Ok(())
    }
}

/// Which solver handles the nonlinear Gray-Scott subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NonlinearFlowChoice {
    /// Closed form through Lambert W.
    Exact,
    /// Implicit midpoint rule.
    Midpoint,
}

impl std::str::FromStr for NonlinearFlowChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Self::Exact),
            "midpoint" => Ok(Self::Midpoint),
            other => Err(format!("unknown nonlinear flow '{other}' (expected exact or midpoint)")),
        }
    }
}

impl std::fmt::Display for NonlinearFlowChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Midpoint => "midpoint",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GsNonlinearFlow(pub NonlinearFlowChoice);

impl Flow<GSState> for GsNonlinearFlow {
    fn advance(&mut self, s: &mut GSState, tau: Complex64) -> Result<(), FlowError> {
        match self.0 {
            NonlinearFlowChoice::Exact => nonlinear_exact_in_place(s, tau),
            NonlinearFlowChoice::Midpoint => nonlinear_midpoint_in_place(s, tau),
        }
    }
}
