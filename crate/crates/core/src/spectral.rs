//! Periodic grids, the discrete Fourier transform contract and spectral
//! differentiation.
//!
//! Normalization: the forward transform is unnormalized,
//! `F[m] = sum_j f[j] exp(-2 pi i j m / n)`, and the inverse carries the
//! `1/n` factor. Parseval therefore reads `sum |F|^2 = n * sum |f|^2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("degenerate interval [{x_min}, {x_max})")]
    DegenerateInterval { x_min: f64, x_max: f64 },
    #[error("unsupported derivative order {0} (expected 1..=4)")]
    UnsupportedOrder(u32),
    #[error("length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Uniform periodic mesh on `[x_min, x_max)` with its DFT plans.
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

/// Builds a shared grid. Nodes are `x_j = x_min + j dx`, `j = 0..n`.
pub fn make_grid(n: usize, x_min: f64, x_max: f64) -> Result<Arc<Grid>, SpectralError> {
    Grid::new(n, x_min, x_max).map(Arc::new)
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self, SpectralError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(SpectralError::NotPowerOfTwo(n));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(SpectralError::DegenerateInterval { x_min, x_max });
        }
        let length = x_max - x_min;
        let scale = 2.0 * PI / length;
        // DFT bin order: 0, 1, ..., n/2 - 1, -n/2, ..., -1
        let wavenumbers = (0..n)
            .map(|m| {
                let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
                scale * signed
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            x_min,
            x_max,
            dx: length / n as f64,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }

    /// Index of the Nyquist bin (`k = -n/2 * 2 pi / L`).
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Unnormalized forward DFT in place.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.forward.process(data);
    }

    /// Inverse DFT in place, including the `1/n` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// Multiplies the spectrum of `data` bin-wise by exponential factors, in
    /// place.
    ///
    /// Only the increment `IFFT(FFT(u) (exp(z) - 1))` passes through the
    /// transforms, so transform round-off scales with the change per call
    /// rather than with `u`. Applying the same factors over many nearly equal
    /// states otherwise accumulates that round-off linearly.
    pub fn apply_factors(&self, data: &mut [Complex64], factors: &[ExpFactor]) {
        let mut inc = data.to_vec();
        self.forward_in_place(&mut inc);
        for (c, f) in inc.iter_mut().zip(factors) {
            *c *= f.minus_one;
        }
        self.inverse_in_place(&mut inc);
        for (u, d) in data.iter_mut().zip(&inc) {
            *u += d;
        }
    }

    /// Multiplies the spectrum of `data` bin-wise by `multipliers` and
    /// transforms back, in place.
    pub fn apply_multipliers(&self, data: &mut [Complex64], multipliers: &[Complex64]) {
        self.forward_in_place(data);
        for (c, m) in data.iter_mut().zip(multipliers) {
            *c *= m;
        }
        self.inverse_in_place(data);
    }
}

/// `exp(z)` stored together with `exp(z) - 1`.
///
/// A step loop reuses the same factors thousands of times, so the rounding
/// error of a stored `exp(z)` close to one would accumulate linearly with
/// the step count. Near one the factor is applied as `c + c (exp(z) - 1)`,
/// which leaves only data-dependent rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpFactor {
    pub value: Complex64,
    pub minus_one: Complex64,
}

impl ExpFactor {
    pub fn new(z: Complex64) -> Self {
        let value = z.exp();
        let half = (0.5 * z.im).sin();
        let minus_one = Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, value.im);
        Self { value, minus_one }
    }

    #[inline]
    pub fn apply(&self, c: Complex64) -> Complex64 {
        if self.minus_one.norm_sqr() < 0.25 {
            c + c * self.minus_one
        } else {
            c * self.value
        }
    }
}

/// Nodal samples of one species. Values are complex because complex
/// stage coefficients produce complex intermediate states.
#[derive(Clone, Debug)]
pub struct Field {
    values: Vec<Complex64>,
    grid: Arc<Grid>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch { expected: grid.n(), got: values.len() });
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.n()];
        Self { values, grid }
    }

    pub fn constant(grid: Arc<Grid>, c: Complex64) -> Self {
        let values = vec![c; grid.n()];
        Self { values, grid }
    }

    /// Samples a real function at the grid nodes.
    pub fn from_real_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(|x| Complex64::new(f(x), 0.0)).collect();
        Self { values, grid }
    }

    pub fn from_complex_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { values, grid }
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self, SpectralError> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Drops imaginary parts. Idempotent.
    pub fn project_real(&mut self) {
        for c in &mut self.values {
            c.im = 0.0;
        }
    }

    pub fn scaled(&self, a: Complex64) -> Field {
        Field { values: self.values.iter().map(|&v| a * v).collect(), grid: self.grid.clone() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field, SpectralError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Field) -> Result<Field, SpectralError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, SpectralError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Field, SpectralError> {
        if !self.same_grid(other) {
            return Err(SpectralError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { values, grid: self.grid.clone() })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { values: self.values.iter().map(|&v| f(v)).collect(), grid: self.grid.clone() }
    }
}

/// Unnormalized discrete Fourier coefficients of `f`.
pub fn dft_forward(f: &Field) -> Vec<Complex64> {
    let mut data = f.values.clone();
    f.grid.forward_in_place(&mut data);
    data
}

/// Inverse of [`dft_forward`].
pub fn dft_inverse(grid: &Arc<Grid>, spectrum: &[Complex64]) -> Result<Field, SpectralError> {
    if spectrum.len() != grid.n() {
        return Err(SpectralError::LengthMismatch { expected: grid.n(), got: spectrum.len() });
    }
    let mut data = spectrum.to_vec();
    grid.inverse_in_place(&mut data);
    Ok(Field { values: data, grid: grid.clone() })
}

/// Multipliers `(i k)^order` in DFT bin order. The Nyquist bin is zeroed for
/// odd orders, where its sign is ambiguous.
pub fn derivative_multipliers(grid: &Grid, order: u32) -> Result<Vec<Complex64>, SpectralError> {
    if !(1..=4).contains(&order) {
        return Err(SpectralError::UnsupportedOrder(order));
    }
    let mut m: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|&k| Complex64::new(0.0, k).powu(order))
        .collect();
    if order % 2 == 1 {
        m[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
    }
    Ok(m)
}

pub fn spectral_derivative(f: &Field, order: u32) -> Result<Field, SpectralError> {
    let multipliers = derivative_multipliers(&f.grid, order)?;
    let mut data = f.values.clone();
    f.grid.apply_multipliers(&mut data, &multipliers);
    Ok(Field { values: data, grid: f.grid.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_1024_on_minus_pi_pi() {
        let g = make_grid(1024, -PI, PI).unwrap();
        assert!((g.dx() - 2.0 * PI / 1024.0).abs() < 1e-16);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!((k[1] - 1.0).abs() < 1e-14);
        assert!((k[511] - 511.0).abs() < 1e-12);
        assert!((k[512] + 512.0).abs() < 1e-12);
        assert!((k[1023] + 1.0).abs() < 1e-14);
        let kmin = k.iter().cloned().fold(f64::INFINITY, f64::min);
        let kmax = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((kmin + 512.0).abs() < 1e-12 && (kmax - 511.0).abs() < 1e-12);
        assert!((g.node(0) + PI).abs() < 1e-15);
        assert!(g.node(1023) < PI);
    }

    #[test]
    fn smallest_grid() {
        let g = make_grid(2, 0.0, 2.0 * PI).unwrap();
        assert_eq!(g.wavenumbers()[0], 0.0);
        assert!((g.wavenumbers()[1].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_wavenumbers_on_short_domain() {
        let g = make_grid(256, -1.25, 1.25).unwrap();
        let scale = 2.0 * PI / 2.5;
        assert!((g.wavenumbers()[3] - 3.0 * scale).abs() < 1e-12);
        assert!((g.wavenumbers()[255] + scale).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(make_grid(100, 0.0, 1.0).unwrap_err(), SpectralError::NotPowerOfTwo(100));
        assert_eq!(make_grid(1, 0.0, 1.0).unwrap_err(), SpectralError::NotPowerOfTwo(1));
        assert!(matches!(make_grid(8, 1.0, 1.0), Err(SpectralError::DegenerateInterval { .. })));
        assert!(matches!(make_grid(8, 2.0, 1.0), Err(SpectralError::DegenerateInterval { .. })));
    }

    #[test]
    fn constant_field_spectrum_is_bin_zero() {
        let g = make_grid(64, -PI, PI).unwrap();
        let cval = c(0.7, -0.2);
        let s = dft_forward(&Field::constant(g.clone(), cval));
        assert!((s[0] - cval * 64.0).norm() < 1e-13);
        for bin in &s[1..] {
            assert!(bin.norm() <= 1e-14 * cval.norm() * 64.0);
        }
    }

    #[test]
    fn single_mode_lands_in_bin_one() {
        let g = make_grid(128, -PI, PI).unwrap();
        let f = Field::from_complex_fn(g.clone(), |x| Complex64::new(0.0, x).exp());
        let s = dft_forward(&f);
        for (m, bin) in s.iter().enumerate() {
            if m == 1 {
                assert!((bin.norm() - 128.0).abs() < 1e-11);
            } else {
                assert!(bin.norm() < 1e-11, "bin {m} = {bin}");
            }
        }
    }

    #[test]
    fn inverse_of_trivial_spectra() {
        let g = make_grid(16, 0.0, 1.0).unwrap();
        let zero = dft_inverse(&g, &vec![c(0.0, 0.0); 16]).unwrap();
        assert_eq!(zero.norm_inf(), 0.0);
        let mut spec = vec![c(0.0, 0.0); 16];
        spec[0] = c(32.0, 16.0);
        let f = dft_inverse(&g, &spec).unwrap();
        for v in f.values() {
            assert!((v - c(2.0, 1.0)).norm() < 1e-15);
        }
        assert!(dft_inverse(&g, &[c(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn second_derivative_of_sine() {
        let g = make_grid(1024, -PI, PI).unwrap();
        let f = Field::from_real_fn(g.clone(), |x| (8.0 * x).sin());
        let d2 = spectral_derivative(&f, 2).unwrap();
        // transform rounding is amplified by k_max^2 = 512^2
        let tol = 8.0 * f64::EPSILON * 512.0 * 512.0;
        for (x, v) in g.nodes().zip(d2.values()) {
            let err = (v.re + 64.0 * (8.0 * x).sin()).abs();
            assert!(err < tol, "err {err:e}");
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = make_grid(32, -PI, PI).unwrap();
        let f = Field::constant(g, c(3.0, 0.0));
        for order in 1..=4 {
            assert!(spectral_derivative(&f, order).unwrap().norm_inf() < 1e-13);
        }
    }

    #[test]
    fn exp_factor_matches_exp() {
        for z in [
            Complex64::new(1e-12, -3e-13),
            Complex64::new(-0.3, 0.2),
            Complex64::new(-40.0, 1.0),
            Complex64::new(2.0, -2.5),
        ] {
            let f = ExpFactor::new(z);
            assert_eq!(f.value, z.exp());
            let want = z.exp() - 1.0;
            assert!((f.minus_one - want).norm() <= 4.0 * f64::EPSILON * want.norm().max(1.0));
            let c = Complex64::new(0.7, -0.2);
            assert!((f.apply(c) - c * z.exp()).norm() <= 4.0 * f64::EPSILON * (c * z.exp()).norm());
        }
        let tiny = ExpFactor::new(Complex64::new(1e-13, 2e-13));
        let z = Complex64::new(1e-13, 2e-13);
        assert!((tiny.minus_one - (z + 0.5 * z * z)).norm() <= 2.0 * f64::EPSILON * z.norm());
    }

    #[test]
    fn unsupported_order() {
        let g = make_grid(8, 0.0, 1.0).unwrap();
        let f = Field::zeros(g);
        assert_eq!(spectral_derivative(&f, 0).unwrap_err(), SpectralError::UnsupportedOrder(0));
        assert_eq!(spectral_derivative(&f, 5).unwrap_err(), SpectralError::UnsupportedOrder(5));
    }

    #[test]
    fn odd_order_zeroes_nyquist() {
        let g = make_grid(8, 0.0, 2.0 * PI).unwrap();
        let m1 = derivative_multipliers(&g, 1).unwrap();
        let m2 = derivative_multipliers(&g, 2).unwrap();
        assert_eq!(m1[4], c(0.0, 0.0));
        assert!((m2[4] - c(-16.0, 0.0)).norm() < 1e-12);
    }

    /// Central 8th-order finite differences of the fourth derivative,
    /// evaluated from the analytic function on a fine mesh.
    fn fd_fourth(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        // second-derivative stencil (8th order)
        let w2 = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let d2 = |y: f64| {
            let mut s = w2[0] * f(y);
            for (i, w) in w2.iter().enumerate().skip(1) {
                let o = i as f64 * h;
                s += w * (f(y + o) + f(y - o));
            }
            s / (h * h)
        };
        let mut s = w2[0] * d2(x);
        for (i, w) in w2.iter().enumerate().skip(1) {
            let o = i as f64 * h;
            s += w * (d2(x + o) + d2(x - o));
        }
        s / (h * h)
    }

    #[test]
    fn fourth_derivative_matches_finite_differences() {
        let g = make_grid(1024, -PI, PI).unwrap();
        let func = |x: f64| (8.0 * x).sin().exp();
        let f = Field::from_real_fn(g.clone(), func);
        let d4 = spectral_derivative(&f, 4).unwrap();
        let h = 2.0 * PI / 4096.0;
        let scale = d4.norm_inf();
        for j in (0..1024).step_by(37) {
            let fd = fd_fourth(func, g.node(j), h);
            assert!((d4.values()[j].re - fd).abs() <= 1e-5 * scale, "node {j}");
        }
    }
}
