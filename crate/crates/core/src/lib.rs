//! Operator splitting with complex-coefficient compositions for 1D periodic
//! reaction-diffusion equations, discretized with a Fourier pseudospectral
//! method.
//!
//! The pieces are usable on their own: [`spectral`] grids and transforms,
//! [`special`] for the principal Lambert W branch, [`subflows`] for the exact
//! and implicit-midpoint subflows, [`compositions`] for schemes and time
//! stepping, [`problems`] for the presets, [`harness`] for convergence and
//! efficiency studies, [`erroranalysis`] for the leading Strang error terms,
//! and [`cli`] behind the `rdsplit` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compositions;
pub mod erroranalysis;
pub mod harness;
pub mod problems;
pub mod special;
pub mod spectral;
pub mod subflows;
