use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use rdsplit::compositions::{build_order, integrate, strang, IntegrateOptions, OperatorOrdering};
use rdsplit::special::{lambert_w0, lambert_w0_real};
use rdsplit::spectral::{dft_forward, dft_inverse, make_grid, spectral_derivative, Field};
use rdsplit::subflows::{heat_flow, HeatFlow};

fn field_strategy(log_n: std::ops::RangeInclusive<u32>) -> impl Strategy<Value = Field> {
    log_n.prop_flat_map(|k| {
        let n = 1usize << k;
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(move |pairs| {
            let grid = make_grid(n, -PI, PI).unwrap();
            Field::new(grid, pairs.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
        })
    })
}

fn smooth_field(n: usize, coeffs: &[(f64, f64)]) -> Field {
    let grid = make_grid(n, -PI, PI).unwrap();
    Field::from_real_fn(grid, |x| {
        coeffs.iter().enumerate().map(|(m, (a, b))| a * (m as f64 * x).cos() + b * (m as f64 * x).sin()).sum()
    })
}

proptest! {
    #[test]
    fn dft_round_trip(f in field_strategy(1..=10)) {
        let back = dft_inverse(f.grid(), &dft_forward(&f)).unwrap();
        prop_assert!(back.sub(&f).unwrap().norm_inf() <= 1e-13);
    }

    #[test]
    fn dft_is_linear(f in field_strategy(6..=6), g in field_strategy(6..=6), a in -3.0..3.0f64) {
        let g = Field::new(f.grid().clone(), g.into_values()).unwrap();
        let lhs = dft_forward(&f.scaled(a.into()).add(&g).unwrap());
        let (ff, gg) = (dft_forward(&f), dft_forward(&g));
        for (l, (x, y)) in lhs.iter().zip(ff.iter().zip(&gg)) {
            prop_assert!((l - (a * x + y)).norm() <= 1e-12 * 64.0);
        }
    }

    #[test]
    fn parseval(f in field_strategy(1..=9)) {
        let n = f.len() as f64;
        let space: f64 = f.values().iter().map(|c| c.norm_sqr()).sum();
        let freq: f64 = dft_forward(&f).iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        prop_assert!((space - freq).abs() <= 1e-12 * (1.0 + space));
    }

    #[test]
    fn second_derivative_twice_is_fourth(coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12)) {
        let f = smooth_field(64, &coeffs);
        let d4 = spectral_derivative(&f, 4).unwrap();
        let d22 = spectral_derivative(&spectral_derivative(&f, 2).unwrap(), 2).unwrap();
        prop_assert!(d4.sub(&d22).unwrap().norm_inf() <= 1e-9 * (1.0 + d4.norm_inf()));
    }

    #[test]
    fn heat_flow_is_a_semigroup(coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8),
                                s in 0.0..0.5f64, t in 0.0..0.5f64, phase in -0.5..0.5f64) {
        let f = smooth_field(32, &coeffs);
        let tau1 = Complex64::from_polar(s, phase);
        let tau2 = Complex64::from_polar(t, -phase);
        let two = heat_flow(&heat_flow(&f, 0.3, tau1).unwrap(), 0.3, tau2).unwrap();
        let one = heat_flow(&f, 0.3, tau1 + tau2).unwrap();
        prop_assert!(two.sub(&one).unwrap().norm_inf() <= 1e-13 * (1.0 + f.norm_inf()));
    }

    #[test]
    fn lambert_inverts(re in -50.0..50.0f64, im in -50.0..50.0f64) {
        let z = Complex64::new(re, im);
        let w = lambert_w0(z).unwrap().value;
        prop_assert!((w * w.exp() - z).norm() <= 1e-14 * (1.0 + z.norm()));
        prop_assert!(w.im.abs() <= PI);
    }

    #[test]
    fn lambert_conjugate_symmetry(re in -20.0..20.0f64, im in 1e-3..20.0f64) {
        let z = Complex64::new(re, im);
        let a = lambert_w0(z).unwrap().value;
        let b = lambert_w0(z.conj()).unwrap().value;
        prop_assert!((a.conj() - b).norm() <= 1e-14 * (1.0 + a.norm()));
    }

    #[test]
    fn lambert_real_is_increasing(x in -0.3678..1e6f64, dx in 1e-6..1.0f64) {
        let a = lambert_w0_real(x).unwrap().value.re;
        let b = lambert_w0_real(x + dx).unwrap().value.re;
        prop_assert!(b > a);
    }

    #[test]
    fn lambert_real_matches_bisection(x in -0.36..1e4f64) {
        let w = lambert_w0_real(x).unwrap().value.re;
        let (mut lo, mut hi) = (-1.0f64, x.max(1.0).ln() + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < x { lo = mid } else { hi = mid }
        }
        prop_assert!((w - 0.5 * (lo + hi)).abs() <= 1e-13 * (1.0 + w.abs()));
    }
}

#[test]
fn exact_splitting_for_commuting_flows() {
    // two heat flows commute, so any consistent scheme is exact
    let f = smooth_field(64, &[(0.0, 0.0), (1.0, 0.5), (0.0, -0.3), (0.2, 0.1)]);
    let exact = heat_flow(&f, 0.7, Complex64::new(0.5, 0.0)).unwrap();
    for scheme in [strang(), build_order(4).unwrap(), build_order(8).unwrap()] {
        let grid = f.grid().clone();
        let (mut a, mut b) = (HeatFlow::new(grid.clone(), 0.3), HeatFlow::new(grid, 0.4));
        let traj = integrate(&scheme, OperatorOrdering::AFirst, &mut a, &mut b, f.clone(), 0.125, 0.5, IntegrateOptions::default())
            .unwrap();
        assert!(traj.final_state.sub(&exact).unwrap().norm_inf() <= 1e-13, "{}", scheme.name);
    }
}
