//! Differentiate a smooth periodic function spectrally and compare with the
//! exact derivative.

use rdsplit::spectral::{make_grid, spectral_derivative, Field};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pi = std::f64::consts::PI;
    for n in [16, 32, 64, 128] {
        let grid = make_grid(n, -pi, pi)?;
        let f = Field::from_real_fn(grid.clone(), |x| (x.sin()).exp());
        let exact = Field::from_real_fn(grid, |x| x.cos() * x.sin().exp());
        let d1 = spectral_derivative(&f, 1)?;
        let err = d1.sub(&exact)?.norm_inf();
        println!("n = {n:4}  max |f' - exact| = {err:.3e}");
    }
    Ok(())
}
