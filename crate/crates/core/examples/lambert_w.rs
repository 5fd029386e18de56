//! Principal-branch Lambert W at a few real and complex arguments.

use num_complex::Complex64;
use rdsplit::special::{lambert_w0, lambert_w0_real};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for x in [-(-1.0f64).exp(), 0.0, 1.0, std::f64::consts::E, 1e8] {
        let w = lambert_w0_real(x)?;
        println!("W0({x:>12.6e}) = {:>20.16}  ({} iterations)", w.value.re, w.iterations);
    }
    for z in [Complex64::new(0.0, 1.0), Complex64::new(-2.0, 0.5), Complex64::new(3.0, -40.0)] {
        let w = lambert_w0(z)?.value;
        let back = w * w.exp();
        println!("W0({z}) = {w:.15}  |w e^w - z| = {:.1e}", (back - z).norm());
    }
    Ok(())
}
