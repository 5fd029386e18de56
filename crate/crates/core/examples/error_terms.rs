//! Sizes of the terms in the leading Strang error, and a one-step defect
//! check against a dense matrix exponential.

use rdsplit::erroranalysis::{strang_error_terms, strang_one_step_defect, table1_csv};
use rdsplit::problems::linpot_initial;
use rdsplit::spectral::{make_grid, Field};
use rdsplit::subflows::standard_potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pi = std::f64::consts::PI;
    let grid = make_grid(1024, -pi, pi)?;
    let u = Field::from_real_fn(grid.clone(), linpot_initial);
    let f = Field::from_real_fn(grid, standard_potential);
    let cols = [strang_error_terms(&u, 10.0, &f)?, strang_error_terms(&u, 0.01, &f)?];
    print!("{}", table1_csv(&cols));

    let small = make_grid(128, -pi, pi)?;
    let u = Field::from_real_fn(small.clone(), linpot_initial);
    let f = Field::from_real_fn(small, standard_potential);
    for dt in [1e-3, 5e-4, 2.5e-4] {
        let d = strang_one_step_defect(&u, 0.005, &f, dt)?;
        println!("dt = {dt:.1e}  defect {:.4e}  ratio to prediction {:.5}", d.defect_norm, d.defect_norm / d.predicted_leading);
    }
    Ok(())
}
