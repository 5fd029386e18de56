//! Convergence study on the linear problem with a potential: errors against
//! a high-order reference for each scheme, then a fitted log-log slope.
//!
//! Pass `high` to use the large diffusion constant.

use rdsplit::harness::{convergence_study, dyadic_grid, estimate_order, schemes_for_orders, StudyOptions};
use rdsplit::problems::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "low".into());
    let problem = preset(&format!("linpot-{which}"))?;
    let schemes = schemes_for_orders(&[2, 4, 6])?;
    let dts = dyadic_grid(2, 8);
    // a coarser reference than the preset's keeps the example quick
    let table = convergence_study(&problem, &schemes, &dts, 1.0, 2f64.powi(-12), None, &StudyOptions::default())?;
    print!("{}", table.to_csv()?);
    for name in table.scheme_names() {
        match estimate_order(&table, name, (0.0, f64::MAX)) {
            Ok(fit) => println!("{name}: slope {:.2}", fit.slope),
            Err(e) => println!("{name}: {e}"),
        }
    }
    Ok(())
}
