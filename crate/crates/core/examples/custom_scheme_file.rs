//! Write a scheme file, load it back and use it on the linear problem.

use rdsplit::compositions::{build_order, load_scheme, save_scheme, IntegrateOptions, LoadOptions};
use rdsplit::harness::{reference_solution, state_error, NormVariant};
use rdsplit::problems::preset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("order4.scheme");
    save_scheme(&build_order(4)?, &path)?;
    let loaded = load_scheme(&path, LoadOptions::default())?;
    println!("loaded {} ({} stages, {} warnings)", loaded.scheme.name, loaded.scheme.len(), loaded.warnings.len());

    let problem = preset("linpot-low")?;
    let (reference, _) = reference_solution(&problem, 1.0, 2f64.powi(-10), None)?;
    for dt in [0.25, 0.125, 0.0625] {
        let out = problem.run(&loaded.scheme, dt, 1.0, IntegrateOptions::default())?;
        let err = state_error(problem.kind, &out.final_state, &reference, NormVariant::Caption)?;
        println!("dt = {dt:<7} error {err:.3e}");
    }
    Ok(())
}
