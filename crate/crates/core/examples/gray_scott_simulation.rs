//! Self-replicating pulses: integrate the gs-selfrep preset and count the
//! peaks of v over time.

use rdsplit::compositions::{build_order, IntegrateOptions};
use rdsplit::problems::{preset, State};

fn peaks(v: &[f64], threshold: f64) -> usize {
    let n = v.len();
    (0..n).filter(|&i| v[i] > threshold && v[i] > v[(i + n - 1) % n] && v[i] >= v[(i + 1) % n]).count()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = preset("gs-selfrep")?;
    let scheme = build_order(2)?;
    let opts = IntegrateOptions { snapshot_stride: Some(100) };
    let traj = problem.run(&scheme, 1.0, 2000.0, opts)?;
    for (t, s) in &traj.snapshots {
        if let State::Pair(gs) = s {
            println!("t = {t:6.0}  peaks of v above 0.1: {}", peaks(&gs.v.real_parts(), 0.1));
        }
    }
    Ok(())
}
