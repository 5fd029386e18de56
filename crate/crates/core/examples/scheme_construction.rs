//! Build the triple-jump compositions of orders 2 to 8 and print their
//! stage counts, consistency defects and the largest stage argument.

use rdsplit::compositions::{build_order, format_scheme, triple_jump_coefficients};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [2, 4, 6, 8] {
        let s = build_order(p)?;
        s.check_admissible()?;
        println!(
            "{:<18} stages {:>3}  |sum - 1| = {:.1e}  max |arg| = {:.4}",
            s.name,
            s.len(),
            s.consistency_defect(),
            s.max_abs_arg()
        );
    }
    for k in 0..3 {
        let (g1, g2) = triple_jump_coefficients(2, k)?;
        println!("order-2 triple jump, root {k}: gamma1 = {g1:.6}, gamma2 = {g2:.6}");
    }
    print!("\n{}", format_scheme(&build_order(4)?));
    Ok(())
}
