//! Maximal solution of the blow-up problem on the unit disk, compared with
//! the closed form u = -ln(1 - r^2).
//!
//! cargo run --release --example interior_disk -- 0.015625

use hyprad::domains;
use hyprad::interior::solve_interior;

fn main() -> hyprad::Result<()> {
    let h: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0 / 64.0);
    let curve = domains::disk().curve()?;
    let sol = solve_interior(&curve, h, 1e-9, 0.2)?;
    for level in &sol.report.outer_levels {
        println!(
            "M = {:>4.1}  newton {:>2}  residual {:.2e}",
            level.level, level.newton_iterations, level.residual
        );
    }
    println!("change on d >= 0.2: {:.2e}", sol.report.interior_change);
    for r in [0.0, 0.25, 0.5, 0.7, 0.8] {
        let u = sol.interpolate([r, 0.0], |u| u).unwrap_or(f64::NAN);
        let exact = -(1.0 - r * r).ln();
        println!("r = {r:.2}  u = {u:.8}  exact {exact:.8}  error {:.2e}", u - exact);
    }
    Ok(())
}
