//! Model operator on the half-strip: explicit inverse for a few right-hand
//! sides and the order-2 decay of its certificate.
//!
//! cargo run --release --example model_strip

use std::f64::consts::PI;

use hyprad::model::{solve_model_fn, Extension, StripGrid};

fn main() -> hyprad::Result<()> {
    let theta = 0.25;
    let grid = StripGrid::new(theta, 128, 128)?;
    let constant = solve_model_fn(&grid, Extension::Clamp, |_, _| 1.0)?;
    let spread = constant.w1.values.iter().fold(0.0f64, |m, v| m.max((v + 0.5).abs()));
    println!("k = 1: max |w1 + 1/2| = {spread:.2e}, certificate {:.2e}", constant.certificate);

    let mut previous: Option<f64> = None;
    for n in [32, 64, 128] {
        let grid = StripGrid::new(theta, n, n)?;
        let sol = solve_model_fn(&grid, Extension::Clamp, |_, y| (PI * y / theta).cos())?;
        let order = previous.map(|p| (p / sol.certificate).log2());
        println!(
            "k = cos(pi Y/theta), n = {n:>3}: certificate {:.3e}{}",
            sol.certificate,
            order.map(|o| format!("  order {o:.2}")).unwrap_or_default()
        );
        previous = Some(sol.certificate);
    }
    let zero = solve_model_fn(&grid, Extension::Zero, |t, _| t / theta)?;
    println!("k = T/theta with zero extension: certificate {:.2e}", zero.certificate);
    Ok(())
}
