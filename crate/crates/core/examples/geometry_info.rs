//! Boundary geometry of a domain file: perimeter, curvature, reach, and the
//! tubular chart it induces.
//!
//! cargo run --release --example geometry_info -- data/ellipse_2_1.json

use std::sync::Arc;

use hyprad::geometry::{build_collar_chart, laplacian_distance, DomainFile, GeometryInfo, Grading};

fn main() -> hyprad::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ellipse_2_1.json".into());
    let curve = Arc::new(DomainFile::load(&path)?.curve()?);
    let info = GeometryInfo::of(&curve);
    println!("{}", serde_json::to_string_pretty(&info)?);

    let delta = 0.2_f64.min(0.5 * info.reach);
    let chart = build_collar_chart(curve.clone(), delta, 16, 64, Grading::default())?;
    println!("collar depth {delta}, first layer T = {:.3e}", chart.first_layer());
    println!("{:>10} {:>10} {:>12} {:>12}", "Y", "kappa", "J(delta,Y)", "lap d");
    for j in (0..chart.n_y).step_by(8) {
        let y = chart.y_nodes[j];
        println!(
            "{:>10.4} {:>10.4} {:>12.6} {:>12.6}",
            y,
            chart.kappa_y[j],
            chart.jac(chart.n_t, j),
            laplacian_distance(&chart, delta, y)?
        );
    }
    Ok(())
}
