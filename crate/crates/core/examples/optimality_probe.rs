//! Hölder exponent of the boundary second derivative on domains whose
//! curvature is exactly C^alpha at one point, and on the disk.
//!
//! cargo run --release --example optimality_probe

use std::sync::Arc;

use hyprad::collar::{FixedPointOptions, MatchingSeries, MATCH_MODES, MATCH_SAMPLES};
use hyprad::domains;
use hyprad::geometry::{build_collar_chart, Grading};
use hyprad::interior::solve_interior;
use hyprad::pipeline::CollarRun;
use hyprad::probe::optimality_probe;

fn main() -> hyprad::Result<()> {
    let cases = [
        domains::cusp(0.5, domains::CUSP_EPS, domains::CUSP_HARMONICS),
        domains::cusp(0.8, domains::CUSP_EPS, domains::CUSP_HARMONICS),
        domains::disk(),
    ];
    for domain in cases {
        let curve = Arc::new(domain.curve()?);
        let interior = solve_interior(&curve, 1.0 / 64.0, 1e-9, 0.2)?;
        let chart = build_collar_chart(curve, 0.2, 64, 256, Grading::default())?;
        let series = MatchingSeries::from_interior(&chart, &interior, MATCH_SAMPLES, MATCH_MODES)?;
        let data = series.on_chart(&chart);
        let run = CollarRun::solve(chart, &data, FixedPointOptions::default())?;
        let probe = optimality_probe(&run.chart, &run.state.w, 0.5, 4);
        println!("{:<10} alpha_hat {}", domain.name, probe.display());
        for (h, d) in probe.steps.iter().zip(&probe.tangential) {
            println!("    h = {h:.4e}  sup increment {d:.4e}");
        }
    }
    Ok(())
}
