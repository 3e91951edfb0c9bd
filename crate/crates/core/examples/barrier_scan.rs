//! Log-corrected barriers around w0 on the ellipse: admissible A on two grids
//! and the sandwich test for the reconstructed u.
//!
//! cargo run --release --example barrier_scan

use std::sync::Arc;

use hyprad::barriers::{barrier_field, find_a_with, sandwich_check, BarrierSpec};
use hyprad::domains;
use hyprad::geometry::{build_collar_chart, Grading};
use hyprad::interior::solve_interior;
use hyprad::pipeline::CollarRun;
use hyprad::collar::{FixedPointOptions, MatchingSeries, MATCH_MODES, MATCH_SAMPLES};

fn main() -> hyprad::Result<()> {
    let curve = Arc::new(domains::ellipse(2.0, 1.0).curve()?);
    let interior = solve_interior(&curve, 1.0 / 64.0, 1e-9, 0.2)?;
    let chart = build_collar_chart(curve, 0.2, 64, 256, Grading::default())?;
    let series = MatchingSeries::from_interior(&chart, &interior, MATCH_SAMPLES, MATCH_MODES)?;
    for chart in [chart.clone(), chart.refined()?] {
        let data = series.on_chart(&chart);
        let run = CollarRun::solve(chart, &data, FixedPointOptions::default())?;
        let found = find_a_with(&run.op, &run.chart, &run.state.w0, 1024.0)?;
        for t in &found.trials {
            println!(
                "  A = {:>6}: defect in [{:.3e}, {:.3e}] {}",
                t.a,
                t.min_defect,
                t.max_defect,
                if t.passed { "ok" } else { "" }
            );
        }
        let lower = barrier_field(&run.chart, &BarrierSpec::new(run.state.w0.clone(), found.a_minus))?;
        let upper = barrier_field(&run.chart, &BarrierSpec::new(run.state.w0.clone(), found.a_plus))?;
        let band = (run.chart.first_layer(), run.chart.delta);
        let s = sandwich_check(&run.chart, &run.u, &lower, &upper, band, 0.0);
        println!(
            "{}x{}: A+ = {}, A- = {}, sandwich margins {:.2e} / {:.2e}",
            run.chart.n_t, run.chart.n_y, found.a_plus, found.a_minus, s.lower_margin, s.upper_margin
        );
    }
    Ok(())
}
