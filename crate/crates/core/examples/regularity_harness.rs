//! Dyadic Whitney harness on the ellipse solution, next to the singular
//! control 1/T, plus the expansion trend of v.
//!
//! cargo run --release --example regularity_harness

use std::sync::Arc;

use hyprad::collar::{FixedPointOptions, MatchingSeries, MATCH_MODES, MATCH_SAMPLES};
use hyprad::domains;
use hyprad::field::ScalarField;
use hyprad::geometry::{build_collar_chart, Grading};
use hyprad::interior::solve_interior;
use hyprad::pipeline::CollarRun;
use hyprad::probe::{dyadic_harness, expansion_check, HarnessReport};

fn show(r: &HarnessReport) {
    println!("{} (J = {}): {}", r.quantity, r.depth, if r.pass { "pass" } else { "FAIL" });
    for (name, ratio) in &r.ratios {
        println!("  {name:<18} ratio {ratio:>8.3}  growth {:>10.3}", r.growth[name]);
    }
}

fn main() -> hyprad::Result<()> {
    let curve = Arc::new(domains::ellipse(2.0, 1.0).curve()?);
    let interior = solve_interior(&curve, 1.0 / 64.0, 1e-9, 0.2)?;
    let chart = build_collar_chart(curve, 0.2, 64, 256, Grading::default())?;
    let series = MatchingSeries::from_interior(&chart, &interior, MATCH_SAMPLES, MATCH_MODES)?;
    let data = series.on_chart(&chart);
    let run = CollarRun::solve(chart, &data, FixedPointOptions::default())?;
    let chart = &run.chart;

    show(&dyadic_harness(chart, None, &run.state.w_tilde, None, 0.5, None, 1)?);
    let control = ScalarField::from_fn(chart, "t_inverse", |t, _| if t > 0.0 { 1.0 / t } else { 0.0 });
    show(&dyadic_harness(chart, None, &control, None, 0.5, None, 1)?);

    let e = expansion_check(chart, &run.state.v, &run.state.w_tilde, 8, 1e-10);
    for (t, s) in e.levels.iter().zip(&e.sup_e) {
        println!("T = {t:.5}  sup|e| = {s:.4e}");
    }
    println!("monotone {}, gamma {:.4}", e.monotone, e.gamma_fit);
    Ok(())
}
