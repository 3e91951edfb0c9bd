//! Renormalized collar problem on the 2:1 ellipse: interior solve, matching
//! at T = delta, fixed point for w, and a nested-grid closure study.
//!
//! cargo run --release --example collar_ellipse

use std::sync::Arc;

use hyprad::collar::{
    assemble_l, closure_study, collar_report, default_w0_data, solve_w0_with, solve_w_fuchsian_with,
    FixedPointOptions, MatchingSeries, MATCH_MODES, MATCH_SAMPLES,
};
use hyprad::domains;
use hyprad::geometry::{build_collar_chart, Grading};
use hyprad::interior::solve_interior;

fn main() -> hyprad::Result<()> {
    let curve = Arc::new(domains::ellipse(2.0, 1.0).curve()?);
    let delta = 0.2;
    let interior = solve_interior(&curve, 1.0 / 64.0, 1e-9, delta)?;
    let coarse = build_collar_chart(curve, delta, 64, 256, Grading::default())?;
    let series = MatchingSeries::from_interior(&coarse, &interior, MATCH_SAMPLES, MATCH_MODES)?;
    println!("matching series tail fraction {:.2e}", series.tail_fraction);

    let mut states = Vec::new();
    for chart in [coarse.clone(), coarse.refined()?] {
        let op = assemble_l(&chart)?;
        let w0 = solve_w0_with(&op, &chart, &default_w0_data(&chart))?;
        let state = solve_w_fuchsian_with(&op, &chart, &series.on_chart(&chart), &w0, None, FixedPointOptions::default())?;
        let r = collar_report(&op, &chart, &state)?;
        println!(
            "{}x{}: {} iterations, closure {:.2e}, gamma {:.4}, sup|w| {:.4}, trace error {:.2e}",
            r.n_t, r.n_y, r.iterations, r.nondivergence_closure, r.gamma_fit, r.sup_w, r.trace_error
        );
        states.push((chart, state));
    }
    let study = closure_study((&states[0].0, &states[0].1.w), (&states[1].0, &states[1].1.w))?;
    println!(
        "closure {:.3e} -> {:.3e}, observed order {:.3}",
        study.coarse, study.fine, study.observed_order
    );
    Ok(())
}
