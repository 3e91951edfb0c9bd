//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line to the
//! real stdout (not the captured test output) and the test fails if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyprad::barriers::{defect_direct, find_a_with, relative_defect, BarrierSpec};
use hyprad::collar::{
    closure_study, FixedPointOptions, MatchingSeries, MATCH_MODES, MATCH_SAMPLES,
};
use hyprad::domains;
use hyprad::field::ScalarField;
use hyprad::geometry::{build_collar_chart, BoundaryCurve, CollarChart, Grading};
use hyprad::interior::{solve_interior, InteriorSolution};
use hyprad::model::{solve_model_fn, tilde_integral, tilde_log_derivative, Extension, StripGrid};
use hyprad::pipeline::{barrier_scan, harness_suite, run_pipeline, validate_config, CollarRun, RunConfig};
use hyprad::probe::optimality_probe;

const DELTA: f64 = 0.2;

struct Verdicts(Vec<(u8, bool)>);

impl Verdicts {
    fn record(&mut self, criterion: u8, passed: bool, detail: String) {
        let mark = if passed { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {criterion:>2}: {mark}  {detail}");
        let _ = out.flush();
        self.0.push((criterion, passed));
    }
}

fn sup(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0f64, |m, v| m.max(v.abs()))
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Interior solve, matching series and collar runs on the default chart and
/// its refinement.
struct Domain {
    curve: Arc<BoundaryCurve>,
    interior: InteriorSolution,
    coarse: CollarRun,
    fine: CollarRun,
}

fn collar_runs(curve: Arc<BoundaryCurve>, interior: InteriorSolution, n_y: usize) -> Domain {
    let chart = build_collar_chart(curve.clone(), DELTA, 64, n_y, Grading::default()).unwrap();
    let fine_chart = chart.refined().unwrap();
    let series = MatchingSeries::from_interior(&chart, &interior, MATCH_SAMPLES, MATCH_MODES).unwrap();
    let opts = FixedPointOptions::default();
    let data = series.on_chart(&chart);
    let coarse = CollarRun::solve(chart, &data, opts).unwrap();
    let data = series.on_chart(&fine_chart);
    let fine = CollarRun::solve(fine_chart, &data, opts).unwrap();
    Domain {
        curve,
        interior,
        coarse,
        fine,
    }
}

fn domain(file: hyprad::geometry::DomainFile, h: f64, n_y: usize) -> Domain {
    let curve = Arc::new(file.curve().unwrap());
    let interior = solve_interior(&curve, h, 1e-9, DELTA).unwrap();
    collar_runs(curve, interior, n_y)
}

fn curvature_data(chart: &CollarChart) -> Vec<f64> {
    chart.kappa_y.iter().map(|k| -k).collect()
}

fn criterion_1(v: &mut Verdicts) -> Domain {
    let start = Instant::now();
    let (disk, exact) = single_threaded(|| {
        let disk = domain(domains::disk(), 1.0 / 128.0, 256);
        let chart = disk.coarse.chart.clone();
        let exact = CollarRun::solve(chart, &curvature_data(&disk.coarse.chart), FixedPointOptions::default()).unwrap();
        (disk, exact)
    });
    let elapsed = start.elapsed().as_secs_f64();
    let chart = &exact.chart;
    let ny = chart.n_y;
    let h = chart.first_layer();
    let w_err = sup(exact.state.w.values.iter().map(|w| w + 1.0));
    let v_err = sup(exact.state.v.values.iter().enumerate().filter_map(|(k, v)| {
        let t = chart.t_nodes[k / ny];
        (t >= h).then(|| v - (2.0 * t - t * t))
    }));
    let u0 = disk.interior.interpolate([0.0, 0.0], |u| u).unwrap();
    let matched = sup(disk.coarse.state.w.values.iter().map(|w| w + 1.0));
    v.record(
        1,
        w_err <= 1e-8 && v_err <= 1e-6 && u0.abs() <= 5e-4 && elapsed <= 60.0,
        format!(
            "disk: |w+1| = {w_err:.2e}, |v - (1 - r^2)| = {v_err:.2e}, u(0) = {u0:.2e}, {elapsed:.1} s \
             single-threaded (interior-matched |w+1| = {matched:.2e})"
        ),
    );
    disk
}

fn criteria_2_to_4(v: &mut Verdicts, ell: &Domain) {
    let (c, f) = (&ell.coarse, &ell.fine);
    let study = closure_study((&c.chart, &c.state.w), (&f.chart, &f.state.w)).unwrap();
    let bound = 1e-6 + 10.0 * study.fine_error_estimate;
    v.record(
        2,
        study.fine <= bound && (1.7..=2.3).contains(&study.observed_order),
        format!(
            "ellipse closure {:.3e} -> {:.3e} (bound {bound:.3e}), order {:.3}",
            study.coarse, study.fine, study.observed_order
        ),
    );

    let (tc, tf) = (c.report.trace_error, f.report.trace_error);
    v.record(
        3,
        tc <= 0.05 && tf < tc,
        format!("max |w(0,Y) + kappa| = {tc:.3e} at nY = 256, {tf:.3e} at nY = 512"),
    );

    let (gc, gf) = (c.report.gamma_fit, f.report.gamma_fit);
    let ratio = gf / gc;
    let first_c = sup(c.state.w_tilde.row(1).iter().copied());
    let first_f = sup(f.state.w_tilde.row(1).iter().copied());
    v.record(
        4,
        gc.is_finite() && (0.5..=2.0).contains(&ratio) && first_f < first_c,
        format!("gamma {gc:.4} -> {gf:.4} (ratio {ratio:.3}); first-layer |w~| {first_c:.2e} -> {first_f:.2e}"),
    );
}

fn criterion_5(v: &mut Verdicts) {
    let start = Instant::now();
    let theta = 0.25;
    let grid = StripGrid::new(theta, 128, 128).unwrap();
    let constant = solve_model_fn(&grid, Extension::Clamp, |_, _| 1.0).unwrap();
    let spread = sup(constant.w1.values.iter().map(|w| w + 0.5));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut identity = 0.0f64;
    for _ in 0..20 {
        let modes: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..40.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let k = |s: f64| modes.iter().map(|(a, b, c)| a * (b * s + c).sin()).sum::<f64>();
        let dk = |s: f64| modes.iter().map(|(a, b, c)| a * b * (b * s + c).cos()).sum::<f64>();
        for ext in [Extension::Clamp, Extension::Zero] {
            for &t in &grid.t_nodes[1..grid.n_t] {
                let kt = tilde_integral(t, theta, ext, k);
                let d = tilde_log_derivative(t, theta, ext, k, dk);
                identity = identity.max((d - kt + k(t)).abs());
            }
        }
    }

    let mut certs = Vec::new();
    for n in [32, 64, 128] {
        let g = StripGrid::new(theta, n, n).unwrap();
        certs.push(solve_model_fn(&g, Extension::Clamp, |_, y| (PI * y / theta).cos()).unwrap().certificate);
    }
    let orders: Vec<f64> = certs.windows(2).map(|p| (p[0] / p[1]).log2()).collect();
    let elapsed = start.elapsed().as_secs_f64();
    v.record(
        5,
        spread <= 1e-10
            && constant.certificate <= 1e-10
            && identity <= 1e-8
            && orders.iter().all(|o| (1.7..=2.3).contains(o))
            && elapsed <= 10.0,
        format!(
            "k = 1: |w1 + 1/2| = {spread:.1e}, certificate {:.1e}; transform identity {identity:.1e} \
             over 20 seeded k; cos certificate orders {:.2}, {:.2}; {elapsed:.1} s",
            constant.certificate, orders[0], orders[1]
        ),
    );
}

/// Sup of the relative direct-route defect of the exact disk barrier
/// (`w0 = −1`, `A = 0`) at nodes shared with the coarsest grid.
fn disk_direct_defect_orders(curve: &Arc<BoundaryCurve>) -> (Vec<f64>, Vec<f64>) {
    let mut chart = build_collar_chart(curve.clone(), DELTA, 64, 256, Grading::default()).unwrap();
    let coarse_t = chart.t_nodes.clone();
    let mut sups = Vec::new();
    for level in 0..3 {
        let w0 = ScalarField::from_fn(&chart, "w0", |_, _| -1.0);
        let spec = BarrierSpec::new(w0, 0.0);
        let rel = relative_defect(&chart, &spec, &defect_direct(&chart, &spec).unwrap()).unwrap();
        let step = 1usize << level;
        let s = (2..64)
            .filter(|i| coarse_t[*i] < DELTA)
            .flat_map(|i| (0..64).map(move |j| (i * step, j * 4 * step)))
            .map(|(i, j)| rel.values[chart.idx(i, j)].abs())
            .fold(0.0, f64::max);
        sups.push(s);
        chart = chart.refined().unwrap();
    }
    let orders = sups.windows(2).map(|p| (p[0] / p[1]).log2()).collect();
    (sups, orders)
}

fn criteria_6_7(v: &mut Verdicts, disk: &Domain, ell: &Domain) {
    let cfg = RunConfig::default().barriers;
    let mut ok6 = true;
    let mut ok7 = true;
    let mut d6 = Vec::new();
    let mut d7 = Vec::new();
    for (name, d) in [("disk", disk), ("ellipse", ell)] {
        let r = barrier_scan(&d.coarse, &d.fine, &cfg).unwrap();
        ok6 &= r.coarse.a_plus <= 16.0 && r.coarse.a_minus >= -16.0 && r.stable;
        d6.push(format!(
            "{name} A+ = {}, A- = {} (refined {}, {})",
            r.coarse.a_plus, r.coarse.a_minus, r.fine.a_plus, r.fine.a_minus
        ));
        ok7 &= r.sandwich.passed();
        d7.push(format!(
            "{name} margins {:.1e}/{:.1e} within tol {:.1e}",
            r.sandwich.lower_margin, r.sandwich.upper_margin, r.sandwich.tol
        ));
    }
    // the exact disk barrier: identity route is exact, direct route decays at order 2
    let chart = &disk.coarse.chart;
    let w0 = ScalarField::from_fn(chart, "w0", |_, _| -1.0);
    let exact = find_a_with(&disk.coarse.op, chart, &w0, 1024.0).unwrap();
    let spec = BarrierSpec::new(w0, 0.0);
    let raw = hyprad::barriers::defect(&disk.coarse.op, chart, &spec).unwrap();
    let identity = relative_defect(chart, &spec, &raw).unwrap().sup_norm();
    let (sups, orders) = disk_direct_defect_orders(&disk.curve);
    ok6 &= identity <= 1e-10 && orders.iter().all(|o| (1.7..=2.3).contains(o));
    d6.push(format!(
        "disk A = 0 defect {identity:.1e} (w0 = -1 search {}, {}); direct defect {:.2e} -> {:.2e} -> {:.2e}, orders {:.2}, {:.2}",
        exact.a_plus, exact.a_minus, sups[0], sups[1], sups[2], orders[0], orders[1]
    ));
    v.record(6, ok6, d6.join("; "));
    v.record(7, ok7, d7.join("; "));
}

fn criterion_8(v: &mut Verdicts, ell: &Domain) {
    let cfg = RunConfig::default();
    let reports = harness_suite(&ell.coarse, &cfg).unwrap();
    let (wt, control) = (&reports[0], &reports[2]);
    let depth = wt.depth as i32;
    let worst = wt.ratios.values().fold(0.0f64, |m, r| m.max(*r));
    let growth = control.growth["sup_d_grad_g"];
    v.record(
        8,
        wt.pass && wt.layers.len() >= 4 && !control.pass && growth >= 2f64.powi(depth - 1),
        format!(
            "ellipse w~: worst layer ratio {worst:.2} over {} layers (tol {}); control 1/T growth {growth:.1} >= 2^{}",
            wt.layers.len(),
            wt.ratio_tol,
            depth - 1
        ),
    );
}

fn criterion_9(v: &mut Verdicts, disk: &Domain) {
    let mut hats = BTreeMap::new();
    let mut detail = Vec::new();
    for alpha in [0.5, 0.8] {
        let d = domain(domains::cusp(alpha, domains::CUSP_EPS, domains::CUSP_HARMONICS), 1.0 / 64.0, 256);
        let p = optimality_probe(&d.coarse.chart, &d.coarse.state.w, 0.5, 4);
        let in_band = p.alpha_hat.is_some_and(|a| (a - alpha).abs() <= 0.2);
        detail.push(format!(
            "cusp {alpha}: {} (band {})",
            p.display(),
            if in_band { "in" } else { "out" }
        ));
        hats.insert((alpha * 10.0) as u32, (p.alpha_hat, p.saturated));
    }
    let p = optimality_probe(&disk.coarse.chart, &disk.coarse.state.w, 0.5, 4);
    detail.push(format!("disk: {}", p.display()));
    let ordered = match (hats[&5], hats[&8]) {
        ((Some(a), false), (Some(b), _)) => a < b,
        ((Some(_), false), (None, true)) => true,
        _ => false,
    };
    v.record(9, ordered && p.saturated, detail.join(", "));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    files
}

fn criterion_10(v: &mut Verdicts) {
    let tmp = tempfile::tempdir().unwrap();
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let raw = format!(
        r#"{{"domain": "{}", "output_dir": "{}", "seed": 11,
            "interior": {{"h": 0.03125}}, "collar": {{"n_t": 32, "n_y": 128}}}}"#,
        data.join("ellipse_2_1.json").display(),
        tmp.path().join("run").display()
    );
    let cfg = validate_config(&raw, None).unwrap();
    run_pipeline(&cfg).unwrap();
    let first = snapshot(&cfg.output_dir);
    single_threaded(|| run_pipeline(&cfg).unwrap());
    let second = snapshot(&cfg.output_dir);
    let differing: Vec<&String> = first
        .keys()
        .filter(|k| first.get(*k) != second.get(*k))
        .collect();
    v.record(
        10,
        first.len() >= 8 && first.keys().eq(second.keys()) && differing.is_empty(),
        format!(
            "{} output files byte-identical across a parallel and a single-threaded run{}",
            first.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut v = Verdicts(Vec::new());
    let disk = criterion_1(&mut v);
    let ell = domain(domains::ellipse(2.0, 1.0), 1.0 / 64.0, 256);
    criteria_2_to_4(&mut v, &ell);
    criterion_5(&mut v);
    criteria_6_7(&mut v, &disk, &ell);
    criterion_8(&mut v, &ell);
    criterion_9(&mut v, &disk);
    criterion_10(&mut v);
    let failed: Vec<u8> = v.0.iter().filter(|c| !c.1).map(|c| c.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
