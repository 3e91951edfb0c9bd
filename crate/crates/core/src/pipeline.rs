//! Run configuration and the end-to-end driver: geometry, interior solve,
//! collar solve (with a refined companion run), model cross-check, barrier
//! scan and probes, written to an output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{barrier_field, find_a_with, sandwich_check, AdmissibleA, BarrierSpec, SandwichReport};
use crate::collar::{
    apply_mw, assemble_l, closure_study, collar_report, default_w0_data, reconstruct, solve_w0_with,
    solve_w_fuchsian_with, ClosureStudy, CollarOperator, CollarReport, FixedPointOptions, MatchingSeries,
    RenormalizedState,
};
use crate::error::{Error, Result};
use crate::field::operator::FuchsianOperator;
use crate::field::ScalarField;
use crate::geometry::{build_collar_chart, BoundaryCurve, CollarChart, DomainFile, GeometryInfo, Grading};
use crate::interior::{default_schedule, solve_maximal, InteriorGrid, InteriorOptions, InteriorSolution};
use crate::model::{solve_perturbed, transplant, Extension, StripGrid};
use crate::probe::{
    default_depth, dyadic_harness, expansion_check, optimality_probe, AlphaReport, HarnessReport,
    RegularityReport,
};

pub const SPEC_VERSION: u32 = 1;

/// Exit codes of [`run_pipeline`] and the CLI.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const GEOMETRY_OR_CONFIG: i32 = 2;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteriorConfig {
    pub h: f64,
    /// Stop when the sup change between boundary levels drops below this.
    pub stop_tol: f64,
    pub tol_newton: f64,
}

impl Default for InteriorConfig {
    fn default() -> Self {
        Self {
            h: 1.0 / 64.0,
            stop_tol: 1e-9,
            tol_newton: 1e-10,
        }
    }
}

/// Source of the Dirichlet data for `w` at `T = δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Projected from the interior solve.
    Interior,
    /// `−κ(Y)`, the leading boundary expansion.
    Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollarConfig {
    pub delta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub grading: Grading,
    pub tol_fix: f64,
    pub max_outer: usize,
    pub matching: Matching,
    pub match_modes: usize,
    pub match_samples: usize,
}

impl Default for CollarConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            n_t: 64,
            n_y: 256,
            grading: Grading::default(),
            tol_fix: 1e-10,
            max_outer: 60,
            matching: Matching::Interior,
            match_modes: crate::collar::MATCH_MODES,
            match_samples: crate::collar::MATCH_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub theta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub tol_perturbation: f64,
    /// Allowed `|w_strip(0,·) + κ|` in the cross-check.
    pub cross_check_tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            n_t: 64,
            n_y: 64,
            tol_perturbation: 1e-10,
            cross_check_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub a_max: f64,
    /// Required bound `|A±| ≤ a_bound`.
    pub a_bound: f64,
    /// Sandwich tolerance as a multiple of the coarse/fine difference of u.
    pub tol_factor: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            a_max: crate::barriers::DEFAULT_A_MAX,
            a_bound: 16.0,
            tol_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub alpha: f64,
    pub depth: Option<usize>,
    /// Half-width of the arclength window around `Y = 0` for the exponent probe.
    pub window: f64,
    pub steps: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            depth: None,
            window: 0.5,
            steps: 4,
        }
    }
}

/// Checks that can gate the exit status.
pub const CHECK_NAMES: [&str; 12] = [
    "interior",
    "collar",
    "closure",
    "curvature_trace",
    "gamma",
    "model_cross_check",
    "barriers",
    "sandwich",
    "harness",
    "expansion",
    "disk_exact",
    "alpha_saturated",
];

fn default_checks() -> Vec<String> {
    CHECK_NAMES[..10].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub interior: InteriorConfig,
    pub collar: CollarConfig,
    pub model: ModelConfig,
    pub barriers: BarrierConfig,
    pub probe: ProbeConfig,
    /// Checks that decide the exit status; all are computed and reported.
    pub checks: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: PathBuf::from("data/disk.json"),
            output_dir: PathBuf::from("out"),
            seed: 0,
            interior: InteriorConfig::default(),
            collar: CollarConfig::default(),
            model: ModelConfig::default(),
            barriers: BarrierConfig::default(),
            probe: ProbeConfig::default(),
            checks: default_checks(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

/// Parse a JSON config, fill defaults and check invariants. Relative paths
/// are resolved against `base` (normally the config file's directory).
pub fn validate_config(raw: &str, base: Option<&Path>) -> Result<RunConfig> {
    let raw = if raw.trim().is_empty() { "{}" } else { raw };
    let value: Value = serde_json::from_str(raw)?;
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::config("config", e.to_string()))?;
    positive("interior.h", cfg.interior.h)?;
    positive("interior.stop_tol", cfg.interior.stop_tol)?;
    positive("interior.tol_newton", cfg.interior.tol_newton)?;
    positive("collar.delta", cfg.collar.delta)?;
    positive("collar.tol_fix", cfg.collar.tol_fix)?;
    positive("model.theta", cfg.model.theta)?;
    positive("model.tol_perturbation", cfg.model.tol_perturbation)?;
    positive("model.cross_check_tol", cfg.model.cross_check_tol)?;
    positive("barriers.a_max", cfg.barriers.a_max)?;
    positive("barriers.a_bound", cfg.barriers.a_bound)?;
    positive("barriers.tol_factor", cfg.barriers.tol_factor)?;
    positive("probe.window", cfg.probe.window)?;
    if let Grading::Geometric { ratio } = cfg.collar.grading {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::config("collar.grading.ratio", "must lie in (0, 1)"));
        }
    }
    let alpha = cfg.probe.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("probe.alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if cfg.probe.steps < 3 {
        return Err(Error::config("probe.steps", "need at least 3 scales"));
    }
    if cfg.collar.max_outer == 0 {
        return Err(Error::config("collar.max_outer", "must be at least 1"));
    }
    if cfg.collar.match_modes == 0 || cfg.collar.match_samples < 2 * cfg.collar.match_modes + 1 {
        return Err(Error::config("collar.match_samples", "need more than 2 samples per mode"));
    }
    for (i, c) in cfg.checks.iter().enumerate() {
        if !CHECK_NAMES.contains(&c.as_str()) {
            return Err(Error::config(format!("checks[{i}]"), format!("unknown check `{c}`")));
        }
    }
    if let Some(base) = base {
        if cfg.domain.is_relative() {
            cfg.domain = base.join(&cfg.domain);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
    }
    Ok(cfg)
}

/// One reported check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Acceptance criterion this check evaluates, when there is one.
    pub criterion: Option<u8>,
    pub passed: bool,
    /// Whether this check decides the exit status.
    pub gated: bool,
    pub values: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub spec_version: u32,
    pub domain: String,
    pub geometry: Option<GeometryInfo>,
    pub checks: BTreeMap<String, Check>,
    pub passed: bool,
    pub exit_code: i32,
    pub error: Option<StageError>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

/// A collar solve with its operator, for reuse across checks.
pub struct CollarRun {
    pub chart: CollarChart,
    pub op: CollarOperator,
    pub state: RenormalizedState,
    pub report: CollarReport,
    pub u: ScalarField,
}

impl CollarRun {
    pub fn solve(chart: CollarChart, match_data: &[f64], opts: FixedPointOptions) -> Result<Self> {
        let op = assemble_l(&chart)?;
        let w0 = solve_w0_with(&op, &chart, &default_w0_data(&chart))?;
        let state = solve_w_fuchsian_with(&op, &chart, match_data, &w0, None, opts)?;
        let report = collar_report(&op, &chart, &state)?;
        let (_, u) = reconstruct(&chart, &state)?;
        Ok(Self {
            chart,
            op,
            state,
            report,
            u,
        })
    }
}

pub fn interior_solve(curve: &BoundaryCurve, cfg: &RunConfig) -> Result<InteriorSolution> {
    let grid = Arc::new(InteriorGrid::new(curve, cfg.interior.h)?);
    let opts = InteriorOptions {
        tol_newton: cfg.interior.tol_newton,
        ..InteriorOptions::default()
    };
    let (u, report) = solve_maximal(&grid, &default_schedule(), cfg.interior.stop_tol, cfg.collar.delta, opts)?;
    Ok(InteriorSolution { grid, u, report })
}

/// Matching data for `chart` from the configured source.
pub fn matching_series(chart: &CollarChart, interior: Option<&InteriorSolution>, cfg: &CollarConfig) -> Result<MatchingSeries> {
    match (cfg.matching, interior) {
        (Matching::Interior, Some(int)) => {
            MatchingSeries::from_interior(chart, int, cfg.match_samples, cfg.match_modes)
        }
        _ => {
            let n = cfg.match_samples;
            let samples: Vec<f64> = (0..n)
                .map(|k| -chart.curvature_at(k as f64 * chart.perimeter / n as f64).0)
                .collect();
            Ok(MatchingSeries::from_samples(chart.perimeter, &samples, cfg.match_modes))
        }
    }
}

/// Strip model around the point of largest curvature, compared with `−κ`
/// on the boundary row.
#[derive(Debug, Clone, Serialize)]
pub struct ModelCrossCheck {
    pub s0: f64,
    pub theta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_trace_error: f64,
    pub tol: f64,
    pub collar_trace_at_s0: f64,
    pub strip_trace_at_s0: f64,
}

pub fn model_cross_check(run: &CollarRun, cfg: &ModelConfig) -> Result<ModelCrossCheck> {
    let chart = &run.chart;
    let (jmax, _) = chart
        .kappa_y
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, &k)| if k > best.1 { (j, k) } else { best });
    let s0 = chart.y_nodes[jmax];
    let grid = StripGrid::new(cfg.theta, cfg.n_t, cfg.n_y)?;
    let tr = transplant(&grid, s0, |s| chart.curvature_at(s))?;
    let sol = solve_perturbed(&grid, &tr.rhs, &tr.coeffs, Extension::Clamp, cfg.tol_perturbation, 200)?;
    let max_trace_error = (0..grid.n_y).fold(0.0f64, |m, j| m.max((sol.w.at(0, j) + tr.kappa[j]).abs()));
    let centre = grid
        .y_nodes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(j, _)| j)
        .unwrap_or(0);
    Ok(ModelCrossCheck {
        s0,
        theta: cfg.theta,
        iterations: sol.iterations,
        converged: sol.converged,
        max_trace_error,
        tol: cfg.cross_check_tol,
        collar_trace_at_s0: run.state.w.at(0, jmax),
        strip_trace_at_s0: sol.w.at(0, centre),
    })
}

/// Barrier scan on both grids plus the sandwich test on the coarse grid.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub coarse: AdmissibleA,
    pub fine: AdmissibleA,
    pub stable: bool,
    /// Largest `|u_c − u_f|` at shared nodes with `h ≤ T ≤ δ`.
    pub discretization_estimate: f64,
    pub sandwich: SandwichReport,
}

pub fn barrier_scan(coarse: &CollarRun, fine: &CollarRun, cfg: &BarrierConfig) -> Result<BarrierReport> {
    let a_c = find_a_with(&coarse.op, &coarse.chart, &coarse.state.w0, cfg.a_max)?;
    let a_f = find_a_with(&fine.op, &fine.chart, &fine.state.w0, cfg.a_max)?;
    let cc = &coarse.chart;
    let mut est = 0.0f64;
    for i in 1..=cc.n_t {
        for j in 0..cc.n_y {
            let a = coarse.u.values[cc.idx(i, j)];
            let b = fine.u.values[fine.chart.idx(2 * i, 2 * j)];
            est = est.max((a - b).abs());
        }
    }
    let lower = barrier_field(cc, &BarrierSpec::new(coarse.state.w0.clone(), a_c.a_minus))?;
    let upper = barrier_field(cc, &BarrierSpec::new(coarse.state.w0.clone(), a_c.a_plus))?;
    let sandwich = sandwich_check(
        cc,
        &coarse.u,
        &lower,
        &upper,
        (cc.first_layer(), cc.delta),
        cfg.tol_factor * est,
    );
    Ok(BarrierReport {
        stable: a_c.a_plus == a_f.a_plus && a_c.a_minus == a_f.a_minus,
        coarse: a_c,
        fine: a_f,
        discretization_estimate: est,
        sandwich,
    })
}

/// Harness on `w̃` (with `f = M_w(w)`), on `w`, and on the control `T⁻¹`.
pub fn harness_suite(run: &CollarRun, cfg: &RunConfig) -> Result<Vec<HarnessReport>> {
    let chart = &run.chart;
    let depth = cfg.probe.depth.unwrap_or_else(|| default_depth(chart));
    let alpha = cfg.probe.alpha;
    let op = FuchsianOperator::renormalized(chart);
    let f = apply_mw(chart, &run.state.w, &run.state.w)?;
    let w_tilde = dyadic_harness(chart, Some(&op), &run.state.w_tilde, Some(&f), alpha, Some(depth), cfg.seed)?;
    let w = dyadic_harness(chart, None, &run.state.w, None, alpha, Some(depth), cfg.seed)?;
    let control = ScalarField::from_fn(chart, "t_inverse", |t, _| if t > 0.0 { 1.0 / t } else { 0.0 });
    let control = dyadic_harness(chart, None, &control, None, alpha, Some(depth), cfg.seed)?;
    Ok(vec![w_tilde, w, control])
}

/// Everything computed by one run.
pub struct PipelineResult {
    pub summary: Summary,
    pub regularity: Option<RegularityReport>,
}

fn sup_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Stages {
    checks: BTreeMap<String, (bool, Value)>,
    outputs: Vec<String>,
    geometry: Option<GeometryInfo>,
    regularity: Option<RegularityReport>,
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    outputs.push(name.into());
    Ok(())
}

fn write_field(dir: &Path, name: &str, f: &ScalarField, outputs: &mut Vec<String>) -> Result<()> {
    f.write_csv(dir.join(name))?;
    outputs.push(name.into());
    Ok(())
}

/// Stage tag attached to errors for the summary.
fn at<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, (String, Error)> {
    r.map_err(|e| (stage.to_string(), e))
}

fn run_stages(cfg: &RunConfig, st: &mut Stages) -> std::result::Result<(), (String, Error)> {
    let dir = cfg.output_dir.clone();
    let domain = at("geometry", DomainFile::load(&cfg.domain))?;
    let curve = Arc::new(at("geometry", domain.curve())?);
    st.geometry = Some(GeometryInfo::of(&curve));
    let c = &cfg.collar;
    let chart = at("geometry", build_collar_chart(curve.clone(), c.delta, c.n_t, c.n_y, c.grading))?;
    let fine_chart = at("geometry", chart.refined())?;

    let interior = at("interior_solver", interior_solve(&curve, cfg))?;
    at("output", write_field(&dir, "u.csv", &interior.u, &mut st.outputs))?;
    let u_centre = interior.interpolate([0.0, 0.0], |u| u);
    st.checks.insert(
        "interior".into(),
        (
            interior.report.converged,
            json!({
                "h": cfg.interior.h,
                "levels": interior.report.outer_levels.len(),
                "interior_change": interior.report.interior_change,
                "u_at_origin": u_centre,
            }),
        ),
    );

    let opts = FixedPointOptions {
        max_outer: c.max_outer,
        tol_fix: c.tol_fix,
    };
    let series = at("collar_solver", matching_series(&chart, Some(&interior), c))?;
    let coarse_data = series.on_chart(&chart);
    let coarse = at("collar_solver", CollarRun::solve(chart, &coarse_data, opts))?;
    let fine = at("collar_solver", CollarRun::solve(fine_chart.clone(), &series.on_chart(&fine_chart), opts))?;
    at("output", write_field(&dir, "w.csv", &coarse.state.w, &mut st.outputs))?;
    at("output", write_field(&dir, "w0.csv", &coarse.state.w0, &mut st.outputs))?;
    at("output", write_field(&dir, "v.csv", &coarse.state.v, &mut st.outputs))?;
    let (rc, rf) = (&coarse.report, &fine.report);
    st.checks.insert(
        "collar".into(),
        (
            rc.converged && rf.converged,
            json!({
                "matching": c.matching,
                "match_tail_fraction": series.tail_fraction,
                "coarse": {"iterations": rc.iterations, "converged": rc.converged, "discrete_closure": rc.discrete_closure, "sup_w": rc.sup_w, "sup_t2_grad_w": rc.sup_t2_grad_w},
                "fine": {"iterations": rf.iterations, "converged": rf.converged, "discrete_closure": rf.discrete_closure, "sup_w": rf.sup_w, "sup_t2_grad_w": rf.sup_t2_grad_w},
            }),
        ),
    );

    let study: ClosureStudy = at(
        "collar_solver",
        closure_study((&coarse.chart, &coarse.state.w), (&fine.chart, &fine.state.w)),
    )?;
    let bound = 1e-6 + 10.0 * study.fine_error_estimate;
    st.checks.insert(
        "closure".into(),
        (
            study.fine <= bound && (1.7..=2.3).contains(&study.observed_order),
            json!({"study": study, "bound": bound, "order_band": [1.7, 2.3]}),
        ),
    );

    let trace_ok = rc.trace_error <= 0.05 && (rf.trace_error <= rc.trace_error || rf.trace_error <= 1e-10);
    st.checks.insert(
        "curvature_trace".into(),
        (
            trace_ok,
            json!({"coarse": rc.trace_error, "fine": rf.trace_error, "tol": 0.05}),
        ),
    );

    let first_c = sup_abs(coarse.state.w_tilde.row(1).iter().copied());
    let first_f = sup_abs(fine.state.w_tilde.row(1).iter().copied());
    let tiny = 1e-8;
    let gamma_ratio = if rc.gamma_fit <= tiny && rf.gamma_fit <= tiny {
        1.0
    } else {
        rf.gamma_fit / rc.gamma_fit
    };
    st.checks.insert(
        "gamma".into(),
        (
            rc.gamma_fit.is_finite()
                && (0.5..=2.0).contains(&gamma_ratio)
                && (first_f < first_c || first_f <= tiny),
            json!({"coarse": rc.gamma_fit, "fine": rf.gamma_fit, "ratio": gamma_ratio,
                   "first_layer_w_tilde": [first_c, first_f]}),
        ),
    );

    let model = at("model_fuchsian", model_cross_check(&coarse, &cfg.model))?;
    st.checks.insert(
        "model_cross_check".into(),
        (
            model.converged && model.max_trace_error <= model.tol,
            serde_json::to_value(&model).unwrap_or(Value::Null),
        ),
    );

    let barriers = at("barriers", barrier_scan(&coarse, &fine, &cfg.barriers))?;
    at("output", write_json(&dir, "barriers.json", &barriers, &mut st.outputs))?;
    let b = &cfg.barriers;
    st.checks.insert(
        "barriers".into(),
        (
            barriers.coarse.a_plus <= b.a_bound && barriers.coarse.a_minus >= -b.a_bound && barriers.stable,
            json!({"a_plus": barriers.coarse.a_plus, "a_minus": barriers.coarse.a_minus,
                   "fine": [barriers.fine.a_plus, barriers.fine.a_minus], "stable": barriers.stable, "a_bound": b.a_bound}),
        ),
    );
    st.checks.insert(
        "sandwich".into(),
        (
            barriers.sandwich.passed(),
            json!({"tol": barriers.sandwich.tol, "lower_margin": barriers.sandwich.lower_margin,
                   "upper_margin": barriers.sandwich.upper_margin}),
        ),
    );

    let harness = at("probe", harness_suite(&coarse, cfg))?;
    let (h_wt, h_ctrl) = (&harness[0], &harness[2]);
    let depth = h_wt.depth as i32;
    let control_growth = h_ctrl.growth["sup_d_grad_g"];
    st.checks.insert(
        "harness".into(),
        (
            h_wt.pass && !h_ctrl.pass && control_growth >= 2f64.powi(depth - 1) && h_wt.layers.len() >= 4,
            json!({"depth": depth, "w_tilde_ratios": h_wt.ratios, "w_ratios": harness[1].ratios,
                   "control_ratios": h_ctrl.ratios, "control_growth": control_growth,
                   "ratio_tol": h_wt.ratio_tol, "residual": h_wt.residual}),
        ),
    );
    let floor = 10.0 * rc.discrete_closure.max(f64::EPSILON);
    let expansion = expansion_check(&coarse.chart, &coarse.state.v, &coarse.state.w_tilde, depth.max(3) as usize, floor);
    st.checks.insert(
        "expansion".into(),
        (
            expansion.monotone && expansion.levels.len() >= 4,
            json!({"levels": expansion.levels, "sup_e": expansion.sup_e, "noise_floor": floor}),
        ),
    );
    let alpha: AlphaReport = optimality_probe(&coarse.chart, &coarse.state.w, cfg.probe.window, cfg.probe.steps);
    st.checks.insert(
        "alpha_saturated".into(),
        (
            alpha.saturated,
            json!({"alpha_hat": alpha.alpha_hat, "display": alpha.display(), "alpha_hat_normal": alpha.alpha_hat_normal,
                   "alpha": cfg.probe.alpha}),
        ),
    );

    let exact = at("collar_solver", disk_exact(&coarse.chart, opts, u_centre))?;
    st.checks.insert("disk_exact".into(), exact);

    let report = RegularityReport::assemble(harness, Some(expansion), Some(alpha), rc.gamma_fit);
    at("output", write_json(&dir, "regularity.json", &report, &mut st.outputs))?;
    st.regularity = Some(report);
    Ok(())
}

/// Exactness of the collar solve on its own data `−κ` (exactly `−1` on the
/// unit disk): `‖w + 1‖`, `v` against `2T − T²`, and `u` at the origin.
fn disk_exact(
    chart: &CollarChart,
    opts: FixedPointOptions,
    u_centre: Option<f64>,
) -> Result<(bool, Value)> {
    let data: Vec<f64> = chart.kappa_y.iter().map(|k| -k).collect();
    let run = CollarRun::solve(chart.clone(), &data, opts)?;
    let w_err = sup_abs(run.state.w.values.iter().map(|w| w + 1.0));
    let ny = chart.n_y;
    let h = chart.first_layer();
    let v_err = sup_abs(run.state.v.values.iter().enumerate().filter_map(|(k, v)| {
        let t = chart.t_nodes[k / ny];
        (t >= h).then(|| v - (2.0 * t - t * t))
    }));
    let u0 = u_centre.unwrap_or(f64::NAN);
    Ok((
        w_err <= 1e-8 && v_err <= 1e-6 && u0.abs() <= 5e-4,
        json!({"w_plus_one": w_err, "v_error": v_err, "u_at_origin": u0,
               "tols": {"w": 1e-8, "v": 1e-6, "u0": 5e-4}}),
    ))
}

fn criterion_of(check: &str) -> Option<u8> {
    Some(match check {
        "disk_exact" => 1,
        "closure" => 2,
        "curvature_trace" => 3,
        "gamma" => 4,
        "barriers" => 6,
        "sandwich" => 7,
        "harness" => 8,
        "alpha_saturated" => 9,
        _ => return None,
    })
}

/// Collar chart over `curve` matching the grid of a saved collar field
/// (default or uniform grading).
pub fn chart_for_field(curve: Arc<BoundaryCurve>, field: &ScalarField) -> Result<CollarChart> {
    let (n_t, n_y) = (field.rows.len().saturating_sub(1), field.cols.len());
    let delta = field.rows.last().copied().unwrap_or(0.0);
    for grading in [Grading::default(), Grading::Uniform] {
        let chart = build_collar_chart(curve.clone(), delta, n_t, n_y, grading)?;
        if chart.hash() == field.grid_hash {
            return Ok(chart);
        }
    }
    Err(Error::Shape(format!(
        "field `{}` does not live on a default or uniform collar grid of this domain",
        field.quantity_tag
    )))
}

/// Run all stages, writing outputs to `cfg.output_dir`. A missing domain
/// file is an error before anything is written. Module errors end the run
/// early; outputs written so far are kept and the error is recorded in
/// `summary.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    if !cfg.domain.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("domain file {} not found", cfg.domain.display()),
        )));
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let dir = cfg.output_dir.clone();
    let mut st = Stages {
        checks: BTreeMap::new(),
        outputs: Vec::new(),
        geometry: None,
        regularity: None,
    };
    write_json(&dir, "config.json", cfg, &mut st.outputs)?;
    let outcome = run_stages(cfg, &mut st);
    let checks: BTreeMap<String, Check> = st
        .checks
        .into_iter()
        .map(|(name, (passed, values))| {
            let gated = cfg.checks.contains(&name);
            let criterion = criterion_of(&name);
            (name, Check { criterion, passed, gated, values })
        })
        .collect();
    let all_gated_pass = cfg
        .checks
        .iter()
        .all(|name| checks.get(name).is_some_and(|c| c.passed));
    let (error, exit_code) = match &outcome {
        Ok(()) => (
            None,
            if all_gated_pass { exit::PASS } else { exit::CHECK_FAILED },
        ),
        Err((stage, e)) => (
            Some(StageError {
                stage: stage.clone(),
                message: e.to_string(),
            }),
            if e.is_geometry_or_config() {
                exit::GEOMETRY_OR_CONFIG
            } else {
                exit::CHECK_FAILED
            },
        ),
    };
    let mut outputs = st.outputs;
    outputs.push("summary.json".into());
    let summary = Summary {
        spec_version: SPEC_VERSION,
        domain: cfg.domain.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        geometry: st.geometry,
        checks,
        passed: exit_code == exit::PASS,
        exit_code,
        error,
        outputs,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(PipelineResult {
        summary,
        regularity: st.regularity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(validate_config("{}", None).unwrap(), RunConfig::default());
        assert_eq!(validate_config("", None).unwrap(), RunConfig::default());
    }

    #[test]
    fn half_collar_depth_is_accepted() {
        let cfg = validate_config(r#"{"collar": {"delta": 0.5}}"#, None).unwrap();
        assert_eq!(cfg.collar.delta, 0.5);
    }

    #[test]
    fn alpha_one_is_rejected() {
        match validate_config(r#"{"probe": {"alpha": 1.0}}"#, None) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "probe.alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_paths_are_reported() {
        for (raw, path) in [
            (r#"{"interior": {"h": 0}}"#, "interior.h"),
            (r#"{"collar": {"tol_fix": -1}}"#, "collar.tol_fix"),
            (r#"{"checks": ["closure", "nope"]}"#, "checks[1]"),
            (r#"{"collar": {"grading": {"kind": "geometric", "ratio": 1.5}}}"#, "collar.grading.ratio"),
        ] {
            match validate_config(raw, None) {
                Err(Error::Config { field, .. }) => assert_eq!(field, path, "{raw}"),
                other => panic!("{raw}: {other:?}"),
            }
        }
        assert!(matches!(
            validate_config(r#"{"colar": {}}"#, None),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let cfg = validate_config(r#"{"domain": "d.json", "output_dir": "o"}"#, Some(Path::new("/x/y"))).unwrap();
        assert_eq!(cfg.domain, PathBuf::from("/x/y/d.json"));
        assert_eq!(cfg.output_dir, PathBuf::from("/x/y/o"));
    }
}
