//! Regularity probes on a converged collar solution: the dyadic
//! scaled-Schauder harness, the boundary expansion check and the Hölder
//! exponent probe near a curvature cusp.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::holder::{estimate_exponent, holder_seminorm, ExponentFit};
use crate::field::operator::FuchsianOperator;
use crate::field::ops::{fd_weights, TStencils};
use crate::field::ScalarField;
use crate::geometry::CollarChart;

/// Default layer-ratio tolerance of the harness.
pub const RATIO_TOL: f64 = 10.0;
/// Layer seminorms at or below this (relative to the field size) count as zero.
pub const HARNESS_FLOOR: f64 = 1e-9;
/// Samples per box side.
const BOX_SAMPLES: usize = 4;

/// Tracked seminorms, in report order.
pub const SEMINORMS: [&str; 6] = [
    "sup_d_grad_g",
    "holder_dg",
    "holder_d2_grad_g",
    "holder_g",
    "holder_dg_1",
    "holder_d2g_2",
];

/// Component ranges of each tracked quantity inside a [`Sample`].
const COMPONENTS: [(usize, usize); 6] = [(0, 2), (2, 3), (3, 5), (5, 6), (6, 8), (8, 11)];

/// Values at one point: `T∇g` (2), `Tg`, `T²∇g` (2), `g`, `∇(Tg)` (2),
/// `∇²(T²g)` as `[TT, TY, YY]`.
pub type Sample = [f64; 11];

/// Box `[t_lo, t_lo + t_len] × [y_lo, y_lo + y_len]` in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyBox {
    pub t_lo: f64,
    pub t_len: f64,
    pub y_lo: f64,
    pub y_len: f64,
    /// Upper bound of the ambient diameter.
    pub diameter: f64,
}

impl WhitneyBox {
    /// Distance from the box to the boundary.
    pub fn distance(&self) -> f64 {
        self.t_lo
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicLayer {
    pub j: usize,
    /// `[2^{−j−1}δ, 2^{−j}δ]`.
    pub band: [f64; 2],
    pub boxes: Vec<WhitneyBox>,
}

/// Preferred harness depth. A sequence growing like `2^j` has max/median
/// `2^{J/2}` over `J + 1` layers, so the ratio test only sees such growth
/// once `J ≥ 7`.
pub const PREFERRED_DEPTH: usize = 8;

/// `min(PREFERRED_DEPTH, log2(δ/h) − 1)` with `h` the first T layer.
pub fn default_depth(chart: &CollarChart) -> usize {
    let by_layer = (chart.delta / chart.first_layer()).log2().floor() as i64 - 1;
    by_layer.clamp(0, PREFERRED_DEPTH as i64) as usize
}

/// Layers `j = 0..=depth`. Each band is split into two T-halves and each
/// half into Y-windows short enough that the box diameter, measured with the
/// largest Jacobian on the chart, does not exceed `t_lo`. Boxes reaching the
/// Dirichlet row `T = δ` are left out: only the physical boundary `T = 0`
/// is Whitney-separated from the boxes.
pub fn dyadic_layers(chart: &CollarChart, depth: usize) -> Result<Vec<DyadicLayer>> {
    if depth < 3 {
        return Err(Error::InsufficientLayers { layers: depth });
    }
    let jmax = chart.jacobian.iter().cloned().fold(1.0, f64::max);
    let p = chart.perimeter;
    let layers = (0..=depth)
        .map(|j| {
            let hi = chart.delta / 2f64.powi(j as i32);
            let lo = 0.5 * hi;
            let t_len = 0.5 * lo;
            let n_boxes = (p * jmax / t_len).ceil() as usize;
            let y_len = p / n_boxes as f64;
            let mut boxes = Vec::with_capacity(2 * n_boxes);
            for half in 0..2 {
                let t_lo = lo + half as f64 * t_len;
                if t_lo + t_len >= chart.delta * (1.0 - 1e-12) {
                    continue;
                }
                for b in 0..n_boxes {
                    let diameter = t_len.hypot(y_len * jmax);
                    assert!(diameter <= t_lo, "Whitney property violated at layer {j}");
                    boxes.push(WhitneyBox {
                        t_lo,
                        t_len,
                        y_lo: b as f64 * y_len,
                        y_len,
                        diameter,
                    });
                }
            }
            DyadicLayer { j, band: [lo, hi], boxes }
        })
        .collect();
    Ok(layers)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSeminorms {
    pub j: usize,
    pub band: [f64; 2],
    pub boxes: usize,
    pub seminorms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessReport {
    pub quantity: String,
    pub alpha: f64,
    pub depth: usize,
    pub ratio_tol: f64,
    pub layers: Vec<LayerSeminorms>,
    /// max over layers / median over layers, per seminorm.
    pub ratios: BTreeMap<String, f64>,
    /// deepest layer / shallowest layer, per seminorm.
    pub growth: BTreeMap<String, f64>,
    /// `[g(0,·)]_α` on the boundary trace.
    pub boundary_seminorm: f64,
    /// `sup |A g − f|` over the layers, when `f` is supplied.
    pub residual: Option<f64>,
    pub pass: bool,
}

/// Powers of the box scale `s` turning the raw seminorm of `d^k ∂^m g` into
/// the seminorm of the rescaled function `x̂ ↦ g(s x̂)`: `s^{m + α − k}`.
fn rescale_powers(alpha: f64) -> [f64; 6] {
    [0.0, alpha - 1.0, alpha - 1.0, alpha, alpha, alpha]
}

fn box_seminorms(samples: &[([f64; 2], Sample)], alpha: f64, scale: f64) -> [f64; 6] {
    let mut out = [0.0f64; 6];
    for (a, (pa, sa)) in samples.iter().enumerate() {
        out[0] = out[0].max(sa[0].hypot(sa[1]));
        for (pb, sb) in &samples[a + 1..] {
            let r = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
            if r <= 0.0 {
                continue;
            }
            let ra = r.powf(alpha);
            for (q, &(c0, c1)) in COMPONENTS.iter().enumerate().skip(1) {
                for c in c0..c1 {
                    out[q] = out[q].max((sa[c] - sb[c]).abs() / ra);
                }
            }
        }
    }
    for (o, p) in out.iter_mut().zip(rescale_powers(alpha)) {
        *o *= scale.powf(p);
    }
    out
}

fn layer_table(
    layers: &[DyadicLayer],
    alpha: f64,
    sampler: &(dyn Fn(f64, f64) -> Sample + Sync),
) -> Vec<[f64; 6]> {
    layers
        .iter()
        .map(|layer| {
            layer
                .boxes
                .par_iter()
                .map(|b| {
                    let mut pts = Vec::with_capacity(BOX_SAMPLES * BOX_SAMPLES);
                    for a in 0..BOX_SAMPLES {
                        let t = b.t_lo + b.t_len * a as f64 / (BOX_SAMPLES - 1) as f64;
                        for c in 0..BOX_SAMPLES {
                            let y = b.y_lo + b.y_len * c as f64 / (BOX_SAMPLES - 1) as f64;
                            pts.push(([t, y], sampler(t, y)));
                        }
                    }
                    box_seminorms(&pts, alpha, b.t_lo)
                })
                .reduce(|| [0.0; 6], |x, y| std::array::from_fn(|q| x[q].max(y[q])))
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(
    quantity: &str,
    alpha: f64,
    layers: &[DyadicLayer],
    table: &[[f64; 6]],
    floor: f64,
) -> HarnessReport {
    let clean = |s: f64| if s <= floor { 0.0 } else { s };
    let mut ratios = BTreeMap::new();
    let mut growth = BTreeMap::new();
    for (q, name) in SEMINORMS.iter().enumerate() {
        let col: Vec<f64> = table.iter().map(|row| clean(row[q])).collect();
        let max = col.iter().cloned().fold(0.0, f64::max);
        let med = median(&col);
        let ratio = if max == 0.0 { 1.0 } else if med == 0.0 { f64::INFINITY } else { max / med };
        let (first, last) = (col[0], col[col.len() - 1]);
        let grow = if last == 0.0 && first == 0.0 {
            1.0
        } else if first == 0.0 {
            f64::INFINITY
        } else {
            last / first
        };
        ratios.insert(name.to_string(), ratio);
        growth.insert(name.to_string(), grow);
    }
    let layer_reports = layers
        .iter()
        .zip(table)
        .map(|(l, row)| LayerSeminorms {
            j: l.j,
            band: l.band,
            boxes: l.boxes.len(),
            seminorms: SEMINORMS
                .iter()
                .zip(row)
                .map(|(n, v)| (n.to_string(), clean(*v)))
                .collect(),
        })
        .collect();
    let pass = ratios.values().all(|r| *r <= RATIO_TOL);
    HarnessReport {
        quantity: quantity.to_string(),
        alpha,
        depth: layers.len() - 1,
        ratio_tol: RATIO_TOL,
        layers: layer_reports,
        ratios,
        growth,
        boundary_seminorm: 0.0,
        residual: None,
        pass,
    }
}

/// Grid field plus the derivatives needed for the tracked quantities.
struct Derived {
    comps: Vec<Vec<f64>>,
}

fn derive(chart: &CollarChart, g: &[f64]) -> Derived {
    let (nt, ny) = (chart.n_t, chart.n_y);
    let st = TStencils::new(&chart.t_nodes);
    let hy = chart.h_y();
    let n = chart.len();
    let mut gy = vec![0.0; n];
    let mut gyy = vec![0.0; n];
    for i in 0..=nt {
        for j in 0..ny {
            let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
            let (a, c, b) = (g[i * ny + jm], g[i * ny + j], g[i * ny + jp]);
            gy[i * ny + j] = (b - a) / (2.0 * hy);
            gyy[i * ny + j] = (b - 2.0 * c + a) / (hy * hy);
        }
    }
    let mut comps = vec![vec![0.0; n]; 11];
    for i in 0..=nt {
        let t = chart.t_nodes[i];
        for j in 0..ny {
            let k = i * ny + j;
            let jac = chart.jacobian[k];
            let gt = st.first[i].apply(|r| g[r * ny + j]);
            let gtt = st.second[i].apply(|r| g[r * ny + j]);
            let gty = st.first[i].apply(|r| gy[r * ny + j]);
            let (gyk, gyyk) = (gy[k] / jac, gyy[k] / (jac * jac));
            let s: Sample = [
                t * gt,
                t * gyk,
                t * g[k],
                t * t * gt,
                t * t * gyk,
                g[k],
                g[k] + t * gt,
                t * gyk,
                2.0 * g[k] + 4.0 * t * gt + t * t * gtt,
                (2.0 * t * gy[k] + t * t * gty) / jac,
                t * t * gyyk,
            ];
            for (c, v) in s.into_iter().enumerate() {
                comps[c][k] = v;
            }
        }
    }
    Derived { comps }
}

/// Cubic Lagrange interpolation of grid components at `(t, y)`.
fn interpolator<'a>(chart: &'a CollarChart, d: &'a Derived) -> impl Fn(f64, f64) -> Sample + Sync + 'a {
    let comps = &d.comps;
    move |t, y| {
        let tn = &chart.t_nodes;
        let nt = chart.n_t;
        let i = tn.partition_point(|&x| x <= t).clamp(1, nt) - 1;
        let s = i.saturating_sub(1).min(nt - 3);
        let wt = fd_weights(t, &tn[s..s + 4], 0);
        let ny = chart.n_y;
        let hy = chart.h_y();
        let u = y.rem_euclid(chart.perimeter) / hy;
        let j0 = u.floor() as i64;
        let x = u - j0 as f64;
        let wy = [
            -x * (x - 1.0) * (x - 2.0) / 6.0,
            (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
            -(x + 1.0) * x * (x - 2.0) / 2.0,
            (x + 1.0) * x * (x - 1.0) / 6.0,
        ];
        let cols: [usize; 4] = std::array::from_fn(|c| (j0 - 1 + c as i64).rem_euclid(ny as i64) as usize);
        std::array::from_fn(|c| {
            let f = &comps[c];
            let mut acc = 0.0;
            for (a, wa) in wt.iter().enumerate() {
                let row = (s + a) * ny;
                for (b, wb) in wy.iter().enumerate() {
                    acc += wa * wb * f[row + cols[b]];
                }
            }
            acc
        })
    }
}

/// Scaled-Schauder harness for `g` on `chart`. `op` and `f` only feed the
/// reported residual `sup |A g − f|`.
pub fn dyadic_harness(
    chart: &CollarChart,
    op: Option<&FuchsianOperator>,
    g: &ScalarField,
    f: Option<&ScalarField>,
    alpha: f64,
    depth: Option<usize>,
    seed: u64,
) -> Result<HarnessReport> {
    let depth = depth.unwrap_or_else(|| default_depth(chart));
    let layers = dyadic_layers(chart, depth)?;
    let derived = derive(chart, &g.values);
    let sampler = interpolator(chart, &derived);
    let table = layer_table(&layers, alpha, &sampler);
    let floor = HARNESS_FLOOR * g.sup_norm().max(1.0);
    let mut report = summarize(&g.quantity_tag, alpha, &layers, &table, floor);
    let trace_pts: Vec<[f64; 2]> = chart.y_nodes.iter().map(|&y| [0.0, y]).collect();
    report.boundary_seminorm = holder_seminorm(&trace_pts, g.row(0), alpha, seed);
    if let (Some(op), Some(f)) = (op, f) {
        if let Some(ag) = op.apply(chart, g)? {
            let lo = layers.last().map(|l| l.band[0]).unwrap_or(0.0);
            let ny = chart.n_y;
            let r = (0..chart.len())
                .filter(|k| {
                    let t = chart.t_nodes[k / ny];
                    t >= lo && t < chart.delta
                })
                .fold(0.0f64, |m, k| m.max((ag.values[k] - f.values[k]).abs()));
            report.residual = Some(r);
        }
    }
    Ok(report)
}

/// Harness applied to an analytic function given with its tracked
/// quantities.
pub fn dyadic_harness_fn(
    chart: &CollarChart,
    quantity: &str,
    alpha: f64,
    depth: usize,
    sampler: impl Fn(f64, f64) -> Sample + Sync,
) -> Result<HarnessReport> {
    let layers = dyadic_layers(chart, depth)?;
    let table = layer_table(&layers, alpha, &sampler);
    Ok(summarize(quantity, alpha, &layers, &table, 0.0))
}

/// Profiles of `e = (v − 2T + κT²)/T²` at dyadic levels `T = 2^{−l}δ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub levels: Vec<f64>,
    /// `max_Y |e(T_l, ·)|` per level.
    pub sup_e: Vec<f64>,
    /// Values at or below this count as zero in the trend test.
    pub noise_floor: f64,
    /// Nonincreasing toward `T = 0` across all levels.
    pub monotone: bool,
    /// Deepest level still above `noise_floor` while the shallowest is not
    /// small: the input does not approach the expansion.
    pub flagged_non_solution: bool,
    pub gamma_fit: f64,
}

/// `v` on the chart, `w̃` for the γ fit, at levels `l = 0..=depth`.
pub fn expansion_check(
    chart: &CollarChart,
    v: &ScalarField,
    w_tilde: &ScalarField,
    depth: usize,
    noise_floor: f64,
) -> ExpansionReport {
    let ny = chart.n_y;
    let tn = &chart.t_nodes;
    let nt = chart.n_t;
    let mut levels = Vec::new();
    let mut sup_e = Vec::new();
    for l in 0..=depth {
        let t = chart.delta / 2f64.powi(l as i32);
        if t < tn[1] {
            break;
        }
        let i = tn.partition_point(|&x| x <= t).clamp(1, nt) - 1;
        let s = i.saturating_sub(1).min(nt - 3);
        let wt = fd_weights(t, &tn[s..s + 4], 0);
        let mut m = 0.0f64;
        for j in 0..ny {
            let vt: f64 = (0..4).map(|a| wt[a] * v.values[(s + a) * ny + j]).sum();
            let e = (vt - 2.0 * t + chart.kappa_y[j] * t * t) / (t * t);
            m = m.max(e.abs());
        }
        levels.push(t);
        sup_e.push(m);
    }
    let clean: Vec<f64> = sup_e.iter().map(|&e| if e <= noise_floor { 0.0 } else { e }).collect();
    let monotone = clean.windows(2).all(|p| p[1] <= p[0]);
    let last = *clean.last().unwrap_or(&0.0);
    let flagged_non_solution = last > 0.0 && last >= 0.5 * clean[0];
    ExpansionReport {
        levels,
        sup_e,
        noise_floor,
        monotone: monotone && !flagged_non_solution,
        flagged_non_solution,
        gamma_fit: crate::collar::fit_gamma(chart, w_tilde),
    }
}

/// Hölder exponent estimate of the boundary second derivative near `Y = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaReport {
    pub steps: Vec<f64>,
    /// Tangential: `sup |q(Y+h) − q(Y)|` over the window, `q = ½∂²_T v(0,·) = w(0,·)`.
    pub tangential: Vec<f64>,
    /// Normal: `|w(h, 0) − w(0, 0)|` at dyadic `h`.
    pub normal_steps: Vec<f64>,
    pub normal: Vec<f64>,
    pub alpha_hat: Option<f64>,
    pub fit: Option<ExponentFit>,
    pub alpha_hat_normal: Option<f64>,
    /// The estimate reached the smooth-function slope (or the increments are
    /// all below the noise floor).
    pub saturated: bool,
    pub window: f64,
    pub noise_floor: f64,
}

impl AlphaReport {
    pub fn display(&self) -> String {
        match (self.saturated, self.alpha_hat) {
            (true, _) => "≥ 1".into(),
            (false, Some(a)) => format!("{a:.3}"),
            (false, None) => "n/a".into(),
        }
    }
}

/// Slope at or above which the estimate counts as saturated.
pub const SATURATION_SLOPE: f64 = 0.9;
/// Relative size of increments treated as discretization noise.
pub const PROBE_NOISE: f64 = 1e-6;

/// Exponent probe on the solved `w` around the boundary point `Y = 0`:
/// increments of the trace `w(0, ·)` (half the normal second derivative of
/// `v`) over `|Y| ≤ window` at steps `2^m h_Y`, `m < n_steps`.
pub fn optimality_probe(chart: &CollarChart, w: &ScalarField, window: f64, n_steps: usize) -> AlphaReport {
    let ny = chart.n_y as i64;
    let hy = chart.h_y();
    let q = w.row(0);
    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let noise_floor = PROBE_NOISE * scale;
    let half = (window / hy).floor() as i64;
    let mut steps = Vec::new();
    let mut tangential = Vec::new();
    for m in 0..n_steps {
        let s = 1i64 << m;
        let mut best = 0.0f64;
        for j in -half..=(half - s) {
            let a = q[j.rem_euclid(ny) as usize];
            let b = q[(j + s).rem_euclid(ny) as usize];
            best = best.max((b - a).abs());
        }
        steps.push(s as f64 * hy);
        tangential.push(best);
    }
    let fitted: Vec<f64> = tangential.iter().map(|&d| if d <= noise_floor { 0.0 } else { d }).collect();
    let fit = estimate_exponent(&steps, &fitted).ok();
    let alpha_hat = fit.map(|f| f.slope);
    let saturated = alpha_hat.is_none_or(|a| a >= SATURATION_SLOPE);

    let tn = &chart.t_nodes;
    let mut normal_steps = Vec::new();
    let mut normal = Vec::new();
    let mut l = 1;
    while chart.delta / 2f64.powi(l) >= tn[1] && normal_steps.len() < 8 {
        let t = chart.delta / 2f64.powi(l);
        let i = tn.partition_point(|&x| x <= t).clamp(1, chart.n_t) - 1;
        normal_steps.push(tn[i]);
        normal.push((w.values[chart.idx(i, 0)] - q[0]).abs());
        l += 1;
    }
    let normal_fitted: Vec<f64> = normal.iter().map(|&d| if d <= noise_floor { 0.0 } else { d }).collect();
    let alpha_hat_normal = estimate_exponent(&normal_steps, &normal_fitted).ok().map(|f| f.slope);
    AlphaReport {
        steps,
        tangential,
        normal_steps,
        normal,
        alpha_hat,
        fit,
        alpha_hat_normal,
        saturated,
        window,
        noise_floor,
    }
}

/// Aggregated probe output written as `regularity.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Layers of the primary harness (the first entry of `harness`).
    pub layers: Vec<LayerSeminorms>,
    pub harness: Vec<HarnessReport>,
    pub gamma_fit: f64,
    pub expansion: Option<ExpansionReport>,
    pub alpha_hat: Option<AlphaReport>,
    pub flags: BTreeMap<String, bool>,
}

impl RegularityReport {
    pub fn assemble(
        harness: Vec<HarnessReport>,
        expansion: Option<ExpansionReport>,
        alpha_hat: Option<AlphaReport>,
        gamma_fit: f64,
    ) -> Self {
        let mut flags = BTreeMap::new();
        for h in &harness {
            flags.insert(format!("harness_{}", h.quantity), h.pass);
        }
        if let Some(e) = &expansion {
            flags.insert("expansion_monotone".into(), e.monotone);
        }
        if let Some(a) = &alpha_hat {
            flags.insert("alpha_saturated".into(), a.saturated);
        }
        Self {
            layers: harness.first().map(|h| h.layers.clone()).unwrap_or_default(),
            harness,
            gamma_fit,
            expansion,
            alpha_hat,
            flags,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile_chart, Grading};
    use std::sync::Arc;

    fn flat(n_t: usize, n_y: usize) -> CollarChart {
        build_profile_chart(Arc::new(|_| (0.0, 0.0)), 4.0, 0.2, n_t, n_y, Grading::default()).unwrap()
    }

    fn disk(n_t: usize, n_y: usize) -> CollarChart {
        build_profile_chart(
            Arc::new(|_| (1.0, 0.0)),
            2.0 * std::f64::consts::PI,
            0.2,
            n_t,
            n_y,
            Grading::default(),
        )
        .unwrap()
    }

    #[test]
    fn layers_are_whitney_and_partition_the_collar() {
        let c = disk(64, 128);
        let layers = dyadic_layers(&c, default_depth(&c)).unwrap();
        assert_eq!(layers.len(), PREFERRED_DEPTH + 1);
        assert!(layers[0].boxes.iter().all(|b| b.t_lo + b.t_len < 0.2));
        assert_eq!(2 * layers[0].boxes.len(), layers[1].boxes.len() / 2);
        assert_eq!(layers[0].band[1], 0.2);
        for pair in layers.windows(2) {
            assert_eq!(pair[0].band[0], pair[1].band[1]);
        }
        for l in &layers {
            for b in &l.boxes {
                assert!(b.diameter <= b.distance());
            }
        }
        assert!(matches!(
            dyadic_layers(&c, 2),
            Err(Error::InsufficientLayers { layers: 2 })
        ));
    }

    #[test]
    fn constant_field_is_trivially_uniform() {
        let c = disk(64, 128);
        let g = ScalarField::from_fn(&c, "w", |_, _| -1.0);
        let r = dyadic_harness(&c, None, &g, None, 0.5, None, 0).unwrap();
        assert!(r.pass);
        for name in &SEMINORMS[1..] {
            let s = r.layers.iter().map(|l| l.seminorms[*name]).fold(0.0, f64::max);
            if *name == "holder_dg" || *name == "holder_dg_1" || *name == "holder_d2g_2" {
                continue;
            }
            assert_eq!(s, 0.0, "{name}");
        }
        assert!(r.ratios.values().all(|x| *x <= RATIO_TOL));
    }

    #[test]
    fn logarithmic_profile_scales_exactly() {
        // g = ln T rescales to ln s + ln x̂, so every tracked quantity except
        // Tg = T ln T is identical on all layers.
        let c = flat(64, 64);
        let alpha = 0.5;
        let r = dyadic_harness_fn(&c, "log_t", alpha, 5, |t, _| {
            let l = t.ln();
            [1.0, 0.0, t * l, t, 0.0, l, l + 1.0, 0.0, 2.0 * l + 3.0, 0.0, 0.0]
        })
        .unwrap();
        for name in SEMINORMS.iter().filter(|n| **n != "holder_dg") {
            assert!((r.ratios[*name] - 1.0).abs() < 1e-6, "{name}: {:?}", r.ratios);
            assert!((r.growth[*name] - 1.0).abs() < 1e-6, "{name}");
        }
        assert!(r.pass);
    }

    #[test]
    fn quadratic_polynomial_has_no_second_order_seminorm() {
        // second derivatives of a degree-2 polynomial are constant
        let c = flat(64, 64);
        let r = dyadic_harness_fn(&c, "quadratic", 0.5, 4, |t, y| {
            let mut s = [0.0; 11];
            s[8] = 2.0;
            s[9] = 1.0;
            s[10] = 6.0;
            s[5] = 1.0 + t + 2.0 * y + t * t + t * y + 3.0 * y * y;
            s
        })
        .unwrap();
        assert_eq!(r.ratios["holder_d2g_2"], 1.0);
        for l in &r.layers {
            assert_eq!(l.seminorms["holder_d2g_2"], 0.0);
        }
    }

    #[test]
    fn singular_control_fails() {
        let c = disk(64, 128);
        let g = ScalarField::from_fn(&c, "t_inverse", |t, _| if t > 0.0 { 1.0 / t } else { 0.0 });
        let r = dyadic_harness(&c, None, &g, None, 0.5, None, 0).unwrap();
        assert!(!r.pass);
        let depth = r.depth as i32;
        assert!(r.growth["sup_d_grad_g"] >= 2f64.powi(depth - 1), "{:?}", r.growth);
        assert!(r.ratios["holder_g"] > RATIO_TOL, "{:?}", r.ratios);
    }

    #[test]
    fn log_corrected_profile_passes() {
        let c = disk(64, 128);
        let g = ScalarField::from_fn(&c, "w_tilde", |t, y| {
            if t > 0.0 {
                t * (1.0 / t).ln() * (1.0 + 0.3 * y.cos())
            } else {
                0.0
            }
        });
        let r = dyadic_harness(&c, None, &g, None, 0.5, None, 0).unwrap();
        assert!(r.pass, "{:?}", r.ratios);
    }

    #[test]
    fn smooth_field_decay_is_visible_only_at_depth() {
        // rescaled seminorms of a smooth field fall off like the box scale,
        // which the max/median ratio cannot tell from growth at depth 8
        let c = disk(64, 128);
        let g = ScalarField::from_fn(&c, "g", |t, y| y.cos() * (1.0 + t));
        assert!(dyadic_harness(&c, None, &g, None, 0.5, Some(5), 0).unwrap().pass);
        assert!(!dyadic_harness(&c, None, &g, None, 0.5, Some(8), 0).unwrap().pass);
    }

    #[test]
    fn expansion_of_exact_disk_radius_vanishes() {
        let c = disk(64, 64);
        let v = ScalarField::from_fn(&c, "v", |t, _| 2.0 * t - t * t);
        let wt = ScalarField::from_fn(&c, "w_tilde", |_, _| 0.0);
        let e = expansion_check(&c, &v, &wt, 5, 1e-10);
        assert!(e.sup_e.iter().all(|x| *x < 1e-10), "{:?}", e.sup_e);
        assert!(e.monotone && !e.flagged_non_solution);
        assert_eq!(e.levels.len(), 6);
    }

    #[test]
    fn expansion_flags_non_solution() {
        let c = disk(64, 64);
        let v = ScalarField::from_fn(&c, "v", |t, _| 2.0 * t);
        let wt = ScalarField::from_fn(&c, "w_tilde", |_, _| 0.0);
        let e = expansion_check(&c, &v, &wt, 5, 1e-10);
        assert!(e.sup_e.iter().all(|x| (x - 1.0).abs() < 1e-9));
        assert!(e.flagged_non_solution && !e.monotone);
    }

    #[test]
    fn probe_recovers_exponent_of_trace() {
        let c = flat(8, 1024);
        let p = c.perimeter;
        for alpha in [0.5, 0.8] {
            let w = ScalarField::from_fn(&c, "w", |_, y| {
                let s = if y > 0.5 * p { y - p } else { y };
                -1.0 + 0.4 * s.abs().powf(alpha)
            });
            let r = optimality_probe(&c, &w, 0.5, 4);
            let a = r.alpha_hat.unwrap();
            assert!((a - alpha).abs() < 0.05, "{alpha}: {a}");
            assert!(!r.saturated);
        }
        let w = ScalarField::from_fn(&c, "w", |_, _| -1.0);
        let r = optimality_probe(&c, &w, 0.5, 4);
        assert!(r.saturated && r.alpha_hat.is_none());
        assert_eq!(r.display(), "≥ 1");
        let w = ScalarField::from_fn(&c, "w", |_, y| (2.0 * std::f64::consts::PI * y / p).cos());
        assert!(optimality_probe(&c, &w, 0.5, 4).saturated);
    }
}
