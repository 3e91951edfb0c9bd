//! Log-corrected barriers `u_A = −ln[2T + T²(w₀ + A·T ln T)]`.
//!
//! Positive `A` gives a super-solution near the boundary and negative `A` a
//! sub-solution. Defects are evaluated through the renormalized identity
//! `−Δu + 4e^{2u} = (L W + 2Δd − M_W(W))/v` with `W = w₀ + A·T ln T` and
//! `v = 2T + T²W`, which keeps full relative accuracy down to the first
//! layer, where the direct Laplacian of `u` loses all digits.

use serde::{Deserialize, Serialize};

use crate::collar::{apply_mw, assemble_l, two_laplacian_distance, CollarOperator};
use crate::error::{Error, Result};
use crate::field::{collar_laplacian, ScalarField};
use crate::geometry::CollarChart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Super,
    Sub,
    Neutral,
}

#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub w0_ref: ScalarField,
    pub a: f64,
}

impl BarrierSpec {
    pub fn new(w0_ref: ScalarField, a: f64) -> Self {
        Self { w0_ref, a }
    }

    pub fn kind(&self) -> BarrierKind {
        if self.a > 0.0 {
            BarrierKind::Super
        } else if self.a < 0.0 {
            BarrierKind::Sub
        } else {
            BarrierKind::Neutral
        }
    }
}

/// `T ln T`, with its limit 0 at `T = 0`.
pub fn t_log_t(t: f64) -> f64 {
    if t > 0.0 { t * t.ln() } else { 0.0 }
}

/// Renormalized barrier `W = w₀ + A·T ln T`.
pub fn barrier_w(chart: &CollarChart, spec: &BarrierSpec) -> Result<ScalarField> {
    if spec.w0_ref.values.len() != chart.len() {
        return Err(Error::Shape("w0 does not live on this chart".into()));
    }
    let ny = chart.n_y;
    let vals = spec
        .w0_ref
        .values
        .iter()
        .enumerate()
        .map(|(k, w)| w + spec.a * t_log_t(chart.t_nodes[k / ny]))
        .collect();
    Ok(ScalarField::on_chart(chart, "W", vals))
}

/// `v_A = 2T + T²W`, checked positive for `T > 0`.
pub fn barrier_v(chart: &CollarChart, spec: &BarrierSpec) -> Result<ScalarField> {
    let w = barrier_w(chart, spec)?;
    let ny = chart.n_y;
    let mut vals = Vec::with_capacity(chart.len());
    for (k, wv) in w.values.iter().enumerate() {
        let t = chart.t_nodes[k / ny];
        let v = 2.0 * t + t * t * wv;
        if t > 0.0 && !(v > 0.0) {
            return Err(Error::NonPositiveArgument {
                i_t: k / ny,
                i_y: k % ny,
                value: v,
            });
        }
        vals.push(v);
    }
    Ok(ScalarField::on_chart(chart, "v_barrier", vals))
}

/// `u_A = −ln v_A`, `+∞` on the `T = 0` row.
pub fn barrier_field(chart: &CollarChart, spec: &BarrierSpec) -> Result<ScalarField> {
    let v = barrier_v(chart, spec)?;
    Ok(v.map("u_barrier_blowup", |x| if x > 0.0 { -x.ln() } else { f64::INFINITY }))
}

/// Defect `−Δu_A + 4e^{2u_A}` by the renormalized identity, on rows
/// `0 < T < δ`. Rows `T = 0` and `T = δ` are set to 0.
pub fn defect(op: &CollarOperator, chart: &CollarChart, spec: &BarrierSpec) -> Result<ScalarField> {
    let w = barrier_w(chart, spec)?;
    let v = barrier_v(chart, spec)?;
    let lw = op.apply(&w.values);
    let m = apply_mw(chart, &w, &w)?;
    let two_lap = two_laplacian_distance(chart);
    let (nt, ny) = (chart.n_t, chart.n_y);
    let vals = (0..chart.len())
        .map(|k| {
            let i = k / ny;
            if i == 0 || i == nt {
                0.0
            } else {
                (lw[k] + two_lap[k] - m.values[k]) / v.values[k]
            }
        })
        .collect();
    Ok(ScalarField::on_chart(chart, "defect", vals))
}

/// Defect from the collar Laplacian of `u_A` itself, on rows `T > 0`.
pub fn defect_direct(chart: &CollarChart, spec: &BarrierSpec) -> Result<ScalarField> {
    let u = barrier_field(chart, spec)?;
    let ny = chart.n_y;
    // the T = 0 row is infinite; replace it by a finite value that only
    // feeds the one-sided stencils of the first rows
    let mut finite = u.clone();
    for j in 0..ny {
        finite.values[j] = 0.0;
    }
    let lap = collar_laplacian(chart, &finite)?;
    let vals = (0..chart.len())
        .map(|k| {
            if k < 2 * ny {
                0.0
            } else {
                -lap.values[k] + 4.0 * (2.0 * u.values[k]).exp()
            }
        })
        .collect();
    Ok(ScalarField::on_chart(chart, "defect_direct", vals))
}

/// Defect relative to the nonlinearity, `defect / (4e^{2u}) = v²·defect/4`.
pub fn relative_defect(chart: &CollarChart, spec: &BarrierSpec, defect: &ScalarField) -> Result<ScalarField> {
    let v = barrier_v(chart, spec)?;
    defect.zip(&v, "relative_defect", |d, v| 0.25 * d * v * v)
}

/// One doubling trial of the admissibility search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trial {
    pub a: f64,
    pub min_defect: f64,
    pub max_defect: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibleA {
    pub a_plus: f64,
    pub a_minus: f64,
    pub trials: Vec<Trial>,
}

/// Default bound for the doubling search.
pub const DEFAULT_A_MAX: f64 = 1024.0;

fn scan_sign(op: &CollarOperator, chart: &CollarChart, w0: &ScalarField, a: f64) -> Result<(Trial, (usize, usize, f64))> {
    let spec = BarrierSpec::new(w0.clone(), a);
    let d = defect(op, chart, &spec)?;
    let ny = chart.n_y;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut worst = (0, 0, 0.0);
    for i in 1..chart.n_t {
        for j in 0..ny {
            let x = d.values[i * ny + j];
            let bad = if a > 0.0 { -x } else { x };
            if bad > worst.2 || (worst.2 == 0.0 && i == 1 && j == 0) {
                worst = (i, j, x);
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let passed = if a > 0.0 { lo >= 0.0 } else { hi <= 0.0 };
    Ok((
        Trial {
            a,
            min_defect: lo,
            max_defect: hi,
            passed,
            note: None,
        },
        worst,
    ))
}

/// Doubling search `|A| = 1, 2, 4, … ≤ a_max` for the first `A` of each sign
/// whose defect has uniform sign on `0 < T < δ`.
pub fn find_a(chart: &CollarChart, w0: &ScalarField, a_max: f64) -> Result<AdmissibleA> {
    let op = assemble_l(chart)?;
    find_a_with(&op, chart, w0, a_max)
}

pub fn find_a_with(op: &CollarOperator, chart: &CollarChart, w0: &ScalarField, a_max: f64) -> Result<AdmissibleA> {
    let mut trials = Vec::new();
    let mut found = [None, None];
    for (slot, sign, kind) in [(0, 1.0, "super"), (1, -1.0, "sub")] {
        let mut a = 1.0;
        let mut worst = (0, 0, f64::NAN);
        while a <= a_max {
            match scan_sign(op, chart, w0, sign * a) {
                Ok((trial, w)) => {
                    let passed = trial.passed;
                    worst = w;
                    trials.push(trial);
                    if passed {
                        found[slot] = Some(sign * a);
                        break;
                    }
                }
                Err(Error::NonPositiveArgument { i_t, i_y, value }) => {
                    worst = (i_t, i_y, value);
                    trials.push(Trial {
                        a: sign * a,
                        min_defect: f64::NAN,
                        max_defect: f64::NAN,
                        passed: false,
                        note: Some(format!("barrier argument {value:e} at node ({i_t}, {i_y})")),
                    });
                }
                Err(e) => return Err(e),
            }
            a *= 2.0;
        }
        if found[slot].is_none() {
            return Err(Error::NoAdmissibleA {
                kind,
                a_max,
                i_t: worst.0,
                i_y: worst.1,
                defect: worst.2,
            });
        }
    }
    Ok(AdmissibleA {
        a_plus: found[0].unwrap(),
        a_minus: found[1].unwrap(),
        trials,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub i_t: usize,
    pub i_y: usize,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub tol: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Largest `u_− − u` and `u − u_+` over the band (negative when strict).
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub violations: Vec<Violation>,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Check `u_− − tol ≤ u ≤ u_+ + tol` on nodes with `band.0 ≤ T ≤ band.1`.
/// At most 50 violations are listed.
pub fn sandwich_check(
    chart: &CollarChart,
    u: &ScalarField,
    lower: &ScalarField,
    upper: &ScalarField,
    band: (f64, f64),
    tol: f64,
) -> SandwichReport {
    let ny = chart.n_y;
    let (mut lm, mut um) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut violations = Vec::new();
    for (k, &uv) in u.values.iter().enumerate() {
        let i = k / ny;
        let t = chart.t_nodes[i];
        if t < band.0 || t > band.1 || t == 0.0 {
            continue;
        }
        let (lo, hi) = (lower.values[k], upper.values[k]);
        lm = lm.max(lo - uv);
        um = um.max(uv - hi);
        for bound in [lo, hi] {
            let bad = if bound == lo { uv < lo - tol } else { uv > hi + tol };
            if bad && violations.len() < 50 {
                violations.push(Violation {
                    i_t: i,
                    i_y: k % ny,
                    t,
                    value: uv,
                    bound,
                });
            }
        }
    }
    SandwichReport {
        tol,
        lower_ok: lm <= tol,
        upper_ok: um <= tol,
        lower_margin: lm,
        upper_margin: um,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collar::solve_w0;
    use crate::geometry::{arclength_reparametrize, build_collar_chart, build_profile_chart, FourierCurve, Grading};
    use std::sync::Arc;

    fn disk_chart(nt: usize, ny: usize) -> CollarChart {
        let c = arclength_reparametrize(&FourierCurve::circle(1.0), 1024, "disk", "analytic").unwrap();
        build_collar_chart(Arc::new(c), 0.2, nt, ny, Grading::default()).unwrap()
    }

    fn constant(chart: &CollarChart, c: f64) -> ScalarField {
        ScalarField::from_fn(chart, "w0", |_, _| c)
    }

    #[test]
    fn barrier_examples() {
        let chart = disk_chart(16, 16);
        let exact = barrier_field(&chart, &BarrierSpec::new(constant(&chart, -1.0), 0.0)).unwrap();
        let flat = barrier_field(&chart, &BarrierSpec::new(constant(&chart, 0.0), 0.0)).unwrap();
        for i in 1..=16 {
            let t = chart.t_nodes[i];
            assert!((exact.at(i, 4) + (2.0 * t - t * t).ln()).abs() < 1e-14);
            assert!((flat.at(i, 4) + (2.0 * t).ln()).abs() < 1e-14);
        }
        assert!(exact.at(0, 0).is_infinite());
        exact.check_finite().unwrap();
        // monotone in A
        let mut prev = None;
        for a in [-10.0, -1.0, 0.0, 1.0, 10.0] {
            let u = barrier_field(&chart, &BarrierSpec::new(constant(&chart, -1.0), a)).unwrap();
            if let Some(p) = prev {
                let p: &ScalarField = &p;
                assert!((chart.n_y..chart.len()).all(|k| u.values[k] >= p.values[k]));
            }
            prev = Some(u);
        }
        let bad = BarrierSpec::new(constant(&chart, -60.0), 0.0);
        assert!(matches!(barrier_field(&chart, &bad), Err(Error::NonPositiveArgument { .. })));
    }

    #[test]
    fn disk_defect_signs() {
        let chart = disk_chart(32, 32);
        let op = assemble_l(&chart).unwrap();
        let w0 = constant(&chart, -1.0);
        let exact = BarrierSpec::new(w0.clone(), 0.0);
        let zero = relative_defect(&chart, &exact, &defect(&op, &chart, &exact).unwrap()).unwrap();
        assert!(zero.sup_norm() < 1e-14, "{}", zero.sup_norm());
        let plus = defect(&op, &chart, &BarrierSpec::new(w0.clone(), 10.0)).unwrap();
        let minus = defect(&op, &chart, &BarrierSpec::new(w0.clone(), -10.0)).unwrap();
        for k in chart.n_y..32 * 32 {
            assert!(plus.values[k] > 0.0 && minus.values[k] < 0.0);
        }
        let found = find_a_with(&op, &chart, &w0, DEFAULT_A_MAX).unwrap();
        assert_eq!((found.a_plus, found.a_minus), (1.0, -1.0));
    }

    #[test]
    fn direct_route_converges_to_identity() {
        // compare on the shared coarse nodes of nested grids
        let mut chart = disk_chart(32, 32);
        let mut gaps = vec![];
        for level in 0..3 {
            let op = assemble_l(&chart).unwrap();
            let w0 = solve_w0(&chart, &crate::collar::default_w0_data(&chart)).unwrap();
            let spec = BarrierSpec::new(w0, 3.0);
            let a = relative_defect(&chart, &spec, &defect(&op, &chart, &spec).unwrap()).unwrap();
            let b = relative_defect(&chart, &spec, &defect_direct(&chart, &spec).unwrap()).unwrap();
            let step = 1 << level;
            let gap = (2..32)
                .map(|i| chart.idx(i * step, 0))
                .map(|k| (a.values[k] - b.values[k]).abs())
                .fold(0.0, f64::max);
            gaps.push(gap);
            chart = chart.refined().unwrap();
        }
        assert!(gaps[0] / gaps[1] > 3.0 && gaps[1] / gaps[2] > 3.0, "{gaps:?}");
    }

    #[test]
    fn flat_toy_small_a_passes() {
        let chart = build_profile_chart(Arc::new(|_| (0.0, 0.0)), 1.0, 0.2, 32, 16, Grading::default()).unwrap();
        let found = find_a(&chart, &constant(&chart, 0.0), DEFAULT_A_MAX).unwrap();
        assert_eq!((found.a_plus, found.a_minus), (1.0, -1.0));
    }

    #[test]
    fn sandwich_examples() {
        let chart = disk_chart(32, 16);
        let w0 = constant(&chart, -1.0);
        let u = barrier_field(&chart, &BarrierSpec::new(w0.clone(), 0.0)).unwrap();
        let lo = barrier_field(&chart, &BarrierSpec::new(w0.clone(), -10.0)).unwrap();
        let hi = barrier_field(&chart, &BarrierSpec::new(w0.clone(), 10.0)).unwrap();
        let band = (chart.first_layer(), 0.2);
        assert!(sandwich_check(&chart, &u, &lo, &hi, band, 0.0).passed());
        assert!(sandwich_check(&chart, &u, &u, &u, band, 0.0).passed());
        let swapped = sandwich_check(&chart, &u, &hi, &lo, band, 0.0);
        assert!(!swapped.passed() && !swapped.violations.is_empty());
    }
}
