//! The renormalized collar problem.
//!
//! With `v = e^{-u}` and `w = (v − 2d)/d²`, the blow-up equation becomes the
//! degenerate equation `L w + 2Δd = M_w(w)` with `L = div(d²∇) − 2`. The
//! weight `d²` vanishes on the boundary, so the discrete operator needs no
//! boundary condition at `T = 0`; a single Dirichlet row at `T = δ` carries
//! the matching data from the interior solve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ambient_gradient, collar_gradient, collar_laplacian, ScalarField};
use crate::geometry::CollarChart;
use crate::interior::InteriorSolution;
use crate::linalg::{pcg, CsrMatrix, Preconditioner, TripletBuilder};

/// Threshold for the denominator `2 + T w`.
pub const TOL_POS: f64 = 1e-8;

/// Finite-volume discretization of `L` on a chart.
///
/// `(L_h f)_ij = [a₊(f_{i+1} − f_i) − a₋(f_i − f_{i−1})]/(J ΔV_i)
///             + [b₊(f_{j+1} − f_j) − b₋(f_j − f_{j−1})]/(J h_Y) − 2 f_ij`
/// with `a_{i+½,j} = J T²/ΔT` at T half nodes and `b_{i,j+½} = T²/(J h_Y)` at
/// Y half nodes. Rows scaled by `J ΔV h_Y` form a symmetric matrix.
#[derive(Debug, Clone)]
pub struct CollarOperator {
    pub n_t: usize,
    pub n_y: usize,
    /// `a_{i+½,j}` for `i = 0..n_t`, indexed `i * n_y + j`.
    pub flux_t: Vec<f64>,
    /// `b_{i,j+½}` for `i = 0..=n_t`.
    pub flux_y: Vec<f64>,
    /// Control-volume widths `ΔV_i`.
    pub volume: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub h_y: f64,
    /// `−W L_h` restricted to the unknown rows `i < n_t`.
    pub matrix: CsrMatrix,
    /// Row weights `W = J ΔV h_Y`.
    pub weights: Vec<f64>,
    pub cg_tol: f64,
}

/// Assemble the discrete `L` on `chart`.
pub fn assemble_l(chart: &CollarChart) -> Result<CollarOperator> {
    let (nt, ny) = (chart.n_t, chart.n_y);
    let t = &chart.t_nodes;
    let hy = chart.h_y();
    for (k, j) in chart.jacobian.iter().enumerate() {
        if *j <= 0.0 {
            return Err(Error::DegenerateChart {
                t: t[k / ny],
                y: chart.y_nodes[k % ny],
                jacobian: *j,
            });
        }
    }
    let mut flux_t = vec![0.0; nt * ny];
    for i in 0..nt {
        let tm = 0.5 * (t[i] + t[i + 1]);
        for j in 0..ny {
            let jac = 1.0 - chart.kappa_y[j] * tm;
            flux_t[i * ny + j] = jac * tm * tm / (t[i + 1] - t[i]);
        }
    }
    let mut flux_y = vec![0.0; (nt + 1) * ny];
    for i in 0..=nt {
        for j in 0..ny {
            let jac = 1.0 - chart.kappa_half[j] * t[i];
            flux_y[i * ny + j] = t[i] * t[i] / (jac * hy);
        }
    }
    let volume: Vec<f64> = (0..=nt)
        .map(|i| {
            let hi = if i < nt { 0.5 * (t[i] + t[i + 1]) } else { t[nt] };
            let lo = if i > 0 { 0.5 * (t[i - 1] + t[i]) } else { 0.0 };
            hi - lo
        })
        .collect();
    let weights: Vec<f64> = (0..nt * ny)
        .map(|k| chart.jacobian[k] * volume[k / ny] * hy)
        .collect();

    let n = nt * ny;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
            let a_plus = hy * flux_t[i * ny + j];
            let a_minus = if i > 0 { hy * flux_t[(i - 1) * ny + j] } else { 0.0 };
            let b_plus = volume[i] * flux_y[i * ny + j];
            let b_minus = volume[i] * flux_y[i * ny + jm];
            let mut row = vec![(k, a_plus + a_minus + b_plus + b_minus + 2.0 * weights[k])];
            if i + 1 < nt {
                row.push((k + ny, -a_plus));
            }
            if i > 0 {
                row.push((k - ny, -a_minus));
            }
            if b_plus != 0.0 || b_minus != 0.0 {
                row.push((i * ny + jp, -b_plus));
                row.push((i * ny + jm, -b_minus));
            }
            row
        })
        .collect();
    let mut tb = TripletBuilder::new(n);
    for (k, r) in rows.into_iter().enumerate() {
        tb.set_row(k, r);
    }
    Ok(CollarOperator {
        n_t: nt,
        n_y: ny,
        flux_t,
        flux_y,
        volume,
        jacobian: chart.jacobian.clone(),
        h_y: hy,
        matrix: tb.build(),
        weights,
        cg_tol: 1e-14,
    })
}

impl CollarOperator {
    /// `L_h f` on rows `i < n_t`; the Dirichlet row `i = n_t` is reported as 0.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let (nt, ny) = (self.n_t, self.n_y);
        let mut out = vec![0.0; (nt + 1) * ny];
        out[..nt * ny]
            .par_iter_mut()
            .enumerate()
            .for_each(|(k, o)| {
                let (i, j) = (k / ny, k % ny);
                let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
                let c = f[k];
                let up = self.flux_t[k] * (f[k + ny] - c);
                let down = if i > 0 {
                    self.flux_t[k - ny] * (c - f[k - ny])
                } else {
                    0.0
                };
                let right = self.flux_y[k] * (f[i * ny + jp] - c);
                let left = self.flux_y[i * ny + jm] * (c - f[i * ny + jm]);
                let jac = self.jacobian[k];
                *o = (up - down) / (jac * self.volume[i]) + (right - left) / (jac * self.h_y)
                    - 2.0 * c;
            });
        out
    }

    /// Solve `L_h f = rhs` on rows `i < n_t` with `f = dirichlet` at `T = δ`.
    pub fn solve(&self, rhs: &[f64], dirichlet: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let (nt, ny) = (self.n_t, self.n_y);
        let n = nt * ny;
        let mut b: Vec<f64> = (0..n).map(|k| -self.weights[k] * rhs[k]).collect();
        for j in 0..ny {
            let k = (nt - 1) * ny + j;
            b[k] += self.h_y * self.flux_t[k] * dirichlet[j];
        }
        let mut x: Vec<f64> = match guess {
            Some(g) => g[..n].to_vec(),
            None => vec![0.0; n],
        };
        pcg(
            &self.matrix,
            &b,
            &mut x,
            self.cg_tol,
            50_000,
            Preconditioner::IncompleteCholesky,
        )
        .map_err(|e| match e {
            Error::SingularSystem(m) => Error::SingularSystem(format!("collar operator: {m}")),
            other => other,
        })?;
        x.extend_from_slice(dirichlet);
        Ok(x)
    }
}

/// `2Δd = −2κ/(1 − κT)` at every node.
pub fn two_laplacian_distance(chart: &CollarChart) -> Vec<f64> {
    let ny = chart.n_y;
    (0..chart.len())
        .map(|k| -2.0 * chart.kappa_y[k % ny] / chart.jacobian[k])
        .collect()
}

/// `M_w(f) = T²/(2 + Tw)·[2f ∂_T w + T ∇w·∇f] − 2fTΔd`, with the ambient
/// dot product `w_T f_T + J⁻² w_Y f_Y`.
pub fn apply_mw(chart: &CollarChart, w: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
    let (wt, wy) = ambient_gradient(chart, w)?;
    let (ft, fy) = ambient_gradient(chart, f)?;
    let ny = chart.n_y;
    let mut out = Vec::with_capacity(chart.len());
    for k in 0..chart.len() {
        let (i, j) = (k / ny, k % ny);
        let t = chart.t_nodes[i];
        let denom = 2.0 + t * w.values[k];
        if denom <= TOL_POS {
            return Err(Error::VanishingDenominator {
                i_t: i,
                i_y: j,
                value: denom,
            });
        }
        let fv = f.values[k];
        let dot = wt.values[k] * ft.values[k] + wy.values[k] * fy.values[k];
        let lap_d = -chart.kappa_y[j] / chart.jacobian[k];
        out.push(t * t / denom * (2.0 * fv * wt.values[k] + t * dot) - 2.0 * fv * t * lap_d);
    }
    Ok(ScalarField::on_chart(chart, "M_w", out))
}

/// Solve `L_h w₀ = −2Δd` with `w₀ = dirichlet` at `T = δ`.
pub fn solve_w0(chart: &CollarChart, dirichlet: &[f64]) -> Result<ScalarField> {
    let op = assemble_l(chart)?;
    solve_w0_with(&op, chart, dirichlet)
}

pub fn solve_w0_with(op: &CollarOperator, chart: &CollarChart, dirichlet: &[f64]) -> Result<ScalarField> {
    let rhs: Vec<f64> = two_laplacian_distance(chart).iter().map(|x| -x).collect();
    let w0 = op.solve(&rhs, dirichlet, None)?;
    Ok(ScalarField::on_chart(chart, "w0", w0))
}

/// Default `w₀` data at `T = δ`: `−κ(Y)`.
pub fn default_w0_data(chart: &CollarChart) -> Vec<f64> {
    chart.kappa_y.iter().map(|k| -k).collect()
}

/// Matching data `w(δ, Y) = (v − 2δ)/δ²` with `v = e^{−u}` interpolated
/// from the interior solution at `γ(Y) + δν(Y)`.
pub fn matching_data(chart: &CollarChart, interior: &InteriorSolution) -> Result<Vec<f64>> {
    let delta = chart.delta;
    (0..chart.n_y)
        .map(|j| {
            let p = chart
                .ambient(delta, j)
                .ok_or_else(|| Error::config("chart", "matching needs a chart backed by a curve"))?;
            let v = interior
                .interpolate(p, |u| (-u).exp())
                .ok_or(Error::OutsideDomain { x: p[0], y: p[1] })?;
            Ok((v - 2.0 * delta) / (delta * delta))
        })
        .collect()
}

/// Matching data as a truncated Fourier series in arclength.
///
/// Pointwise interpolation from the interior grid leaves grid-scale noise
/// in Y whose second differences grow under collar refinement. Projecting
/// onto the lowest modes gives data that is the same smooth function on
/// every collar grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchingSeries {
    pub perimeter: f64,
    /// `[a0, a1, b1, a2, b2, ...]` for `a0 + Σ a_m cos(2πmY/P) + b_m sin(2πmY/P)`.
    pub coeffs: Vec<f64>,
    /// Fraction of the sampled energy (excluding the mean) dropped by the
    /// truncation.
    pub tail_fraction: f64,
}

/// Default number of retained modes and sample count for [`MatchingSeries`].
pub const MATCH_MODES: usize = 32;
pub const MATCH_SAMPLES: usize = 1024;

impl MatchingSeries {
    pub fn constant(perimeter: f64, value: f64) -> Self {
        Self {
            perimeter,
            coeffs: vec![value],
            tail_fraction: 0.0,
        }
    }

    /// Project equispaced samples (starting at `Y = 0`) onto `modes` modes.
    pub fn from_samples(perimeter: f64, samples: &[f64], modes: usize) -> Self {
        let n = samples.len();
        let modes = modes.min((n - 1) / 2);
        let mut coeffs = vec![samples.iter().sum::<f64>() / n as f64];
        let mut kept = 0.0;
        for m in 1..=modes {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, v) in samples.iter().enumerate() {
                let arg = 2.0 * std::f64::consts::PI * ((m * i) % n) as f64 / n as f64;
                a += v * arg.cos();
                b += v * arg.sin();
            }
            let (a, b) = (2.0 * a / n as f64, 2.0 * b / n as f64);
            kept += 0.5 * (a * a + b * b);
            coeffs.push(a);
            coeffs.push(b);
        }
        let total: f64 = samples.iter().map(|v| (v - coeffs[0]).powi(2)).sum::<f64>() / n as f64;
        let tail_fraction = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };
        Self {
            perimeter,
            coeffs,
            tail_fraction,
        }
    }

    /// Sample `(v − 2δ)/δ²` from the interior solution along the δ-curve.
    pub fn from_interior(
        chart: &CollarChart,
        interior: &InteriorSolution,
        samples: usize,
        modes: usize,
    ) -> Result<Self> {
        let curve = match &chart.source {
            crate::geometry::ChartSource::Curve(c) => c.clone(),
            _ => return Err(Error::config("chart", "matching needs a chart backed by a curve")),
        };
        let delta = chart.delta;
        let values = (0..samples)
            .into_par_iter()
            .map(|i| {
                let f = curve.frame(chart.perimeter * i as f64 / samples as f64);
                let p = [f.point[0] + delta * f.normal[0], f.point[1] + delta * f.normal[1]];
                let v = interior
                    .interpolate(p, |u| (-u).exp())
                    .ok_or(Error::OutsideDomain { x: p[0], y: p[1] })?;
                Ok((v - 2.0 * delta) / (delta * delta))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self::from_samples(chart.perimeter, &values, modes))
    }

    pub fn eval(&self, y: f64) -> f64 {
        let base = 2.0 * std::f64::consts::PI * y / self.perimeter;
        let mut acc = self.coeffs[0];
        for (m, ab) in self.coeffs[1..].chunks(2).enumerate() {
            let arg = base * (m + 1) as f64;
            acc += ab[0] * arg.cos() + ab[1] * arg.sin();
        }
        acc
    }

    pub fn on_chart(&self, chart: &CollarChart) -> Vec<f64> {
        chart.y_nodes.iter().map(|y| self.eval(*y)).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub max_outer: usize,
    pub tol_fix: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_outer: 60,
            tol_fix: 1e-10,
        }
    }
}

/// Converged collar state.
#[derive(Debug, Clone)]
pub struct RenormalizedState {
    pub w: ScalarField,
    pub w0: ScalarField,
    pub w_tilde: ScalarField,
    pub v: ScalarField,
    pub match_data: Vec<f64>,
    pub iterations: usize,
    pub updates: Vec<f64>,
    pub converged: bool,
}

/// Picard iteration `L_h w_{n+1} = M_{w_n}(w_n) − 2Δd`, `w_{n+1}(δ) = match`.
pub fn solve_w_fuchsian(
    chart: &CollarChart,
    match_data: &[f64],
    w_init: Option<&ScalarField>,
    opts: FixedPointOptions,
) -> Result<RenormalizedState> {
    let op = assemble_l(chart)?;
    let w0 = solve_w0_with(&op, chart, &default_w0_data(chart))?;
    solve_w_fuchsian_with(&op, chart, match_data, &w0, w_init, opts)
}

pub fn solve_w_fuchsian_with(
    op: &CollarOperator,
    chart: &CollarChart,
    match_data: &[f64],
    w0: &ScalarField,
    w_init: Option<&ScalarField>,
    opts: FixedPointOptions,
) -> Result<RenormalizedState> {
    if match_data.len() != chart.n_y {
        return Err(Error::Shape(format!(
            "matching data has {} values, chart has {} Y nodes",
            match_data.len(),
            chart.n_y
        )));
    }
    let two_lap = two_laplacian_distance(chart);
    let mut w = w_init.unwrap_or(w0).clone().with_tag("w");
    let nt = chart.n_t;
    let ny = chart.n_y;
    w.values[nt * ny..].copy_from_slice(match_data);
    let mut updates = Vec::new();
    let mut growth = 0;
    let mut converged = false;
    for _ in 0..opts.max_outer {
        let m = apply_mw(chart, &w, &w)?;
        let rhs: Vec<f64> = m.values.iter().zip(&two_lap).map(|(a, b)| a - b).collect();
        let next = op.solve(&rhs, match_data, Some(&w.values))?;
        let update = next
            .iter()
            .zip(&w.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        w.values = next;
        if let Some(&prev) = updates.last() {
            if update > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        updates.push(update);
        if growth >= 5 {
            return Err(Error::FixedPointDiverged {
                iterations: updates.len(),
                update,
            });
        }
        if update < opts.tol_fix {
            converged = true;
            break;
        }
    }
    let w_tilde = w.zip(w0, "w_tilde", |a, b| a - b)?;
    let v = reconstruct_v(chart, &w)?;
    Ok(RenormalizedState {
        iterations: updates.len(),
        w,
        w0: w0.clone(),
        w_tilde,
        v,
        match_data: match_data.to_vec(),
        updates,
        converged,
    })
}

fn reconstruct_v(chart: &CollarChart, w: &ScalarField) -> Result<ScalarField> {
    let ny = chart.n_y;
    let mut out = Vec::with_capacity(chart.len());
    for (k, wv) in w.values.iter().enumerate() {
        let t = chart.t_nodes[k / ny];
        let v = 2.0 * t + t * t * wv;
        if t > 0.0 && v <= 0.0 {
            return Err(Error::VanishingDenominator {
                i_t: k / ny,
                i_y: k % ny,
                value: v,
            });
        }
        out.push(v);
    }
    Ok(ScalarField::on_chart(chart, "v", out))
}

/// `v = 2T + T²w` and `u = −ln v` (tagged blow-up, `+∞` at `T = 0`).
pub fn reconstruct(chart: &CollarChart, state: &RenormalizedState) -> Result<(ScalarField, ScalarField)> {
    let v = reconstruct_v(chart, &state.w)?;
    let u = v.map("u_blowup", |x| if x > 0.0 { -x.ln() } else { f64::INFINITY });
    Ok((v, u))
}

/// `L_h w + 2Δd − M_w(w)` on the discrete operator (rows `i < n_t`).
pub fn discrete_closure(op: &CollarOperator, chart: &CollarChart, w: &ScalarField) -> Result<ScalarField> {
    let lw = op.apply(&w.values);
    let m = apply_mw(chart, w, w)?;
    let two_lap = two_laplacian_distance(chart);
    let n = chart.n_t * chart.n_y;
    let vals = (0..chart.len())
        .map(|k| if k < n { lw[k] + two_lap[k] - m.values[k] } else { 0.0 })
        .collect();
    Ok(ScalarField::on_chart(chart, "closure", vals))
}

/// `T²Δw + 2T w_T − 2w + 2Δd − M_w(w)` evaluated with the non-conservative
/// stencils of [`collar_laplacian`]: an independent check of the divergence
/// discretization.
pub fn nondivergence_closure(chart: &CollarChart, w: &ScalarField) -> Result<ScalarField> {
    let lap = collar_laplacian(chart, w)?;
    let (wt, _) = collar_gradient(chart, w)?;
    let m = apply_mw(chart, w, w)?;
    let two_lap = two_laplacian_distance(chart);
    let ny = chart.n_y;
    let vals = (0..chart.len())
        .map(|k| {
            let t = chart.t_nodes[k / ny];
            t * t * lap.values[k] + 2.0 * t * wt.values[k] - 2.0 * w.values[k] + two_lap[k]
                - m.values[k]
        })
        .collect();
    Ok(ScalarField::on_chart(chart, "closure_nd", vals))
}

/// Largest `|f|` over nodes with `lo ≤ T ≤ hi`.
pub fn sup_over_band(chart: &CollarChart, f: &ScalarField, lo: f64, hi: f64) -> f64 {
    let ny = chart.n_y;
    f.values
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = chart.t_nodes[k / ny];
            t >= lo && t <= hi
        })
        .fold(0.0, |m: f64, (_, v)| m.max(v.abs()))
}

/// Summary quantities reported for a collar solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollarReport {
    pub delta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub iterations: usize,
    pub converged: bool,
    pub discrete_closure: f64,
    pub nondivergence_closure: f64,
    pub gamma_fit: f64,
    pub sup_w: f64,
    pub sup_t2_grad_w: f64,
    pub trace_error: f64,
    pub w_trace: Vec<f64>,
}

/// `max |w̃| / (T ln(1/T))` over `0 < T ≤ δ`.
pub fn fit_gamma(chart: &CollarChart, w_tilde: &ScalarField) -> f64 {
    let ny = chart.n_y;
    let mut g = 0.0f64;
    for (k, v) in w_tilde.values.iter().enumerate() {
        let t = chart.t_nodes[k / ny];
        if t > 0.0 && t < 1.0 {
            g = g.max(v.abs() / (t * (1.0 / t).ln()));
        }
    }
    g
}

/// `sup T²|∇w|` with the ambient gradient.
pub fn sup_t2_gradient(chart: &CollarChart, w: &ScalarField) -> Result<f64> {
    let (wt, wy) = ambient_gradient(chart, w)?;
    let ny = chart.n_y;
    Ok((0..chart.len()).fold(0.0, |m: f64, k| {
        let t = chart.t_nodes[k / ny];
        m.max(t * t * wt.values[k].hypot(wy.values[k]))
    }))
}

pub fn collar_report(
    op: &CollarOperator,
    chart: &CollarChart,
    state: &RenormalizedState,
) -> Result<CollarReport> {
    let h = chart.first_layer();
    let dc = discrete_closure(op, chart, &state.w)?;
    let nd = nondivergence_closure(chart, &state.w)?;
    let trace: Vec<f64> = state.w.row(0).to_vec();
    let trace_error = trace
        .iter()
        .zip(&chart.kappa_y)
        .fold(0.0f64, |m, (w, k)| m.max((w + k).abs()));
    Ok(CollarReport {
        delta: chart.delta,
        n_t: chart.n_t,
        n_y: chart.n_y,
        iterations: state.iterations,
        converged: state.converged,
        discrete_closure: sup_over_band(chart, &dc, h, chart.delta * (1.0 - 1e-12)),
        nondivergence_closure: sup_over_band(chart, &nd, h, chart.delta * (1.0 - 1e-12)),
        gamma_fit: fit_gamma(chart, &state.w_tilde),
        sup_w: state.w.sup_norm(),
        sup_t2_grad_w: sup_t2_gradient(chart, &state.w)?,
        trace_error,
        w_trace: trace,
    })
}

/// Closure residual of the same problem on nested grids, compared at the
/// coarse nodes `0 < T < δ` (fine index `2i`, `2j`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureStudy {
    pub coarse: f64,
    pub fine: f64,
    pub observed_order: f64,
    /// Richardson estimate of the fine-grid discretization error, `|R_c − R_f|/3`.
    pub fine_error_estimate: f64,
}

pub fn closure_study(
    coarse: (&CollarChart, &ScalarField),
    fine: (&CollarChart, &ScalarField),
) -> Result<ClosureStudy> {
    let (cc, cw) = coarse;
    let (fc, fw) = fine;
    if fc.n_t != 2 * cc.n_t || fc.n_y != 2 * cc.n_y {
        return Err(Error::Shape("closure study needs a once-refined grid".into()));
    }
    let rc = nondivergence_closure(cc, cw)?;
    let rf = nondivergence_closure(fc, fw)?;
    let (mut sc, mut sf, mut diff) = (0.0f64, 0.0f64, 0.0f64);
    for i in 1..cc.n_t {
        for j in 0..cc.n_y {
            let a = rc.values[cc.idx(i, j)];
            let b = rf.values[fc.idx(2 * i, 2 * j)];
            sc = sc.max(a.abs());
            sf = sf.max(b.abs());
            diff = diff.max((a - b).abs());
        }
    }
    Ok(ClosureStudy {
        coarse: sc,
        fine: sf,
        observed_order: (sc / sf).log2(),
        fine_error_estimate: diff / 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        arclength_reparametrize, build_collar_chart, build_profile_chart, FourierCurve, Grading,
    };
    use std::sync::Arc;

    fn disk_chart(nt: usize, ny: usize, grading: Grading) -> CollarChart {
        let c = arclength_reparametrize(&FourierCurve::circle(1.0), 1024, "disk", "analytic").unwrap();
        build_collar_chart(Arc::new(c), 0.2, nt, ny, grading).unwrap()
    }

    fn flat_chart(nt: usize, grading: Grading) -> CollarChart {
        build_profile_chart(Arc::new(|_| (0.0, 0.0)), 1.0, 0.2, nt, 16, grading).unwrap()
    }

    #[test]
    fn constants_and_indicial_root() {
        let chart = disk_chart(16, 32, Grading::default());
        let op = assemble_l(&chart).unwrap();
        let c = vec![1.7; chart.len()];
        let lc = op.apply(&c);
        assert!(lc[..16 * 32].iter().all(|v| *v == -3.4));

        let flat = flat_chart(16, Grading::Uniform);
        let op = assemble_l(&flat).unwrap();
        let f: Vec<f64> = (0..flat.len()).map(|k| flat.t_nodes[k / 16]).collect();
        let lf = op.apply(&f);
        for i in 1..16 {
            assert!(lf[i * 16].abs() < 1e-14);
        }
    }

    #[test]
    fn disk_identity_for_minus_one() {
        let chart = disk_chart(16, 32, Grading::default());
        let op = assemble_l(&chart).unwrap();
        let w = ScalarField::from_fn(&chart, "w", |_, _| -1.0);
        let lw = op.apply(&w.values);
        let m = apply_mw(&chart, &w, &w).unwrap();
        for i in 0..16 {
            let t = chart.t_nodes[i];
            let k = chart.idx(i, 3);
            assert!((lw[k] - 2.0).abs() < 1e-13);
            assert!((lw[k] + two_laplacian_distance(&chart)[k] + 2.0 * t / (1.0 - t)).abs() < 1e-12);
            assert!((m.values[k] + 2.0 * t / (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn mw_vanishes_for_zero_and_constants_on_flat() {
        let flat = flat_chart(8, Grading::Uniform);
        let c = ScalarField::from_fn(&flat, "c", |_, _| 0.3);
        assert!(apply_mw(&flat, &c, &c).unwrap().sup_norm() == 0.0);
        let disk = disk_chart(8, 16, Grading::Uniform);
        let w = ScalarField::from_fn(&disk, "w", |t, y| t + y.sin());
        let z = ScalarField::from_fn(&disk, "z", |_, _| 0.0);
        assert!(apply_mw(&disk, &w, &z).unwrap().sup_norm() == 0.0);
        let bad = ScalarField::from_fn(&disk, "w", |_, _| -20.0);
        assert!(matches!(
            apply_mw(&disk, &bad, &bad),
            Err(Error::VanishingDenominator { .. })
        ));
    }

    #[test]
    fn operator_is_symmetric_after_weighting() {
        let chart = disk_chart(16, 32, Grading::default());
        let op = assemble_l(&chart).unwrap();
        assert!(op.matrix.relative_asymmetry() <= 1e-12);
    }

    #[test]
    fn w0_traces_minus_curvature() {
        let flat = flat_chart(16, Grading::default());
        let w0 = solve_w0(&flat, &[0.0; 16]).unwrap();
        assert!(w0.sup_norm() < 1e-14);
        // the trace error of the first row is about T₁ ln(1/T₁)
        let mut errs = vec![];
        for (nt, ny, g) in [(16, 32, Grading::Uniform), (32, 64, Grading::Uniform), (64, 128, Grading::default())] {
            let chart = disk_chart(nt, ny, g);
            let w0 = solve_w0(&chart, &default_w0_data(&chart)).unwrap();
            errs.push(w0.row(0).iter().fold(0.0f64, |m, v| m.max((v + 1.0).abs())));
        }
        assert!(errs[1] < errs[0] && errs[2] < 1e-4, "{errs:?}");
    }

    #[test]
    fn w0_trace_converges_with_perturbed_data() {
        // O(1) perturbation of the δ data decays like T toward the boundary
        let mut errs = vec![];
        for (nt, ny) in [(16, 32), (32, 64), (64, 128)] {
            let chart = disk_chart(nt, ny, Grading::Uniform);
            let data: Vec<f64> = chart.y_nodes.iter().map(|y| -1.0 + 0.5 * y.cos()).collect();
            let w0 = solve_w0(&chart, &data).unwrap();
            errs.push(w0.row(0).iter().fold(0.0f64, |m, v| m.max((v + 1.0).abs())));
        }
        assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
    }

    #[test]
    fn disk_fixed_point_is_exact() {
        let chart = disk_chart(32, 64, Grading::default());
        let st = solve_w_fuchsian(&chart, &vec![-1.0; 64], None, FixedPointOptions::default()).unwrap();
        assert!(st.converged);
        assert!(st.w.values.iter().all(|v| (v + 1.0).abs() < 1e-9));
        let (v, u) = reconstruct(&chart, &st).unwrap();
        for i in 1..=32 {
            let t = chart.t_nodes[i];
            assert!((v.at(i, 0) - (2.0 * t - t * t)).abs() < 1e-12);
            assert!((u.at(i, 0) + (2.0 * t - t * t).ln()).abs() < 1e-6);
        }
        assert!(u.at(0, 0).is_infinite());
        u.check_finite().unwrap();
    }

    #[test]
    fn flat_toy_stays_zero() {
        let flat = flat_chart(16, Grading::default());
        let st = solve_w_fuchsian(&flat, &[0.0; 16], None, FixedPointOptions::default()).unwrap();
        assert!(st.w.sup_norm() < 1e-14);
        let (v, _) = reconstruct(&flat, &st).unwrap();
        for i in 0..=16 {
            assert!((v.at(i, 2) - 2.0 * flat.t_nodes[i]).abs() < 1e-15);
        }
    }
}
