//! The model Fuchsian problem on the periodic half-strip
//! `{0 ≤ T ≤ θ, Y ∈ [−θ, θ)}`.
//!
//! The model operator factors as `L₀ = (D + 2)(D − 1) + T²∂²_Y` with
//! `D = T∂_T`. Its bounded inverse is explicit: transform `k` to
//! `k̃ = ∫₀¹ k(T/t, Y) dt` (so `(D − 1)k̃ = −k`), solve `Δh + k̃ = 0` with
//! `h(0) = 0`, `h_T(θ) = 0`, and lift `w₁ = T⁻²(D − 1)h`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::fd_weights;
use crate::field::ops::TStencils;
use crate::field::ScalarField;
use crate::linalg::solve_tridiagonal;
use crate::quadrature::GaussLegendre;

fn gauss16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

fn gauss3() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(3))
}

/// Relative energy above the mode cutoff that triggers a truncation warning.
pub const MODE_TRUNCATION_TOL: f64 = 1e-10;

/// Uniform grid on the half-strip. `t_nodes` has `n_t + 1` entries from 0
/// to θ; `y_nodes` has `n_y` periodic entries from −θ.
#[derive(Debug, Clone, PartialEq)]
pub struct StripGrid {
    pub theta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub t_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub m_max: usize,
}

impl StripGrid {
    pub fn new(theta: f64, n_t: usize, n_y: usize) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::config("theta", "strip depth must be positive"));
        }
        if n_t < 4 || n_y < 8 || n_y % 2 == 1 {
            return Err(Error::GridTooCoarse { n_t, n_y });
        }
        let ht = theta / n_t as f64;
        let hy = 2.0 * theta / n_y as f64;
        let mut t_nodes: Vec<f64> = (0..=n_t).map(|i| i as f64 * ht).collect();
        t_nodes[n_t] = theta;
        Ok(Self {
            theta,
            n_t,
            n_y,
            t_nodes,
            y_nodes: (0..n_y).map(|j| -theta + j as f64 * hy).collect(),
            m_max: n_y / 2,
        })
    }

    pub fn h_t(&self) -> f64 {
        self.theta / self.n_t as f64
    }

    pub fn h_y(&self) -> f64 {
        2.0 * self.theta / self.n_y as f64
    }

    pub fn len(&self) -> usize {
        (self.n_t + 1) * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i_t: usize, i_y: usize) -> usize {
        i_t * self.n_y + i_y
    }

    pub fn refined(&self) -> Result<Self> {
        Self::new(self.theta, 2 * self.n_t, 2 * self.n_y)
    }

    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0x6c62272e07bb0142;
        for x in [self.theta, self.n_t as f64, self.n_y as f64] {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    pub fn field(&self, tag: &str, values: Vec<f64>) -> ScalarField {
        ScalarField::on_tensor(tag, self.hash(), &self.t_nodes, &self.y_nodes, values)
    }

    pub fn from_fn(&self, tag: &str, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut v = Vec::with_capacity(self.len());
        for &t in &self.t_nodes {
            for &y in &self.y_nodes {
                v.push(f(t, y));
            }
        }
        self.field(tag, v)
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.values.len() != self.len() {
            return Err(Error::Shape(format!(
                "field `{}` has {} values, strip has {}",
                f.quantity_tag,
                f.values.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn column(&self, f: &ScalarField, j: usize) -> Vec<f64> {
        (0..=self.n_t).map(|i| f.values[self.idx(i, j)]).collect()
    }
}

/// How `k(T, ·)` is continued past `T = θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// `k(T, ·) = k(θ, ·)` for `T > θ`.
    #[default]
    Clamp,
    /// `k = 0` for `T > θ`.
    Zero,
}

/// Geometric panels `[T, 2T], [2T, 4T], …` clipped at θ. The weight `T/s²`
/// varies by a bounded factor on each.
fn panels(t: f64, theta: f64) -> impl Iterator<Item = (f64, f64)> {
    let mut a = t;
    std::iter::from_fn(move || {
        if a >= theta {
            return None;
        }
        let b = (2.0 * a).min(theta);
        let p = (a, b);
        a = b;
        Some(p)
    })
}

/// `k̃(T) = ∫₀¹ k(T/t) dt = [tail] + ∫_T^θ k(s) T/s² ds` for one profile.
pub fn tilde_integral(t: f64, theta: f64, ext: Extension, k: impl Fn(f64) -> f64) -> f64 {
    if t <= 0.0 {
        return k(0.0);
    }
    if t >= theta {
        return match ext {
            Extension::Clamp => k(theta),
            Extension::Zero => 0.0,
        };
    }
    let tail = match ext {
        Extension::Clamp => t / theta * k(theta),
        Extension::Zero => 0.0,
    };
    let gl = gauss16();
    tail + panels(t, theta)
        .map(|(a, b)| gl.integrate(a, b, |s| k(s) * t / (s * s)))
        .sum::<f64>()
}

/// `T∂_T k̃` by differentiating under the integral:
/// `∫_T^θ (T/s) k'(s) ds`, minus `(T/θ)k(θ)` for the zero extension.
pub fn tilde_log_derivative(
    t: f64,
    theta: f64,
    ext: Extension,
    k: impl Fn(f64) -> f64,
    dk: impl Fn(f64) -> f64,
) -> f64 {
    if t <= 0.0 || t >= theta {
        return 0.0;
    }
    let jump = match ext {
        Extension::Clamp => 0.0,
        Extension::Zero => t / theta * k(theta),
    };
    let gl = gauss16();
    panels(t, theta)
        .map(|(a, b)| gl.integrate(a, b, |s| dk(s) * t / s))
        .sum::<f64>()
        - jump
}

/// Cubic Lagrange interpolation of uniform nodal values.
fn cubic_at(values: &[f64], h: f64, s: f64) -> f64 {
    let n = values.len() - 1;
    let c = ((s / h).floor() as usize).min(n - 1);
    let start = c.saturating_sub(1).min(n - 3);
    let x = s / h - start as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * values[start + a];
    }
    acc
}

/// `k̃` on the grid, with `k` interpolated cubically in T between nodes.
pub fn tilde_transform(grid: &StripGrid, k: &ScalarField, ext: Extension) -> Result<ScalarField> {
    grid.check(k)?;
    let ht = grid.h_t();
    let cols: Vec<Vec<f64>> = (0..grid.n_y)
        .into_par_iter()
        .map(|j| {
            let col = grid.column(k, j);
            grid.t_nodes
                .iter()
                .map(|&t| {
                    tilde_integral(t, grid.theta, ext, |s| {
                        if s >= grid.theta {
                            col[grid.n_t]
                        } else {
                            cubic_at(&col, ht, s)
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(transpose(grid, &cols, "k_tilde"))
}

/// `k̃` from a function `k(T, Y)` evaluated exactly at quadrature nodes.
pub fn tilde_transform_fn(
    grid: &StripGrid,
    ext: Extension,
    k: impl Fn(f64, f64) -> f64 + Sync,
) -> ScalarField {
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (t, y) = (grid.t_nodes[idx / grid.n_y], grid.y_nodes[idx % grid.n_y]);
            tilde_integral(t, grid.theta, ext, |s| k(s, y))
        })
        .collect();
    grid.field("k_tilde", vals)
}

fn transpose(grid: &StripGrid, cols: &[Vec<f64>], tag: &str) -> ScalarField {
    let mut v = vec![0.0; grid.len()];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            v[grid.idx(i, j)] = *x;
        }
    }
    grid.field(tag, v)
}

/// Real Fourier coefficients of one periodic row on the strip's Y nodes:
/// `f(Y) = Σ_m a_m cos(πmY/θ) + b_m sin(πmY/θ)`, `m = 0..=n/2`.
fn row_modes(row: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = row.len();
    let half = n / 2;
    let mut a = vec![0.0; half + 1];
    let mut b = vec![0.0; half + 1];
    for m in 0..=half {
        // Y_j = −θ + 2θj/n, so πmY_j/θ = 2πmj/n − πm
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let (mut ca, mut cb) = (0.0, 0.0);
        for (j, v) in row.iter().enumerate() {
            let x = 2.0 * PI * ((m * j) % n) as f64 / n as f64;
            ca += v * x.cos();
            cb += v * x.sin();
        }
        let scale = if m == 0 || m == half { 1.0 } else { 2.0 } / n as f64;
        a[m] = sign * scale * ca;
        b[m] = if m == 0 || m == half { 0.0 } else { sign * scale * cb };
    }
    (a, b)
}

fn mode_value(grid: &StripGrid, a: &[f64], b: &[f64], j: usize) -> f64 {
    let n = grid.n_y;
    let mut acc = 0.0;
    for m in 0..a.len() {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let x = 2.0 * PI * ((m * j) % n) as f64 / n as f64;
        acc += sign * (a[m] * x.cos() + b[m] * x.sin());
    }
    acc
}

/// `h(T) = ∫₀^θ min(T, r) q(r) dr` with `q` the piecewise-cubic interpolant
/// of the nodal values. Exact for cubic `q`.
fn solve_mode_zero(grid: &StripGrid, q: &[f64]) -> Vec<f64> {
    let n = grid.n_t;
    let ht = grid.h_t();
    let gl = gauss3();
    let mut m0 = vec![0.0; n];
    let mut m1 = vec![0.0; n];
    for c in 0..n {
        let (a, b) = (grid.t_nodes[c], grid.t_nodes[c + 1]);
        m0[c] = gl.integrate(a, b, |r| cubic_at(q, ht, r));
        m1[c] = gl.integrate(a, b, |r| r * cubic_at(q, ht, r));
    }
    let mut out = vec![0.0; n + 1];
    let mut below = 0.0;
    let mut above: f64 = m0.iter().sum();
    for i in 0..=n {
        out[i] = below + grid.t_nodes[i] * above;
        if i < n {
            below += m1[i];
            above -= m0[i];
        }
    }
    out[0] = 0.0;
    out
}

/// Second-order solve of `h″ − μ²h = −q`, `h(0) = 0`, `h′(θ) = 0`.
fn solve_mode(grid: &StripGrid, mu: f64, q: &[f64]) -> Vec<f64> {
    let n = grid.n_t;
    let inv = 1.0 / (grid.h_t() * grid.h_t());
    let lower: Vec<f64> = (0..n).map(|r| if r + 1 == n { 2.0 * inv } else { inv }).collect();
    let diag = vec![-2.0 * inv - mu * mu; n];
    let upper = vec![inv; n];
    let rhs: Vec<f64> = (1..=n).map(|i| -q[i]).collect();
    let mut out = vec![0.0];
    out.extend(solve_tridiagonal(&lower, &diag, &upper, &rhs));
    out
}

/// Solution of `Δh + k̃ = 0` with `h(0, ·) = 0`, `h_T(θ, ·) = 0`, periodic
/// in Y, plus any truncation warnings.
pub fn solve_h(grid: &StripGrid, k_tilde: &ScalarField) -> Result<(ScalarField, Vec<String>)> {
    grid.check(k_tilde)?;
    let (nt, ny) = (grid.n_t, grid.n_y);
    let half = ny / 2;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..=nt)
        .into_par_iter()
        .map(|i| row_modes(&k_tilde.values[i * ny..(i + 1) * ny]))
        .collect();
    let mut warnings = Vec::new();
    if grid.m_max < half {
        let energy = |range: std::ops::RangeInclusive<usize>| -> f64 {
            rows.iter()
                .map(|(a, b)| range.clone().map(|m| a[m] * a[m] + b[m] * b[m]).sum::<f64>())
                .sum()
        };
        let (total, dropped) = (energy(0..=half), energy(grid.m_max + 1..=half));
        if total > 0.0 && dropped > MODE_TRUNCATION_TOL * total {
            warnings.push(format!(
                "mode truncation: {:.3e} of the energy lies above m_max = {}",
                dropped / total,
                grid.m_max
            ));
        }
    }
    let modes: Vec<(Vec<f64>, Vec<f64>)> = (0..=grid.m_max)
        .into_par_iter()
        .map(|m| {
            let qa: Vec<f64> = rows.iter().map(|r| r.0[m]).collect();
            let qb: Vec<f64> = rows.iter().map(|r| r.1[m]).collect();
            if m == 0 {
                (solve_mode_zero(grid, &qa), vec![0.0; nt + 1])
            } else {
                let mu = PI * m as f64 / grid.theta;
                (solve_mode(grid, mu, &qa), solve_mode(grid, mu, &qb))
            }
        })
        .collect();
    let mut v = vec![0.0; grid.len()];
    v.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let a: Vec<f64> = modes.iter().map(|m| m.0[i]).collect();
        let b: Vec<f64> = modes.iter().map(|m| m.1[i]).collect();
        for (j, x) in row.iter_mut().enumerate() {
            *x = mode_value(grid, &a, &b, j);
        }
    });
    Ok((grid.field("h", v), warnings))
}

/// `w₁ = (T h_T − h)/T²` with a five-point `h_T`; the `T = 0` row is
/// extrapolated linearly from the next two rows.
pub fn lift_w1(grid: &StripGrid, h: &ScalarField) -> Result<ScalarField> {
    grid.check(h)?;
    let (nt, ny) = (grid.n_t, grid.n_y);
    let t = &grid.t_nodes;
    let stencils: Vec<(usize, Vec<f64>)> = (0..=nt)
        .map(|i| {
            let s = i.saturating_sub(2).min(nt - 4);
            (s, fd_weights(t[i], &t[s..s + 5], 1))
        })
        .collect();
    let mut w = vec![0.0; grid.len()];
    for i in 1..=nt {
        let (s, wts) = &stencils[i];
        for j in 0..ny {
            let c = h.values[grid.idx(i, j)];
            let d: f64 = wts
                .iter()
                .enumerate()
                .map(|(a, wt)| wt * (h.values[grid.idx(s + a, j)] - c))
                .sum();
            w[grid.idx(i, j)] = (t[i] * d - c) / (t[i] * t[i]);
        }
    }
    for j in 0..ny {
        w[j] = 2.0 * w[grid.idx(1, j)] - w[grid.idx(2, j)];
    }
    Ok(grid.field("w1", w))
}

fn y_derivatives(grid: &StripGrid, f: &[f64], i: usize, j: usize) -> (f64, f64) {
    let ny = grid.n_y;
    let hy = grid.h_y();
    let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
    let (c, p, m) = (f[grid.idx(i, j)], f[grid.idx(i, jp)], f[grid.idx(i, jm)]);
    ((p - m) / (2.0 * hy), ((p - c) - (c - m)) / (hy * hy))
}

/// `L₀f = T²f_TT + 2Tf_T − 2f + T²f_YY` with second-order stencils.
pub fn apply_l0(grid: &StripGrid, f: &ScalarField) -> Result<ScalarField> {
    grid.check(f)?;
    let st = TStencils::new(&grid.t_nodes);
    let ny = grid.n_y;
    let v = &f.values;
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let t = grid.t_nodes[i];
            let col = |r: usize| v[grid.idx(r, j)];
            let ft = st.first[i].apply(col);
            let ftt = st.second[i].apply(col);
            let (_, fyy) = y_derivatives(grid, v, i, j);
            t * t * ftt + 2.0 * t * ft - 2.0 * v[k] + t * t * fyy
        })
        .collect();
    Ok(grid.field("L0_f", out))
}

/// Output of the explicit model inverse.
#[derive(Debug, Clone)]
pub struct ModelSolution {
    pub k_tilde: ScalarField,
    pub h: ScalarField,
    pub w1: ScalarField,
    /// `sup_{T ≥ h_T} |L₀w₁ − k|`.
    pub certificate: f64,
    pub extension: Extension,
    pub warnings: Vec<String>,
}

/// Serializable summary of a model solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub theta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub extension: Extension,
    pub certificate: f64,
    pub warnings: Vec<String>,
}

impl ModelSolution {
    pub fn summary(&self, grid: &StripGrid) -> Certificate {
        Certificate {
            theta: grid.theta,
            n_t: grid.n_t,
            n_y: grid.n_y,
            extension: self.extension,
            certificate: self.certificate,
            warnings: self.warnings.clone(),
        }
    }
}

/// `sup_{T ≥ h_T} |L₀w − k|`.
pub fn certificate(grid: &StripGrid, w: &ScalarField, k: &ScalarField) -> Result<f64> {
    let l0 = apply_l0(grid, w)?;
    Ok(l0.values[grid.n_y..]
        .iter()
        .zip(&k.values[grid.n_y..])
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())))
}

/// Transform, solve and lift: the bounded solution of `L₀w₁ = k`.
pub fn solve_model(grid: &StripGrid, k: &ScalarField, ext: Extension) -> Result<ModelSolution> {
    let k_tilde = tilde_transform(grid, k, ext)?;
    finish_model(grid, k, k_tilde, ext)
}

/// As [`solve_model`] with `k̃` computed from the closed-form `k`.
pub fn solve_model_fn(
    grid: &StripGrid,
    ext: Extension,
    k: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<ModelSolution> {
    let kf = grid.from_fn("k", &k);
    let k_tilde = tilde_transform_fn(grid, ext, &k);
    finish_model(grid, &kf, k_tilde, ext)
}

fn finish_model(
    grid: &StripGrid,
    k: &ScalarField,
    k_tilde: ScalarField,
    ext: Extension,
) -> Result<ModelSolution> {
    let (h, warnings) = solve_h(grid, &k_tilde)?;
    let w1 = lift_w1(grid, &h)?;
    let certificate = certificate(grid, &w1, k)?;
    Ok(ModelSolution {
        k_tilde,
        h,
        w1,
        certificate,
        extension: ext,
        warnings,
    })
}

/// Coefficients of `L₁ = L − L₀ = c_T ∂_T + c_YY ∂²_Y + c_Y ∂_Y` on the strip.
#[derive(Debug, Clone)]
pub struct PerturbationCoeffs {
    pub drift_t: Vec<f64>,
    pub second_y: Vec<f64>,
    pub drift_y: Vec<f64>,
}

impl PerturbationCoeffs {
    pub fn zero(grid: &StripGrid) -> Self {
        let n = grid.len();
        Self {
            drift_t: vec![0.0; n],
            second_y: vec![0.0; n],
            drift_y: vec![0.0; n],
        }
    }

    fn is_zero(&self) -> bool {
        self.drift_t
            .iter()
            .chain(&self.second_y)
            .chain(&self.drift_y)
            .all(|c| *c == 0.0)
    }

    pub fn apply(&self, grid: &StripGrid, f: &ScalarField) -> Result<ScalarField> {
        grid.check(f)?;
        let st = TStencils::new(&grid.t_nodes);
        let ny = grid.n_y;
        let v = &f.values;
        let out: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / ny, k % ny);
                let ft = st.first[i].apply(|r| v[grid.idx(r, j)]);
                let (fy, fyy) = y_derivatives(grid, v, i, j);
                self.drift_t[k] * ft + self.second_y[k] * fyy + self.drift_y[k] * fy
            })
            .collect();
        Ok(grid.field("L1_f", out))
    }
}

/// Chart data moved onto the strip.
#[derive(Debug, Clone)]
pub struct Transplant {
    pub s0: f64,
    /// Strip curvature profile at the Y nodes.
    pub kappa: Vec<f64>,
    pub coeffs: PerturbationCoeffs,
    /// `−2Δd = 2κ/(1 − κT)`.
    pub rhs: ScalarField,
}

/// Transplant a boundary neighbourhood of arclength `s0` onto the strip.
/// The strip is `2θ`-periodic while the boundary is not, so the strip uses
/// the periodic profile `κ(s0 + (θ/π) sin(πY/θ))`, which agrees with the
/// boundary curvature to first order at `Y = 0`. `curvature(s)` returns
/// `(κ, dκ/ds)`.
pub fn transplant(
    grid: &StripGrid,
    s0: f64,
    curvature: impl Fn(f64) -> (f64, f64),
) -> Result<Transplant> {
    let theta = grid.theta;
    let ny = grid.n_y;
    let profile: Vec<(f64, f64)> = grid
        .y_nodes
        .iter()
        .map(|&y| {
            let phase = PI * y / theta;
            let (k, dk) = curvature(s0 + theta / PI * phase.sin());
            (k, dk * phase.cos())
        })
        .collect();
    let mut coeffs = PerturbationCoeffs::zero(grid);
    let mut rhs = vec![0.0; grid.len()];
    for (i, &t) in grid.t_nodes.iter().enumerate() {
        for (j, &(kappa, slope)) in profile.iter().enumerate() {
            let jac = 1.0 - kappa * t;
            if jac <= 0.0 {
                return Err(Error::DegenerateChart {
                    t,
                    y: grid.y_nodes[j],
                    jacobian: jac,
                });
            }
            let k = i * ny + j;
            coeffs.drift_t[k] = -kappa * t * t / jac;
            coeffs.second_y[k] = t * t * (1.0 / (jac * jac) - 1.0);
            coeffs.drift_y[k] = t * t * slope * t / (jac * jac * jac);
            rhs[k] = 2.0 * kappa / jac;
        }
    }
    Ok(Transplant {
        s0,
        kappa: profile.iter().map(|p| p.0).collect(),
        coeffs,
        rhs: grid.field("k", rhs),
    })
}

#[derive(Debug, Clone)]
pub struct PerturbedSolution {
    pub w: ScalarField,
    pub last: ModelSolution,
    pub iterations: usize,
    pub updates: Vec<f64>,
    pub converged: bool,
}

/// `w⁽ⁿ⁺¹⁾ = solve_model(k − L₁w⁽ⁿ⁾)` from `w⁽⁰⁾ = 0`.
pub fn solve_perturbed(
    grid: &StripGrid,
    k: &ScalarField,
    l1: &PerturbationCoeffs,
    ext: Extension,
    tol: f64,
    max_iter: usize,
) -> Result<PerturbedSolution> {
    let first = solve_model(grid, k, ext)?;
    if l1.is_zero() {
        return Ok(PerturbedSolution {
            w: first.w1.clone().with_tag("w0"),
            last: first,
            iterations: 1,
            updates: vec![],
            converged: true,
        });
    }
    let mut w = first.w1.clone();
    let mut last = first;
    let mut updates = Vec::new();
    let mut growth = 0;
    let mut converged = false;
    for _ in 1..max_iter {
        let l1w = l1.apply(grid, &w)?;
        let rhs = k.zip(&l1w, "k_eff", |a, b| a - b)?;
        let sol = solve_model(grid, &rhs, ext)?;
        let update = sol
            .w1
            .values
            .iter()
            .zip(&w.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = sol.w1.clone();
        last = sol;
        if updates.last().is_some_and(|p| update > *p) {
            growth += 1;
        } else {
            growth = 0;
        }
        updates.push(update);
        if growth >= 5 || !update.is_finite() {
            return Err(Error::PerturbationDiverged {
                iterations: updates.len() + 1,
                update,
            });
        }
        if update < tol {
            converged = true;
            break;
        }
    }
    Ok(PerturbedSolution {
        w: w.with_tag("w0"),
        last,
        iterations: updates.len() + 1,
        updates,
        converged,
    })
}
