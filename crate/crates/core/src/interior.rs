//! Maximal solution of `-Δu + 4e^{2u} = 0` on a Cartesian grid.
//!
//! Each level solves a Dirichlet problem with boundary-band data capped at
//! `M_k` by damped Newton; raising `M_k` sweeps monotonically up to the
//! maximal (blow-up) solution. The default scheme subtracts the known
//! boundary profile `-χ(d) ln(2d)` through a consistency correction and
//! uses the asymptotic band data `-ln(2d − κd²)`, which makes the sweep
//! second-order accurate in the interior.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridKind, ScalarField};
use crate::geometry::{BoundaryCurve, Point};
use crate::linalg::{pcg, Preconditioner, TripletBuilder};

/// Nodes closer than this fraction of `h` to the curve count as outside.
const INSIDE_FLOOR: f64 = 1e-4;

/// Role of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    /// Inside with an exterior 4-neighbour: carries Dirichlet data.
    Band,
    /// Inside with all neighbours inside: an unknown.
    Unknown,
}

/// Nodes `(x0 + ix·h, y0 + iy·h)` over a bounding box of the domain.
#[derive(Debug, Clone)]
pub struct InteriorGrid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub kind: Vec<NodeKind>,
    /// Distance to the boundary (meaningful inside).
    pub dist: Vec<f64>,
    /// Curvature at the foot point (nodes with `d < profile_radius`).
    pub foot_curvature: Vec<f64>,
    /// Support radius of the boundary profile cutoff.
    pub profile_radius: f64,
    /// Unknown index of each node, `usize::MAX` when not an unknown.
    pub unknown_index: Vec<usize>,
    pub unknowns: Vec<usize>,
    pub hash: u64,
}

/// How band nodes get their Dirichlet value at level `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandRule {
    /// `u = M`.
    Constant,
    /// `u = min(M, −ln(2d − κd²))`.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InteriorOptions {
    pub band_rule: BandRule,
    /// Subtract the boundary profile's truncation error from the residual.
    pub profile_correction: bool,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub cg_tol: f64,
}

impl Default for InteriorOptions {
    fn default() -> Self {
        Self {
            band_rule: BandRule::Asymptotic,
            profile_correction: true,
            tol_newton: 1e-10,
            max_newton: 50,
            cg_tol: 1e-13,
        }
    }
}

impl InteriorOptions {
    /// Plain 5-point scheme with `u = M` on the band.
    pub fn literal() -> Self {
        Self {
            band_rule: BandRule::Constant,
            profile_correction: false,
            ..Self::default()
        }
    }
}

/// Per-level record `(M, Newton iterations, final residual)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelRecord {
    pub level: f64,
    pub newton_iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub outer_levels: Vec<LevelRecord>,
    /// Sup change between the last two levels on `d ≥ trusted_depth`.
    pub interior_change: f64,
    pub trusted_depth: f64,
    pub converged: bool,
}

/// Smooth cutoff: 1 on `[0, ρ/2]`, 0 on `[ρ, ∞)`, quintic in between.
/// Returns the value and first two derivatives.
fn cutoff(d: f64, rho: f64) -> (f64, f64, f64) {
    let half = 0.5 * rho;
    if d <= half {
        return (1.0, 0.0, 0.0);
    }
    if d >= rho {
        return (0.0, 0.0, 0.0);
    }
    let t = (d - half) / half;
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (1.0 - s, -s1 / half, -s2 / (half * half))
}

impl InteriorGrid {
    /// Grid of spacing `h` on the domain bounded by `curve`; nodes sit at
    /// integer multiples of `h`.
    pub fn new(curve: &BoundaryCurve, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::config("h", "grid spacing must be positive"));
        }
        let pts = curve.samples();
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in pts {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let ix0 = (xmin / h).floor() as i64 - 1;
        let ix1 = (xmax / h).ceil() as i64 + 1;
        let iy0 = (ymin / h).floor() as i64 - 1;
        let iy1 = (ymax / h).ceil() as i64 + 1;
        let nx = (ix1 - ix0 + 1) as usize;
        let ny = (iy1 - iy0 + 1) as usize;
        let x0 = ix0 as f64 * h;
        let y0 = iy0 as f64 * h;
        let reach = curve.reach();
        let rho = 0.8 * reach.min(1.0);
        let near = rho + 4.0 * curve.perimeter / curve.samples_per_period as f64 + 2.0 * h;
        let data: Vec<(f64, f64)> = (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let p = [x0 + (k % nx) as f64 * h, y0 + (k / nx) as f64 * h];
                let approx = curve.approx_distance(p);
                if approx.abs() > near {
                    return (approx, 0.0);
                }
                let (d, s) = curve.nearest_foot(p);
                (d, crate::geometry::curvature(curve, s))
            })
            .collect();
        let dist: Vec<f64> = data.iter().map(|d| d.0).collect();
        let curv: Vec<f64> = data.iter().map(|d| d.1).collect();
        Ok(Self::assemble(x0, y0, h, nx, ny, dist, curv, rho))
    }

    /// Grid from explicit node distances (positive inside) and foot
    /// curvatures.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        x0: f64,
        y0: f64,
        h: f64,
        nx: usize,
        ny: usize,
        dist: Vec<f64>,
        foot_curvature: Vec<f64>,
        profile_radius: f64,
    ) -> Self {
        // nodes practically on the curve cannot carry finite data
        let floor = INSIDE_FLOOR * h;
        let inside = |ix: i64, iy: i64| {
            ix >= 0
                && iy >= 0
                && (ix as usize) < nx
                && (iy as usize) < ny
                && dist[iy as usize * nx + ix as usize] > floor
        };
        let mut kind = vec![NodeKind::Outside; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let k = iy * nx + ix;
                if dist[k] <= floor {
                    continue;
                }
                let (i, j) = (ix as i64, iy as i64);
                let interior =
                    inside(i + 1, j) && inside(i - 1, j) && inside(i, j + 1) && inside(i, j - 1);
                kind[k] = if interior {
                    NodeKind::Unknown
                } else {
                    NodeKind::Band
                };
            }
        }
        let mut unknown_index = vec![usize::MAX; nx * ny];
        let mut unknowns = Vec::new();
        for (k, kd) in kind.iter().enumerate() {
            if *kd == NodeKind::Unknown {
                unknown_index[k] = unknowns.len();
                unknowns.push(k);
            }
        }
        let mut hash: u64 = 0xcbf29ce484222325;
        for v in [x0, y0, h, nx as f64, ny as f64, profile_radius]
            .iter()
            .chain(&dist)
        {
            for b in v.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        Self {
            x0,
            y0,
            h,
            nx,
            ny,
            kind,
            dist,
            foot_curvature,
            profile_radius,
            unknown_index,
            unknowns,
            hash,
        }
    }

    pub fn node(&self, k: usize) -> Point {
        [
            self.x0 + (k % self.nx) as f64 * self.h,
            self.y0 + (k / self.nx) as f64 * self.h,
        ]
    }

    /// Index of the node nearest to `p` (if on the grid).
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let ix = ((p[0] - self.x0) / self.h).round();
        let iy = ((p[1] - self.y0) / self.h).round();
        if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        Some(iy as usize * self.nx + ix as usize)
    }

    fn neighbours(&self, k: usize) -> [usize; 4] {
        [k + 1, k - 1, k + self.nx, k - self.nx]
    }

    pub fn band_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.kind
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NodeKind::Band)
            .map(|(i, _)| i)
    }

    fn band_value(&self, k: usize, level: f64, rule: BandRule) -> f64 {
        match rule {
            BandRule::Constant => level,
            BandRule::Asymptotic => {
                let d = self.dist[k];
                let arg = 2.0 * d - self.foot_curvature[k] * d * d;
                if arg > 0.0 {
                    level.min(-arg.ln())
                } else {
                    level
                }
            }
        }
    }

    /// `Δ_h U₀ − ΔU₀` at unknowns for the profile `U₀ = −χ(d) ln(2d)`.
    fn profile_truncation(&self) -> Vec<f64> {
        let rho = self.profile_radius;
        let profile = |k: usize| {
            let d = self.dist[k];
            let (c, _, _) = cutoff(d, rho);
            if c == 0.0 {
                0.0
            } else {
                -c * (2.0 * d).ln()
            }
        };
        let h2 = self.h * self.h;
        self.unknowns
            .par_iter()
            .map(|&k| {
                let d = self.dist[k];
                let (c, c1, c2) = cutoff(d, rho);
                if c == 0.0 && c1 == 0.0 {
                    // profile vanishes on the whole stencil unless a neighbour is in its support
                    if self.neighbours(k).iter().all(|&n| cutoff(self.dist[n], rho).0 == 0.0) {
                        return 0.0;
                    }
                }
                let nb = self.neighbours(k);
                let discrete =
                    (nb.iter().map(|&n| profile(n)).sum::<f64>() - 4.0 * profile(k)) / h2;
                let exact = if c == 0.0 && c1 == 0.0 && c2 == 0.0 {
                    0.0
                } else {
                    let l = (2.0 * d).ln();
                    let f1 = -c1 * l - c / d;
                    let f2 = -c2 * l - 2.0 * c1 / d + c / (d * d);
                    let kappa = self.foot_curvature[k];
                    let lap_d = -kappa / (1.0 - kappa * d);
                    f2 + f1 * lap_d
                };
                discrete - exact
            })
            .collect()
    }

    /// Wrap node values as an interior field (inside nodes active).
    pub fn field(&self, tag: &str, values: Vec<f64>) -> ScalarField {
        ScalarField {
            quantity_tag: tag.to_string(),
            kind: GridKind::Interior,
            grid_hash: self.hash,
            rows: (0..self.ny).map(|i| self.y0 + i as f64 * self.h).collect(),
            cols: (0..self.nx).map(|i| self.x0 + i as f64 * self.h).collect(),
            values,
            mask: Some(self.kind.iter().map(|k| *k != NodeKind::Outside).collect()),
        }
    }
}

/// Pointwise `−Δ_h u + 4e^{2u}` at unknowns (5-point Laplacian); other nodes
/// get 0 and are masked out.
pub fn residual(grid: &InteriorGrid, u: &ScalarField) -> Result<ScalarField> {
    let v = &u.values;
    check_overflow(grid, v)?;
    let h2 = grid.h * grid.h;
    let mut out = vec![0.0; grid.nx * grid.ny];
    for &k in &grid.unknowns {
        let lap = (grid.neighbours(k).iter().map(|&n| v[n]).sum::<f64>() - 4.0 * v[k]) / h2;
        out[k] = -lap + 4.0 * (2.0 * v[k]).exp();
    }
    let mut f = grid.field(&format!("residual_{}", u.quantity_tag), out);
    f.mask = Some(grid.kind.iter().map(|k| *k == NodeKind::Unknown).collect());
    Ok(f)
}

fn check_overflow(grid: &InteriorGrid, v: &[f64]) -> Result<()> {
    for (k, kd) in grid.kind.iter().enumerate() {
        if *kd != NodeKind::Outside && !(2.0 * v[k] <= 700.0) {
            return Err(Error::Overflow {
                node: k,
                two_u: 2.0 * v[k],
            });
        }
    }
    Ok(())
}

/// Newton for one level with a precomputed correction term.
struct LevelSolver<'a> {
    grid: &'a InteriorGrid,
    correction: Vec<f64>,
    opts: InteriorOptions,
}

impl LevelSolver<'_> {
    /// `(F, diag)` at the unknowns: `F = −Δ_h u + τ + 4e^{2u}` scaled by h²
    /// and the Jacobian diagonal.
    fn eval(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let h2 = g.h * g.h;
        g.unknowns
            .par_iter()
            .enumerate()
            .map(|(i, &k)| {
                let e = (2.0 * v[k]).exp();
                let sum: f64 = g.neighbours(k).iter().map(|&n| v[n]).sum();
                let f = 4.0 * v[k] - sum + h2 * (self.correction[i] + 4.0 * e);
                (f, 4.0 + 8.0 * h2 * e)
            })
            .unzip()
    }

    fn norm(f: &[f64], diag: &[f64]) -> f64 {
        f.iter()
            .zip(diag)
            .fold(0.0, |m: f64, (a, b)| m.max(a.abs() / b))
    }

    fn solve(&self, level: f64, u: &mut [f64]) -> Result<LevelRecord> {
        let g = self.grid;
        let n = g.unknowns.len();
        check_overflow(g, u)?;
        let (mut f, mut diag) = self.eval(u);
        let mut res = Self::norm(&f, &diag);
        let mut iterations = 0;
        while res > self.opts.tol_newton {
            if iterations == self.opts.max_newton {
                return Err(Error::NewtonDiverged {
                    level,
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            let mut tb = TripletBuilder::new(n);
            for (i, &k) in g.unknowns.iter().enumerate() {
                let mut row = Vec::with_capacity(5);
                row.push((i, diag[i]));
                for nb in g.neighbours(k) {
                    let j = g.unknown_index[nb];
                    if j != usize::MAX {
                        row.push((j, -1.0));
                    }
                }
                tb.set_row(i, row);
            }
            let jac = tb.build();
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let mut step = vec![0.0; n];
            pcg(
                &jac,
                &rhs,
                &mut step,
                self.opts.cg_tol * res.max(1e-300).min(1.0),
                20_000,
                Preconditioner::IncompleteCholesky,
            )?;
            let mut lambda = 1.0;
            let base: Vec<f64> = g.unknowns.iter().map(|&k| u[k]).collect();
            loop {
                for (i, &k) in g.unknowns.iter().enumerate() {
                    u[k] = base[i] + lambda * step[i];
                }
                let finite = g.unknowns.iter().all(|&k| 2.0 * u[k] <= 700.0);
                if finite {
                    let (f_new, d_new) = self.eval(u);
                    let r_new = Self::norm(&f_new, &d_new);
                    if r_new < res || r_new <= self.opts.tol_newton {
                        f = f_new;
                        diag = d_new;
                        res = r_new;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 2f64.powi(-20) {
                    for (i, &k) in g.unknowns.iter().enumerate() {
                        u[k] = base[i];
                    }
                    return Err(Error::NewtonDiverged {
                        level,
                        iterations,
                        residual: res,
                    });
                }
            }
        }
        Ok(LevelRecord {
            level,
            newton_iterations: iterations,
            residual: res,
        })
    }
}

fn make_solver(grid: &InteriorGrid, opts: InteriorOptions) -> LevelSolver<'_> {
    let correction = if opts.profile_correction {
        grid.profile_truncation()
    } else {
        vec![0.0; grid.unknowns.len()]
    };
    LevelSolver {
        grid,
        correction,
        opts,
    }
}

fn set_band(grid: &InteriorGrid, level: f64, rule: BandRule, u: &mut [f64]) {
    for k in grid.band_nodes() {
        u[k] = grid.band_value(k, level, rule);
    }
}

/// Solve one Dirichlet level with band data from `opts.band_rule`.
/// Convergence is measured by the Newton-step scale `|F_i| / F'_ii`.
pub fn solve_dirichlet_level(
    grid: &InteriorGrid,
    level: f64,
    u_init: &ScalarField,
    opts: InteriorOptions,
) -> Result<(ScalarField, LevelRecord)> {
    let solver = make_solver(grid, opts);
    let mut u = u_init.values.clone();
    set_band(grid, level, opts.band_rule, &mut u);
    let rec = solver.solve(level, &mut u)?;
    Ok((grid.field("u", u), rec))
}

/// Default level schedule `M_k = 2k`, `k = 1..=12`.
pub fn default_schedule() -> Vec<f64> {
    (1..=12).map(|k| 2.0 * k as f64).collect()
}

/// Sweep the levels until the change on `d ≥ trusted_depth` drops below
/// `stop_tol`.
pub fn solve_maximal(
    grid: &InteriorGrid,
    schedule: &[f64],
    stop_tol: f64,
    trusted_depth: f64,
    opts: InteriorOptions,
) -> Result<(ScalarField, SolveReport)> {
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.is_empty() {
        return Err(Error::config("schedule", "levels must be strictly increasing"));
    }
    let solver = make_solver(grid, opts);
    let mut u = vec![0.0; grid.nx * grid.ny];
    let mut levels = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut change = f64::INFINITY;
    for &m in schedule {
        set_band(grid, m, opts.band_rule, &mut u);
        levels.push(solver.solve(m, &mut u)?);
        if let Some(p) = &prev {
            change = grid
                .unknowns
                .iter()
                .filter(|&&k| grid.dist[k] >= trusted_depth)
                .fold(0.0f64, |a, &k| a.max((u[k] - p[k]).abs()));
            if change < stop_tol {
                let report = SolveReport {
                    outer_levels: levels,
                    interior_change: change,
                    trusted_depth,
                    converged: true,
                };
                return Ok((grid.field("u", u), report));
            }
        }
        prev = Some(u.clone());
    }
    Err(Error::NotConverged {
        levels: levels.len(),
        last_change: change,
    })
}

/// Interior solution plus the grid, with interpolation helpers.
#[derive(Debug, Clone)]
pub struct InteriorSolution {
    pub grid: Arc<InteriorGrid>,
    pub u: ScalarField,
    pub report: SolveReport,
}

impl InteriorSolution {
    /// Tensor 4×4 Lagrange interpolation of `g(u)` at `p`; `None` when the
    /// stencil leaves the inside nodes.
    pub fn interpolate(&self, p: Point, g: impl Fn(f64) -> f64) -> Option<f64> {
        let grid = &self.grid;
        let fx = (p[0] - grid.x0) / grid.h;
        let fy = (p[1] - grid.y0) / grid.h;
        let (ix, iy) = (fx.floor() as i64 - 1, fy.floor() as i64 - 1);
        if ix < 0 || iy < 0 || ix as usize + 3 >= grid.nx || iy as usize + 3 >= grid.ny {
            return None;
        }
        let wx = lagrange4(fx - (ix as f64 + 1.0));
        let wy = lagrange4(fy - (iy as f64 + 1.0));
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            for (a, wxa) in wx.iter().enumerate() {
                let k = (iy as usize + b) * grid.nx + ix as usize + a;
                if grid.kind[k] == NodeKind::Outside {
                    return None;
                }
                acc += wxa * wyb * g(self.u.values[k]);
            }
        }
        Some(acc)
    }

    /// Rebuild a solution from a saved interior field over `curve`. The
    /// spacing is read off the node coordinates and the grid hash must match.
    pub fn from_field(curve: &BoundaryCurve, u: &ScalarField) -> Result<Self> {
        if u.kind != GridKind::Interior || u.cols.len() < 2 {
            return Err(Error::Parse("expected an interior field".into()));
        }
        let h = u.cols.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let grid = InteriorGrid::new(curve, h)?;
        if grid.hash != u.grid_hash {
            return Err(Error::Shape(format!(
                "field `{}` was not computed on this domain at h = {h}",
                u.quantity_tag
            )));
        }
        let mut values = vec![f64::NAN; grid.nx * grid.ny];
        for (k, &v) in u.values.iter().enumerate() {
            if !u.is_active(k) {
                continue;
            }
            let (r, c) = (k / u.cols.len(), k % u.cols.len());
            let ix = ((u.cols[c] - grid.x0) / h).round() as usize;
            let iy = ((u.rows[r] - grid.y0) / h).round() as usize;
            values[iy * grid.nx + ix] = v;
        }
        let field = grid.field(&u.quantity_tag, values);
        Ok(Self {
            grid: Arc::new(grid),
            u: field,
            report: SolveReport {
                outer_levels: Vec::new(),
                interior_change: f64::NAN,
                trusted_depth: f64::NAN,
                converged: true,
            },
        })
    }

    /// Value at the node nearest to `p`.
    pub fn nodal(&self, p: Point) -> Option<f64> {
        let k = self.grid.nearest_node(p)?;
        (self.grid.kind[k] != NodeKind::Outside).then(|| self.u.values[k])
    }
}

/// Cubic Lagrange weights on nodes −1, 0, 1, 2 at offset `s ∈ [0, 1)`.
fn lagrange4(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// Grid build plus maximal solve with default options.
pub fn solve_interior(
    curve: &BoundaryCurve,
    h: f64,
    stop_tol: f64,
    trusted_depth: f64,
) -> Result<InteriorSolution> {
    let grid = Arc::new(InteriorGrid::new(curve, h)?);
    let (u, report) = solve_maximal(
        &grid,
        &default_schedule(),
        stop_tol,
        trusted_depth,
        InteriorOptions::default(),
    )?;
    Ok(InteriorSolution { grid, u, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{arclength_reparametrize, FourierCurve};

    fn disk() -> BoundaryCurve {
        arclength_reparametrize(&FourierCurve::circle(1.0), 1024, "disk", "analytic").unwrap()
    }

    fn exact(p: Point) -> f64 {
        -(1.0 - p[0] * p[0] - p[1] * p[1]).ln()
    }

    #[test]
    fn cutoff_is_smooth_partition() {
        let (c, d1, d2) = cutoff(0.3, 0.8);
        assert_eq!((c, d1, d2), (1.0, 0.0, 0.0));
        assert_eq!(cutoff(0.9, 0.8).0, 0.0);
        let h = 1e-5;
        let d = 0.55;
        let fd = (cutoff(d + h, 0.8).0 - cutoff(d - h, 0.8).0) / (2.0 * h);
        assert!((fd - cutoff(d, 0.8).1).abs() < 1e-8);
        let fd2 = (cutoff(d + h, 0.8).1 - cutoff(d - h, 0.8).1) / (2.0 * h);
        assert!((fd2 - cutoff(d, 0.8).2).abs() < 1e-6);
    }

    #[test]
    fn residual_of_exact_solution_is_second_order() {
        let c = disk();
        let mut errs = vec![];
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let grid = InteriorGrid::new(&c, h).unwrap();
            let vals: Vec<f64> = (0..grid.nx * grid.ny)
                .map(|k| {
                    if grid.kind[k] == NodeKind::Outside {
                        0.0
                    } else {
                        exact(grid.node(k))
                    }
                })
                .collect();
            let u = grid.field("u", vals);
            let r = residual(&grid, &u).unwrap();
            let e = grid
                .unknowns
                .iter()
                .filter(|&&k| grid.dist[k] >= 0.1)
                .fold(0.0f64, |m, &k| m.max(r.values[k].abs()));
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn residual_of_constants() {
        let grid = InteriorGrid::new(&disk(), 0.1).unwrap();
        let u = grid.field("u", vec![0.0; grid.nx * grid.ny]);
        let r = residual(&grid, &u).unwrap();
        assert!(grid.unknowns.iter().all(|&k| (r.values[k] - 4.0).abs() < 1e-14));
        let u = grid.field("u", vec![-1.5; grid.nx * grid.ny]);
        let r = residual(&grid, &u).unwrap();
        let want = 4.0 * (-3.0f64).exp();
        assert!(grid.unknowns.iter().all(|&k| (r.values[k] - want).abs() < 1e-13));
        let u = grid.field("u", vec![400.0; grid.nx * grid.ny]);
        assert!(matches!(residual(&grid, &u), Err(Error::Overflow { .. })));
    }

    #[test]
    fn single_unknown_matches_bisection() {
        let grid = InteriorGrid::new(&disk(), 0.9).unwrap();
        assert_eq!(grid.unknowns.len(), 1);
        let h = 0.9;
        for m in [0.0, 1.0, 3.0] {
            let init = grid.field("u", vec![0.0; grid.nx * grid.ny]);
            let (u, _) = solve_dirichlet_level(&grid, m, &init, InteriorOptions::literal()).unwrap();
            // −(4M − 4u)/h² + 4e^{2u} = 0
            let f = |x: f64| -(4.0 * m - 4.0 * x) / (h * h) + 4.0 * (2.0 * x).exp();
            let (mut lo, mut hi) = (-50.0, m);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let k = grid.unknowns[0];
            assert!((u.values[k] - 0.5 * (lo + hi)).abs() < 1e-10);
        }
    }

    #[test]
    fn level_zero_is_negative_and_levels_are_monotone() {
        let grid = InteriorGrid::new(&disk(), 1.0 / 16.0).unwrap();
        let init = grid.field("u", vec![0.0; grid.nx * grid.ny]);
        let (u0, _) = solve_dirichlet_level(&grid, 0.0, &init, InteriorOptions::literal()).unwrap();
        let (u1, _) = solve_dirichlet_level(&grid, 1.0, &u0, InteriorOptions::literal()).unwrap();
        for &k in &grid.unknowns {
            assert!(u0.values[k] < 0.0);
            assert!(u1.values[k] >= u0.values[k]);
            assert!(u1.values[k] <= 1.0);
        }
        let c = grid.nearest_node([0.0, 0.0]).unwrap();
        assert!(u0.values[c] > -0.5 && u0.values[c] < -0.1);
    }

    #[test]
    fn disk_center_error_is_second_order() {
        let c = disk();
        let mut errs = vec![];
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let sol = solve_interior(&c, h, 1e-8, 0.1).unwrap();
            let grid = &sol.grid;
            let e = grid
                .unknowns
                .iter()
                .fold(0.0f64, |m, &k| m.max((sol.u.values[k] - exact(grid.node(k))).abs()));
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "{errs:?}");
    }
}
