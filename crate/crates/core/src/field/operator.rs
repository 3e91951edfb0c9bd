//! Fuchsian operators `∂_i(d² a^{ij} ∂_j) + d b^i ∂_i + c` (divergence form)
//! and `d² a^{ij} ∂_{ij} + d b^i ∂_i + c` (non-divergence form).
//!
//! Coefficients are frame components in the orthonormal frame `(∇d, τ)` of
//! the collar, sampled at chart nodes.

use serde::{Deserialize, Serialize};

use super::holder::holder_seminorm;
use super::ops::{collar_gradient, collar_laplacian};
use super::ScalarField;
use crate::error::Result;
use crate::geometry::CollarChart;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorForm {
    DivergenceI,
    NondivergenceII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorClass {
    TypeI,
    TypeII,
    Neither,
}

#[derive(Debug, Clone)]
pub struct FuchsianOperator {
    pub form: OperatorForm,
    /// `[a_TT, a_TY, a_YT, a_YY]` per node.
    pub a: Vec<[f64; 4]>,
    /// `[b_T, b_Y]` per node.
    pub b: Vec<[f64; 2]>,
    pub c: Vec<f64>,
    pub ellipticity_bounds: (f64, f64),
    /// Sample locations used for the Hölder checks of the coefficients.
    pub points: Vec<[f64; 2]>,
}

/// Coefficient seminorm above which a sampled coefficient is not treated as
/// Hölder continuous.
pub const HOLDER_CAP: f64 = 1e6;

impl FuchsianOperator {
    /// `L = div(d²∇) − 2` as a divergence-form operator on `chart`.
    pub fn renormalized(chart: &CollarChart) -> Self {
        let n = chart.len();
        Self {
            form: OperatorForm::DivergenceI,
            a: vec![[1.0, 0.0, 0.0, 1.0]; n],
            b: vec![[0.0, 0.0]; n],
            c: vec![-2.0; n],
            ellipticity_bounds: (1.0, 1.0),
            points: chart_points(chart),
        }
    }

    /// The same operator written as `d²Δ + 2d∇d·∇ − 2`.
    pub fn renormalized_nondivergence(chart: &CollarChart) -> Self {
        let mut op = Self::renormalized(chart);
        op.form = OperatorForm::NondivergenceII;
        op.b = vec![[2.0, 0.0]; chart.len()];
        op
    }

    fn isotropic_identity(&self) -> bool {
        self.a.iter().all(|a| *a == [1.0, 0.0, 0.0, 1.0])
    }

    /// Apply the operator to `g`. Only identity principal parts are
    /// supported; other operators return `None`.
    pub fn apply(&self, chart: &CollarChart, g: &ScalarField) -> Result<Option<ScalarField>> {
        if !self.isotropic_identity() {
            return Ok(None);
        }
        let lap = collar_laplacian(chart, g)?;
        let (gt, gy) = collar_gradient(chart, g)?;
        let mut out = Vec::with_capacity(chart.len());
        for i in 0..=chart.n_t {
            let t = chart.t_nodes[i];
            for j in 0..chart.n_y {
                let k = chart.idx(i, j);
                let jac = chart.jacobian[k];
                // div(d²∇g) = d²Δg + 2d g_T for the identity
                let principal = t * t * lap.values[k]
                    + match self.form {
                        OperatorForm::DivergenceI => 2.0 * t * gt.values[k],
                        OperatorForm::NondivergenceII => 0.0,
                    };
                let drift = t * (self.b[k][0] * gt.values[k] + self.b[k][1] * gy.values[k] / jac);
                out.push(principal + drift + self.c[k] * g.values[k]);
            }
        }
        Ok(Some(ScalarField::on_chart(chart, "A_g", out)))
    }
}

pub(crate) fn chart_points(chart: &CollarChart) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(chart.len());
    for &t in &chart.t_nodes {
        for &y in &chart.y_nodes {
            pts.push([t, y]);
        }
    }
    pts
}

fn eigen_range(a: &[f64; 4]) -> (f64, f64) {
    let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    (mean - rad, mean + rad)
}

fn holder_ok(points: &[[f64; 2]], values: &[f64], alpha: f64) -> bool {
    values.iter().all(|v| v.is_finite()) && holder_seminorm(points, values, alpha, 0) <= HOLDER_CAP
}

/// Classify by uniform ellipticity plus the coefficient regularity each form
/// requires (Hölder `a` and bounded `b, c` for divergence form; Hölder `a,
/// b, c` for non-divergence form). Hölder checks use exponent `alpha`.
pub fn classify_operator(op: &FuchsianOperator, alpha: f64) -> OperatorClass {
    let (lo, hi) = op.ellipticity_bounds;
    if !(lo > 0.0) {
        return OperatorClass::Neither;
    }
    let elliptic = op.a.iter().all(|a| {
        let (e0, e1) = eigen_range(a);
        e0 >= lo * (1.0 - 1e-12) && e1 <= hi * (1.0 + 1e-12) && (a[1] - a[2]).abs() < 1e-12
    });
    if !elliptic {
        return OperatorClass::Neither;
    }
    let a_ok = (0..4).all(|m| {
        let comp: Vec<f64> = op.a.iter().map(|a| a[m]).collect();
        holder_ok(&op.points, &comp, alpha)
    });
    if !a_ok {
        return OperatorClass::Neither;
    }
    match op.form {
        OperatorForm::DivergenceI => {
            if op.b.iter().flatten().all(|x| x.is_finite()) && op.c.iter().all(|x| x.is_finite()) {
                OperatorClass::TypeI
            } else {
                OperatorClass::Neither
            }
        }
        OperatorForm::NondivergenceII => {
            let b_ok = (0..2).all(|m| {
                let comp: Vec<f64> = op.b.iter().map(|b| b[m]).collect();
                holder_ok(&op.points, &comp, alpha)
            });
            if b_ok && holder_ok(&op.points, &op.c, alpha) {
                OperatorClass::TypeII
            } else {
                OperatorClass::Neither
            }
        }
    }
}
