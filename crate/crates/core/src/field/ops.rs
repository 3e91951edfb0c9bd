//! Finite-difference operators in collar coordinates.
//!
//! T derivatives use three-point stencils on the (possibly graded) T nodes,
//! one-sided at `T = 0` and `T = δ`. Y is periodic and uniform.

use rayon::prelude::*;

use super::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::CollarChart;

/// Finite-difference weights for the `order`-th derivative at `x0` from the
/// given nodes (Fornberg's recursion).
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// One T stencil: first node index, node index of the evaluation point, and
/// weights.
pub(crate) struct Stencil {
    pub start: usize,
    pub centre: usize,
    pub weights: Vec<f64>,
}

impl Stencil {
    /// Weighted sum written on differences from the centre value, so
    /// constants are annihilated exactly.
    #[inline]
    pub fn apply(&self, column: impl Fn(usize) -> f64) -> f64 {
        let fc = column(self.centre);
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let node = self.start + k;
            if node != self.centre {
                acc += w * (column(node) - fc);
            }
        }
        acc
    }
}

/// First and second T-derivative stencils at every layer.
pub(crate) struct TStencils {
    pub first: Vec<Stencil>,
    pub second: Vec<Stencil>,
}

impl TStencils {
    pub fn new(t: &[f64]) -> Self {
        let n = t.len() - 1;
        let mut first = Vec::with_capacity(n + 1);
        let mut second = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s1 = if i == 0 {
                0
            } else if i == n {
                n - 2
            } else {
                i - 1
            };
            first.push(Stencil {
                start: s1,
                centre: i,
                weights: fd_weights(t[i], &t[s1..s1 + 3], 1),
            });
            let (s2, len) = if i == 0 {
                (0, 4)
            } else if i == n {
                (n - 3, 4)
            } else {
                (i - 1, 3)
            };
            second.push(Stencil {
                start: s2,
                centre: i,
                weights: fd_weights(t[i], &t[s2..s2 + len], 2),
            });
        }
        Self { first, second }
    }
}

fn check_grid(chart: &CollarChart, f: &ScalarField) -> Result<()> {
    if chart.n_t < 4 || chart.n_y < 8 {
        return Err(Error::GridTooCoarse {
            n_t: chart.n_t,
            n_y: chart.n_y,
        });
    }
    if f.values.len() != chart.len() {
        return Err(Error::Shape(format!(
            "field `{}` has {} values, chart has {}",
            f.quantity_tag,
            f.values.len(),
            chart.len()
        )));
    }
    Ok(())
}

/// `(∂_T f, ∂_Y f)` with `∂_Y` per unit boundary arclength.
pub fn collar_gradient(chart: &CollarChart, f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    check_grid(chart, f)?;
    let st = TStencils::new(&chart.t_nodes);
    let (nt, ny) = (chart.n_t, chart.n_y);
    let hy = chart.h_y();
    let v = &f.values;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let mut ft = vec![0.0; ny];
            let mut fy = vec![0.0; ny];
            for j in 0..ny {
                ft[j] = st.first[i].apply(|k| v[k * ny + j]);
                let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
                fy[j] = (v[i * ny + jp] - v[i * ny + jm]) / (2.0 * hy);
            }
            (ft, fy)
        })
        .collect();
    let (mut ft, mut fy) = (Vec::with_capacity(chart.len()), Vec::with_capacity(chart.len()));
    for (a, b) in rows {
        ft.extend(a);
        fy.extend(b);
    }
    Ok((
        ScalarField::on_chart(chart, &format!("d{}_dT", f.quantity_tag), ft),
        ScalarField::on_chart(chart, &format!("d{}_dY", f.quantity_tag), fy),
    ))
}

/// Ambient gradient components in the orthonormal frame `(∇d, τ)`:
/// `(∂_T f, J⁻¹ ∂_Y f)`.
pub fn ambient_gradient(chart: &CollarChart, f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let (ft, mut fy) = collar_gradient(chart, f)?;
    for (v, j) in fy.values.iter_mut().zip(&chart.jacobian) {
        *v /= j;
    }
    Ok((ft, fy))
}

/// Ambient Laplacian `J⁻¹[∂_T(J ∂_T f) + ∂_Y(J⁻¹ ∂_Y f)]`, expanded in T as
/// `f_TT − κ/J f_T` and kept conservative in Y.
pub fn collar_laplacian(chart: &CollarChart, f: &ScalarField) -> Result<ScalarField> {
    check_grid(chart, f)?;
    let st = TStencils::new(&chart.t_nodes);
    let (nt, ny) = (chart.n_t, chart.n_y);
    let hy2 = chart.h_y() * chart.h_y();
    let v = &f.values;
    let rows: Vec<Result<Vec<f64>>> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let t = chart.t_nodes[i];
            let mut out = vec![0.0; ny];
            for j in 0..ny {
                let jac = chart.jac(i, j);
                if jac <= 0.0 {
                    return Err(Error::DegenerateChart {
                        t,
                        y: chart.y_nodes[j],
                        jacobian: jac,
                    });
                }
                let ftt = st.second[i].apply(|k| v[k * ny + j]);
                let ft = st.first[i].apply(|k| v[k * ny + j]);
                let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
                let j_plus = 1.0 - chart.kappa_half[j] * t;
                let j_minus = 1.0 - chart.kappa_half[jm] * t;
                let c = v[i * ny + j];
                let yy = ((v[i * ny + jp] - c) / j_plus - (c - v[i * ny + jm]) / j_minus) / hy2;
                out[j] = ftt - chart.kappa_y[j] / jac * ft + yy / jac;
            }
            Ok(out)
        })
        .collect();
    let mut vals = Vec::with_capacity(chart.len());
    for r in rows {
        vals.extend(r?);
    }
    Ok(ScalarField::on_chart(chart, &format!("lap_{}", f.quantity_tag), vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        arclength_reparametrize, build_collar_chart, build_profile_chart, FourierCurve, Grading,
    };
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn disk_chart(nt: usize, ny: usize, grading: Grading) -> CollarChart {
        let c = arclength_reparametrize(&FourierCurve::circle(1.0), 512, "disk", "analytic").unwrap();
        build_collar_chart(Arc::new(c), 0.25, nt, ny, grading).unwrap()
    }

    #[test]
    fn fornberg_matches_textbook() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((w[0] + 1.5).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15 && (w[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_reproduces_linear_and_quadratic() {
        let chart = disk_chart(16, 64, Grading::default());
        let f = ScalarField::from_fn(&chart, "T", |t, _| t);
        let (ft, fy) = collar_gradient(&chart, &f).unwrap();
        assert!(ft.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(fy.values.iter().all(|v| v.abs() < 1e-15));
        let g = ScalarField::from_fn(&chart, "T2", |t, _| t * t);
        let (gt, _) = collar_gradient(&chart, &g).unwrap();
        for i in 0..=16 {
            assert!((gt.at(i, 3) - 2.0 * chart.t_nodes[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_periodic_mode() {
        let mut errs = vec![];
        for ny in [64, 128] {
            let chart = disk_chart(8, ny, Grading::Uniform);
            let p = chart.perimeter;
            let f = ScalarField::from_fn(&chart, "s", |_, y| (2.0 * PI * y / p).sin());
            let (_, fy) = collar_gradient(&chart, &f).unwrap();
            let e = chart
                .y_nodes
                .iter()
                .enumerate()
                .map(|(j, y)| (fy.at(2, j) - 2.0 * PI / p * (2.0 * PI * y / p).cos()).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.9);
    }

    #[test]
    fn laplacian_exact_on_disk_quadratics() {
        let chart = disk_chart(32, 64, Grading::default());
        // v = 1 − r² = 2T − T²
        let v = ScalarField::from_fn(&chart, "v", |t, _| 2.0 * t - t * t);
        let lap = collar_laplacian(&chart, &v).unwrap();
        assert!(lap.values.iter().all(|x| (x + 4.0).abs() < 1e-9));
        let d = ScalarField::from_fn(&chart, "d", |t, _| t);
        let lap = collar_laplacian(&chart, &d).unwrap();
        for i in 0..=32 {
            let t = chart.t_nodes[i];
            assert!((lap.at(i, 5) + 1.0 / (1.0 - t)).abs() < 1e-9);
        }
        let c = ScalarField::from_fn(&chart, "c", |_, _| 3.5);
        assert!(collar_laplacian(&chart, &c).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn laplacian_second_order_on_ellipse() {
        // f = x² on the ellipse collar: Δf = 2
        let e = Arc::new(
            arclength_reparametrize(&FourierCurve::ellipse(2.0, 1.0), 4096, "e", "analytic").unwrap(),
        );
        let mut errs = vec![];
        for (nt, ny) in [(16, 128), (32, 256)] {
            let chart = build_collar_chart(e.clone(), 0.2, nt, ny, Grading::Uniform).unwrap();
            let mut vals = vec![];
            for i in 0..=nt {
                for j in 0..ny {
                    let p = chart.ambient(chart.t_nodes[i], j).unwrap();
                    vals.push(p[0] * p[0]);
                }
            }
            let f = ScalarField::on_chart(&chart, "x2", vals);
            let lap = collar_laplacian(&chart, &f).unwrap();
            errs.push(lap.values.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.7, "{errs:?}");
    }

    #[test]
    fn translation_equivariance() {
        let chart = build_profile_chart(
            Arc::new(|_| (0.7, 0.0)),
            4.0,
            0.2,
            8,
            32,
            Grading::default(),
        )
        .unwrap();
        let f = ScalarField::from_fn(&chart, "f", |t, y| t.sin() * (y * 1.3).cos() + y * 0.0);
        let shifted_vals: Vec<f64> = (0..chart.len())
            .map(|k| {
                let (i, j) = (k / 32, k % 32);
                f.at(i, (j + 5) % 32)
            })
            .collect();
        let g = ScalarField::on_chart(&chart, "g", shifted_vals);
        let lf = collar_laplacian(&chart, &f).unwrap();
        let lg = collar_laplacian(&chart, &g).unwrap();
        for k in 0..chart.len() {
            let (i, j) = (k / 32, k % 32);
            assert_eq!(lg.values[k], lf.at(i, (j + 5) % 32));
        }
    }
}
