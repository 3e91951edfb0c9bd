//! Tubular collar charts `(T, Y)` = (distance to the boundary, arclength of
//! the foot point).

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::{BoundaryCurve, Point};
use crate::error::{Error, Result};

/// Node distribution in the distance direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Cell widths shrink by `ratio` per cell toward `T = 0`.
    Geometric { ratio: f64 },
}

impl Default for Grading {
    fn default() -> Self {
        Grading::Geometric { ratio: 0.85 }
    }
}

impl Grading {
    /// `n + 1` nodes on `[0, delta]` with both endpoints exact.
    pub fn nodes(&self, delta: f64, n: usize) -> Vec<f64> {
        let mut t: Vec<f64> = match *self {
            Grading::Uniform => (0..=n).map(|i| delta * i as f64 / n as f64).collect(),
            Grading::Geometric { ratio } => {
                let q = 1.0 / ratio;
                let denom = q.powi(n as i32) - 1.0;
                (0..=n)
                    .map(|i| delta * (q.powi(i as i32) - 1.0) / denom)
                    .collect()
            }
        };
        t[0] = 0.0;
        t[n] = delta;
        t
    }

    /// Grading of the doubled grid; its even nodes coincide with the
    /// current nodes.
    pub fn refined(&self) -> Self {
        match *self {
            Grading::Uniform => Grading::Uniform,
            Grading::Geometric { ratio } => Grading::Geometric {
                ratio: ratio.sqrt(),
            },
        }
    }
}

/// Curvature profile `Y ↦ (κ, dκ/dY)` for charts not backed by a curve.
pub type CurvatureProfile = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub enum ChartSource {
    Curve(Arc<BoundaryCurve>),
    Profile(CurvatureProfile),
}

impl fmt::Debug for ChartSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartSource::Curve(c) => write!(f, "Curve({})", c.name),
            ChartSource::Profile(_) => write!(f, "Profile"),
        }
    }
}

/// Collar grid: `t_nodes[0..=n_t]` in `[0, delta]`, periodic uniform
/// `y_nodes[0..n_y]` in `[0, perimeter)`.
#[derive(Debug, Clone)]
pub struct CollarChart {
    pub source: ChartSource,
    pub perimeter: f64,
    pub delta: f64,
    pub n_t: usize,
    pub n_y: usize,
    pub grading: Grading,
    pub t_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub kappa_y: Vec<f64>,
    /// κ at `Y_j + hY/2`.
    pub kappa_half: Vec<f64>,
    /// dκ/dY at the Y nodes.
    pub kappa_slope: Vec<f64>,
    /// Metric factor `1 − κ(Y)T`, indexed `i_t * n_y + i_y`.
    pub jacobian: Vec<f64>,
    /// Boundary points and inward normals at the Y nodes (curve charts only).
    pub frames: Vec<(Point, Point)>,
}

impl CollarChart {
    #[inline]
    pub fn idx(&self, i_t: usize, i_y: usize) -> usize {
        i_t * self.n_y + i_y
    }

    pub fn len(&self) -> usize {
        (self.n_t + 1) * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_y(&self) -> f64 {
        self.perimeter / self.n_y as f64
    }

    /// Smallest positive T node.
    pub fn first_layer(&self) -> f64 {
        self.t_nodes[1]
    }

    pub fn jac(&self, i_t: usize, i_y: usize) -> f64 {
        self.jacobian[self.idx(i_t, i_y)]
    }

    /// κ and dκ/dY at an arbitrary arclength.
    pub fn curvature_at(&self, y: f64) -> (f64, f64) {
        match &self.source {
            ChartSource::Curve(c) => {
                let f = c.frame(y);
                (f.curvature, f.curvature_slope)
            }
            ChartSource::Profile(p) => p(y.rem_euclid(self.perimeter)),
        }
    }

    /// Ambient point with chart coordinates `(T, Y_j)`.
    pub fn ambient(&self, t: f64, i_y: usize) -> Option<Point> {
        let (p, n) = self.frames.get(i_y)?;
        Some([p[0] + t * n[0], p[1] + t * n[1]])
    }

    /// Same chart with `n_t` and `n_y` doubled; the current nodes are a
    /// subset of the new ones.
    pub fn refined(&self) -> Result<Self> {
        build_chart(
            self.source.clone(),
            self.perimeter,
            self.delta,
            2 * self.n_t,
            2 * self.n_y,
            self.grading.refined(),
        )
    }

    /// Same chart with a different depth and grid.
    pub fn with_grid(&self, delta: f64, n_t: usize, n_y: usize, grading: Grading) -> Result<Self> {
        build_chart(self.source.clone(), self.perimeter, delta, n_t, n_y, grading)
    }

    /// FNV-1a hash of the grid and curvature samples, used to tag field dumps.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.perimeter);
        eat(self.delta);
        for v in self.t_nodes.iter().chain(&self.y_nodes).chain(&self.kappa_y) {
            eat(*v);
        }
        h
    }
}

/// `Δd = −κ/(1 − κT)` at chart coordinates `(T, Y)`.
pub fn laplacian_distance(chart: &CollarChart, t: f64, y: f64) -> Result<f64> {
    let (k, _) = chart.curvature_at(y);
    laplacian_distance_from_curvature(k, t, y)
}

pub(crate) fn laplacian_distance_from_curvature(kappa: f64, t: f64, y: f64) -> Result<f64> {
    let j = 1.0 - kappa * t;
    if j <= 0.0 {
        return Err(Error::DegenerateChart { t, y, jacobian: j });
    }
    Ok(-kappa / j)
}

/// Collar chart over a boundary curve.
pub fn build_collar_chart(
    curve: Arc<BoundaryCurve>,
    delta: f64,
    n_t: usize,
    n_y: usize,
    grading: Grading,
) -> Result<CollarChart> {
    let perimeter = curve.perimeter;
    if delta > 0.5 {
        return Err(Error::CollarTooDeep {
            delta,
            reach: curve.reach(),
        });
    }
    if n_t >= 4 && n_y >= 8 {
        let reach = curve.reach();
        if delta >= reach {
            return Err(Error::CollarTooDeep { delta, reach });
        }
    }
    build_chart(ChartSource::Curve(curve), perimeter, delta, n_t, n_y, grading)
}

/// Collar chart for a prescribed curvature profile (no ambient embedding).
pub fn build_profile_chart(
    profile: CurvatureProfile,
    perimeter: f64,
    delta: f64,
    n_t: usize,
    n_y: usize,
    grading: Grading,
) -> Result<CollarChart> {
    build_chart(
        ChartSource::Profile(profile),
        perimeter,
        delta,
        n_t,
        n_y,
        grading,
    )
}

fn build_chart(
    source: ChartSource,
    perimeter: f64,
    delta: f64,
    n_t: usize,
    n_y: usize,
    grading: Grading,
) -> Result<CollarChart> {
    if n_t < 4 || n_y < 8 {
        return Err(Error::GridTooCoarse { n_t, n_y });
    }
    if !(delta > 0.0) || delta > 0.5 {
        return Err(Error::CollarTooDeep {
            delta,
            reach: f64::NAN,
        });
    }
    if let Grading::Geometric { ratio } = grading {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::config("grading.ratio", "must lie in (0, 1]"));
        }
    }
    let grading = match grading {
        Grading::Geometric { ratio } if ratio == 1.0 => Grading::Uniform,
        g => g,
    };
    let t_nodes = grading.nodes(delta, n_t);
    let h_y = perimeter / n_y as f64;
    let y_nodes: Vec<f64> = (0..n_y).map(|j| j as f64 * h_y).collect();
    let eval = |y: f64| -> (f64, f64, Option<(Point, Point)>) {
        match &source {
            ChartSource::Curve(c) => {
                let f = c.frame(y);
                (f.curvature, f.curvature_slope, Some((f.point, f.normal)))
            }
            ChartSource::Profile(p) => {
                let (k, dk) = p(y);
                (k, dk, None)
            }
        }
    };
    let at_nodes: Vec<_> = y_nodes.par_iter().map(|&y| eval(y)).collect();
    let kappa_half: Vec<f64> = y_nodes
        .par_iter()
        .map(|&y| eval(y + 0.5 * h_y).0)
        .collect();
    let kappa_y: Vec<f64> = at_nodes.iter().map(|a| a.0).collect();
    let kappa_slope: Vec<f64> = at_nodes.iter().map(|a| a.1).collect();
    let frames: Vec<(Point, Point)> = at_nodes.iter().filter_map(|a| a.2).collect();

    let kmax = kappa_y
        .iter()
        .chain(&kappa_half)
        .fold(0.0f64, |m, k| m.max(*k));
    if kmax * delta >= 1.0 {
        return Err(Error::CollarTooDeep {
            delta,
            reach: 1.0 / kmax,
        });
    }
    let mut jacobian = Vec::with_capacity((n_t + 1) * n_y);
    for &t in &t_nodes {
        for (j, &k) in kappa_y.iter().enumerate() {
            let jac = 1.0 - k * t;
            if jac <= 0.0 {
                return Err(Error::DegenerateChart {
                    t,
                    y: y_nodes[j],
                    jacobian: jac,
                });
            }
            jacobian.push(jac);
        }
    }
    Ok(CollarChart {
        source,
        perimeter,
        delta,
        n_t,
        n_y,
        grading,
        t_nodes,
        y_nodes,
        kappa_y,
        kappa_half,
        kappa_slope,
        jacobian,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curve::{arclength_reparametrize, FourierCurve};

    fn unit_circle() -> Arc<BoundaryCurve> {
        Arc::new(arclength_reparametrize(&FourierCurve::circle(1.0), 512, "disk", "analytic").unwrap())
    }

    #[test]
    fn uniform_disk_chart() {
        let chart = build_collar_chart(unit_circle(), 0.25, 16, 64, Grading::Uniform).unwrap();
        assert_eq!(chart.t_nodes[0], 0.0);
        assert_eq!(chart.t_nodes[16], 0.25);
        let (lo, hi) = chart
            .jacobian
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), j| (a.min(*j), b.max(*j)));
        assert!((lo - 0.75).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_grading_is_nested_under_refinement() {
        let g = Grading::Geometric { ratio: 0.85 };
        let coarse = g.nodes(0.2, 64);
        let fine = g.refined().nodes(0.2, 128);
        for i in 0..=64 {
            assert!((coarse[i] - fine[2 * i]).abs() < 1e-15);
        }
        assert!(coarse[1] < 2e-6);
        assert!(coarse.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn too_deep_or_too_coarse() {
        let c = unit_circle();
        assert!(matches!(
            build_collar_chart(c.clone(), 0.6, 16, 64, Grading::Uniform),
            Err(Error::CollarTooDeep { .. })
        ));
        assert!(matches!(
            build_collar_chart(c, 0.2, 3, 64, Grading::Uniform),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn laplacian_distance_examples() {
        let chart = build_collar_chart(unit_circle(), 0.5, 16, 64, Grading::Uniform).unwrap();
        assert!((laplacian_distance(&chart, 0.0, 0.3).unwrap() + 1.0).abs() < 1e-10);
        assert!((laplacian_distance(&chart, 0.5, 0.3).unwrap() + 2.0).abs() < 1e-9);
        let flat = build_profile_chart(Arc::new(|_| (0.0, 0.0)), 1.0, 0.2, 8, 16, Grading::Uniform)
            .unwrap();
        assert_eq!(laplacian_distance(&flat, 0.1, 0.5).unwrap(), 0.0);
        assert!(matches!(
            laplacian_distance_from_curvature(2.0, 0.5, 0.0),
            Err(Error::DegenerateChart { .. })
        ));
    }

    #[test]
    fn hash_changes_with_grid() {
        let c = unit_circle();
        let a = build_collar_chart(c.clone(), 0.2, 16, 64, Grading::Uniform).unwrap();
        let b = build_collar_chart(c, 0.2, 16, 64, Grading::default()).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), a.clone().hash());
    }
}
