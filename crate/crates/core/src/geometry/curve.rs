//! Closed Fourier curves and their arclength parametrization.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Minimum admissible speed `|γ'(t)|` relative to the mean speed.
const REGULARITY_TOL: f64 = 1e-8;
/// Tie tolerance for competing foot points.
const TIE_TOL: f64 = 1e-9;

pub type Point = [f64; 2];

fn gauss12() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(12))
}

/// A closed curve `t ↦ (x(t), y(t))`, `t ∈ [0, 2π)`, given by trigonometric
/// polynomials with coefficients `[a0, a1, b1, a2, b2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    pub coeffs_x: Vec<f64>,
    pub coeffs_y: Vec<f64>,
}

/// Position and the first three `t`-derivatives of a curve at one parameter.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub pos: Point,
    pub d1: Point,
    pub d2: Point,
    pub d3: Point,
}

impl FourierCurve {
    pub fn new(coeffs_x: Vec<f64>, coeffs_y: Vec<f64>) -> Self {
        Self { coeffs_x, coeffs_y }
    }

    /// Circle of radius `r` traversed counterclockwise.
    pub fn circle(r: f64) -> Self {
        Self::new(vec![0.0, r, 0.0], vec![0.0, 0.0, r])
    }

    /// Ellipse `(a cos t, b sin t)`.
    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::new(vec![0.0, a, 0.0], vec![0.0, 0.0, b])
    }

    pub fn harmonics(&self) -> usize {
        self.coeffs_x.len().max(self.coeffs_y.len()) / 2
    }

    pub fn jet(&self, t: f64) -> Jet {
        let (x, y) = (eval_series(&self.coeffs_x, t), eval_series(&self.coeffs_y, t));
        Jet {
            pos: [x[0], y[0]],
            d1: [x[1], y[1]],
            d2: [x[2], y[2]],
            d3: [x[3], y[3]],
        }
    }

    pub fn point(&self, t: f64) -> Point {
        self.jet(t).pos
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.jet(t).d1;
        d[0].hypot(d[1])
    }

    /// Signed enclosed area (positive when counterclockwise).
    pub fn signed_area(&self) -> f64 {
        // exact for trigonometric polynomials: π Σ k (a^x_k b^y_k − b^x_k a^y_k)
        let k_max = self.harmonics();
        let c = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
        let mut acc = 0.0;
        for k in 1..=k_max {
            let (ax, bx) = (c(&self.coeffs_x, 2 * k - 1), c(&self.coeffs_x, 2 * k));
            let (ay, by) = (c(&self.coeffs_y, 2 * k - 1), c(&self.coeffs_y, 2 * k));
            acc += k as f64 * (ax * by - bx * ay);
        }
        PI * acc
    }

    /// The same curve traversed in the opposite direction (`t ↦ -t`).
    pub fn reversed(&self) -> Self {
        let flip = |v: &Vec<f64>| {
            v.iter()
                .enumerate()
                .map(|(i, c)| if i > 0 && i % 2 == 0 { -c } else { *c })
                .collect()
        };
        Self::new(flip(&self.coeffs_x), flip(&self.coeffs_y))
    }
}

/// Value and first three derivatives of `a0 + Σ a_k cos kt + b_k sin kt`.
fn eval_series(c: &[f64], t: f64) -> [f64; 4] {
    let mut out = [c.first().copied().unwrap_or(0.0), 0.0, 0.0, 0.0];
    let (s1, c1) = t.sin_cos();
    let (mut sk, mut ck) = (s1, c1);
    let mut k = 1;
    while 2 * k - 1 < c.len() {
        let a = c[2 * k - 1];
        let b = c.get(2 * k).copied().unwrap_or(0.0);
        let kf = k as f64;
        let cos_part = a * ck + b * sk;
        let sin_part = -a * sk + b * ck;
        out[0] += cos_part;
        out[1] += kf * sin_part;
        out[2] -= kf * kf * cos_part;
        out[3] -= kf * kf * kf * sin_part;
        let next_c = ck * c1 - sk * s1;
        let next_s = sk * c1 + ck * s1;
        ck = next_c;
        sk = next_s;
        k += 1;
    }
    out
}

/// A simple, regular, counterclockwise closed curve evaluated by arclength
/// `s ∈ [0, perimeter)`.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub name: String,
    pub fourier: FourierCurve,
    pub perimeter: f64,
    pub samples_per_period: usize,
    pub regularity_tag: String,
    /// Cumulative arclength at `t_k = 2πk / samples_per_period`.
    s_table: Vec<f64>,
    /// Points at uniform arclength `s_k = k·perimeter / samples_per_period`.
    samples: Vec<Point>,
    /// Inward normals at the uniform samples.
    sample_normals: Vec<Point>,
}

/// Local geometric data at one boundary point.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub point: Point,
    pub tangent: Point,
    /// Inward unit normal (tangent rotated by +90°).
    pub normal: Point,
    pub curvature: f64,
    /// `dκ/ds`.
    pub curvature_slope: f64,
}

/// Reparametrize a Fourier curve by arclength, orienting it counterclockwise.
pub fn arclength_reparametrize(
    curve: &FourierCurve,
    samples_per_period: usize,
    name: &str,
    regularity_tag: &str,
) -> Result<BoundaryCurve> {
    let n = samples_per_period.max(64);
    let mut fourier = curve.clone();
    if fourier.signed_area() < 0.0 {
        fourier = fourier.reversed();
    }
    let dt = 2.0 * PI / n as f64;
    let speeds: Vec<f64> = (0..n).map(|k| fourier.speed(k as f64 * dt)).collect();
    let mean = speeds.iter().sum::<f64>() / n as f64;
    let min_speed = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_speed > REGULARITY_TOL * mean.max(1e-300)) {
        return Err(Error::NonRegularCurve { min_speed });
    }
    let rule = gauss12();
    let panels: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let a = k as f64 * dt;
            rule.integrate(a, a + dt, |t| fourier.speed(t))
        })
        .collect();
    let mut s_table = Vec::with_capacity(n + 1);
    s_table.push(0.0);
    for p in &panels {
        s_table.push(s_table.last().unwrap() + p);
    }
    let perimeter = s_table[n];
    let mut out = BoundaryCurve {
        name: name.to_string(),
        fourier,
        perimeter,
        samples_per_period: n,
        regularity_tag: regularity_tag.to_string(),
        s_table,
        samples: Vec::new(),
        sample_normals: Vec::new(),
    };
    let frames: Vec<Frame> = (0..n)
        .into_par_iter()
        .map(|k| out.frame(k as f64 * perimeter / n as f64))
        .collect();
    out.samples = frames.iter().map(|f| f.point).collect();
    out.sample_normals = frames.iter().map(|f| f.normal).collect();
    out.check_simple()?;
    Ok(out)
}

impl BoundaryCurve {
    /// Wrap `s` into `[0, perimeter)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let r = s.rem_euclid(self.perimeter);
        if r >= self.perimeter {
            0.0
        } else {
            r
        }
    }

    /// Parameter `t` of the underlying Fourier curve at arclength `s`.
    pub fn param_of_arclength(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        let n = self.samples_per_period;
        let dt = 2.0 * PI / n as f64;
        let k = match self
            .s_table
            .binary_search_by(|v| v.partial_cmp(&s).unwrap())
        {
            Ok(k) => return k as f64 * dt,
            Err(k) => k - 1,
        };
        let t0 = k as f64 * dt;
        let rule = gauss12();
        let (s_lo, s_hi) = (self.s_table[k], self.s_table[k + 1]);
        let mut t = t0 + dt * (s - s_lo) / (s_hi - s_lo);
        for _ in 0..30 {
            let cur = s_lo + rule.integrate(t0, t, |x| self.fourier.speed(x));
            let step = (cur - s) / self.fourier.speed(t);
            t -= step;
            if step.abs() < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }

    pub fn frame(&self, s: f64) -> Frame {
        let t = self.param_of_arclength(s);
        let j = self.fourier.jet(t);
        let speed = j.d1[0].hypot(j.d1[1]);
        let tangent = [j.d1[0] / speed, j.d1[1] / speed];
        let cross = j.d1[0] * j.d2[1] - j.d1[1] * j.d2[0];
        let cross_t = j.d1[0] * j.d3[1] - j.d1[1] * j.d3[0];
        let dot = j.d1[0] * j.d2[0] + j.d1[1] * j.d2[1];
        let curvature = cross / speed.powi(3);
        let dk_dt = cross_t / speed.powi(3) - 3.0 * cross * dot / speed.powi(5);
        Frame {
            point: j.pos,
            tangent,
            normal: [-tangent[1], tangent[0]],
            curvature,
            curvature_slope: dk_dt / speed,
        }
    }

    pub fn point(&self, s: f64) -> Point {
        self.fourier.point(self.param_of_arclength(s))
    }

    /// Unit tangent `dγ/ds`.
    pub fn tangent(&self, s: f64) -> Point {
        self.frame(s).tangent
    }

    /// Second derivative `d²γ/ds²` (equal to `κ ν`).
    pub fn acceleration(&self, s: f64) -> Point {
        let f = self.frame(s);
        [f.curvature * f.normal[0], f.curvature * f.normal[1]]
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    /// Distance to the nearest uniform sample, signed by the side of that
    /// sample's tangent line (positive inside). Accurate to the sample
    /// spacing; used to skip exact foot searches far from the boundary.
    pub fn approx_distance(&self, p: Point) -> f64 {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (k, q) in self.samples.iter().enumerate() {
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if d2 < best {
                best = d2;
                arg = k;
            }
        }
        let (q, nu) = (self.samples[arg], self.sample_normals[arg]);
        let side = (p[0] - q[0]) * nu[0] + (p[1] - q[1]) * nu[1];
        if side < 0.0 {
            -best.sqrt()
        } else {
            best.sqrt()
        }
    }

    /// Curvature at `samples_per_period` uniform arclength samples.
    pub fn sampled_curvature(&self) -> Vec<f64> {
        let n = self.samples_per_period;
        (0..n)
            .into_par_iter()
            .map(|k| curvature(self, k as f64 * self.perimeter / n as f64))
            .collect()
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.sampled_curvature()
            .into_iter()
            .fold(0.0, |m: f64, k| m.max(k.abs()))
    }

    /// Reach of the interior collar, `inf |q − p|² / (2 (q − p)·ν_p)` over
    /// sample pairs with `q` on the inner side of the tangent at `p`, capped
    /// by `1/max κ`.
    pub fn reach(&self) -> f64 {
        let curv = 1.0 / self.max_abs_curvature().max(1e-300);
        let stride = (self.samples.len() / 2048).max(1);
        let n = self.samples.len();
        let idx: Vec<usize> = (0..n).step_by(stride).collect();
        let normals: Vec<Point> = idx.iter().map(|&k| self.sample_normals[k]).collect();
        let best = (0..idx.len())
            .into_par_iter()
            .map(|a| {
                let p = self.samples[idx[a]];
                let nu = normals[a];
                let mut b = f64::INFINITY;
                for (c, &k) in idx.iter().enumerate() {
                    if c == a {
                        continue;
                    }
                    let q = self.samples[k];
                    let r = [q[0] - p[0], q[1] - p[1]];
                    let up = r[0] * nu[0] + r[1] * nu[1];
                    if up > 0.0 {
                        b = b.min((r[0] * r[0] + r[1] * r[1]) / (2.0 * up));
                    }
                }
                b
            })
            .reduce(|| f64::INFINITY, f64::min);
        curv.min(best)
    }

    fn coarse_samples(&self, target: usize) -> Vec<Point> {
        let stride = (self.samples.len() / target).max(1);
        self.samples.iter().step_by(stride).copied().collect()
    }

    /// Reject sample polygons with crossing non-adjacent edges.
    fn check_simple(&self) -> Result<()> {
        let pts = self.coarse_samples(1024);
        let m = pts.len();
        let hit = (0..m).into_par_iter().find_map_first(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let (c, d) = (pts[j], pts[(j + 1) % m]);
                if segments_cross(a, b, c, d) {
                    return Some((i, j));
                }
            }
            None
        });
        match hit {
            Some((first, second)) => Err(Error::SelfIntersecting { first, second }),
            None => Ok(()),
        }
    }

    /// Refined local minimizers `(distance, arclength)` of `s ↦ |p − γ(s)|`,
    /// closest first.
    fn foot_candidates(&self, p: Point) -> Vec<(f64, f64)> {
        let n = self.samples.len();
        let step = self.perimeter / n as f64;
        let stride = 8.min(n);
        let coarse: Vec<(usize, f64)> = (0..n)
            .step_by(stride)
            .map(|k| (k, dist(p, self.samples[k])))
            .collect();
        let best = coarse.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        // a coarse sample can miss the minimum by at most half its spacing
        let margin = stride as f64 * step;
        let mut refined: Vec<(f64, f64)> = Vec::new();
        let m = coarse.len();
        for (ci, &(k, d)) in coarse.iter().enumerate() {
            if d > best + margin {
                continue;
            }
            let prev = coarse[(ci + m - 1) % m].1;
            let next = coarse[(ci + 1) % m].1;
            if (d > prev || d > next) && d > best + 1e-12 {
                continue;
            }
            // fine scan around the coarse sample
            let mut kb = k;
            let mut db = d;
            for off in 1..=stride {
                for kk in [(k + off) % n, (k + n - off) % n] {
                    let dd = dist(p, self.samples[kk]);
                    if dd < db {
                        db = dd;
                        kb = kk;
                    }
                }
            }
            let s = self.newton_foot(p, kb as f64 * step);
            let ds = dist(p, self.point(s));
            refined.push((ds, s));
        }
        refined.sort_by(|a, b| a.partial_cmp(b).unwrap());
        refined
    }

    /// Newton refinement of `(p − γ(s))·γ'(s) = 0`.
    fn newton_foot(&self, p: Point, s0: f64) -> f64 {
        let mut s = s0;
        let step_cap = self.perimeter / self.samples_per_period as f64 * 2.0;
        for _ in 0..50 {
            let f = self.frame(s);
            let r = [p[0] - f.point[0], p[1] - f.point[1]];
            let g = r[0] * f.tangent[0] + r[1] * f.tangent[1];
            // d/ds: −1 + (p−γ)·κν
            let dg = -1.0 + f.curvature * (r[0] * f.normal[0] + r[1] * f.normal[1]);
            if dg.abs() < 1e-14 {
                break;
            }
            let step = (g / dg).clamp(-step_cap, step_cap);
            s -= step;
            if step.abs() < 1e-14 * self.perimeter {
                break;
            }
        }
        self.wrap(s)
    }

    /// Nearest boundary point `(d, s_foot)` with no uniqueness check; points
    /// outside the curve get a negative distance.
    pub fn nearest_foot(&self, p: Point) -> (f64, f64) {
        let cands = self.foot_candidates(p);
        let (d, s) = cands[0];
        let f = self.frame(s);
        let side = (p[0] - f.point[0]) * f.normal[0] + (p[1] - f.point[1]) * f.normal[1];
        if side < 0.0 {
            (-d, s)
        } else {
            (d, s)
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.nearest_foot(p).0 > 0.0
    }
}

/// Curvature `κ(s) = det(γ'(s), γ''(s))`, positive on convex counterclockwise
/// curves.
pub fn curvature(curve: &BoundaryCurve, s: f64) -> f64 {
    curve.frame(s).curvature
}

/// Distance to the boundary and the arclength of the unique foot point.
pub fn signed_distance(curve: &BoundaryCurve, p: Point) -> Result<(f64, f64)> {
    let cands = curve.foot_candidates(p);
    let (d, s) = cands[0];
    let f = curve.frame(s);
    let side = (p[0] - f.point[0]) * f.normal[0] + (p[1] - f.point[1]) * f.normal[1];
    if side < -TIE_TOL {
        return Err(Error::OutsideDomain { x: p[0], y: p[1] });
    }
    let sep_min = curve.perimeter / curve.samples_per_period as f64 * 4.0;
    let mut feet = vec![s];
    for &(d2, s2) in &cands[1..] {
        if (d2 - d).abs() <= TIE_TOL * d.max(1.0) {
            let gap = (s2 - s).abs();
            let gap = gap.min(curve.perimeter - gap);
            if gap > sep_min && feet.iter().all(|f| {
                let g = (s2 - f).abs();
                g.min(curve.perimeter - g) > sep_min
            }) {
                feet.push(s2);
            }
        }
    }
    if feet.len() > 1 {
        return Err(Error::AmbiguousFoot { distance: d, feet });
    }
    Ok((d, s))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    fn circle(r: f64) -> BoundaryCurve {
        arclength_reparametrize(&FourierCurve::circle(r), 1024, "circle", "analytic").unwrap()
    }

    fn ellipse() -> BoundaryCurve {
        arclength_reparametrize(&FourierCurve::ellipse(2.0, 1.0), 4096, "ellipse", "analytic")
            .unwrap()
    }

    #[test]
    fn circle_perimeters() {
        assert!((circle(1.0).perimeter - 2.0 * PI).abs() < 1e-12);
        assert!((circle(2.0).perimeter - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ellipse_perimeter_against_simpson() {
        let raw = FourierCurve::ellipse(2.0, 1.0);
        let oracle = adaptive_simpson(&|t| raw.speed(t), 0.0, 2.0 * PI, 1e-13);
        let e = ellipse();
        assert!((e.perimeter - oracle).abs() < 1e-9);
        assert!((e.perimeter - 9.6884482205).abs() < 1e-9);
    }

    #[test]
    fn unit_speed_after_reparametrization() {
        let e = ellipse();
        for k in 0..200 {
            let s = k as f64 * e.perimeter / 200.0 + 0.0123;
            let h = 1e-5;
            let a = e.point(s + h);
            let b = e.point(s - h);
            let speed = dist(a, b) / (2.0 * h);
            assert!((speed - 1.0).abs() < 1e-8, "s = {s}: {speed}");
            let t = e.tangent(s);
            assert!((t[0].hypot(t[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_values() {
        let c = circle(2.0);
        for k in 0..100 {
            let s = k as f64 * 0.37;
            assert!((curvature(&c, s) - 0.5).abs() < 1e-10);
        }
        let e = ellipse();
        assert!((curvature(&e, 0.0) - 2.0).abs() < 1e-10);
        assert_eq!(e.point(0.0), [2.0, 0.0]);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let raw = FourierCurve::circle(1.0).reversed();
        assert!(raw.signed_area() < 0.0);
        let c = arclength_reparametrize(&raw, 256, "c", "analytic").unwrap();
        assert!((curvature(&c, 1.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distance_examples() {
        let c = circle(1.0);
        let (d, s) = signed_distance(&c, [0.5, 0.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let f = c.point(s);
        assert!((f[0] - 1.0).abs() < 1e-10 && f[1].abs() < 1e-10);
        match signed_distance(&c, [0.0, 0.0]) {
            Err(Error::AmbiguousFoot { distance, .. }) => assert!((distance - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            signed_distance(&c, [1.5, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn ellipse_center_has_two_feet() {
        let e = ellipse();
        match signed_distance(&e, [0.0, 0.0]) {
            Err(Error::AmbiguousFoot { distance, feet }) => {
                assert!((distance - 1.0).abs() < 1e-10);
                assert_eq!(feet.len(), 2);
                for s in feet {
                    let p = e.point(s);
                    assert!(p[0].abs() < 1e-8 && (p[1].abs() - 1.0).abs() < 1e-8);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foot_reconstructs_point() {
        let e = ellipse();
        for k in 0..40 {
            let s0 = k as f64 * e.perimeter / 40.0;
            let f = e.frame(s0);
            let d = 0.3;
            let p = [f.point[0] + d * f.normal[0], f.point[1] + d * f.normal[1]];
            let (dd, s) = signed_distance(&e, p).unwrap();
            let g = e.frame(s);
            let q = [g.point[0] + dd * g.normal[0], g.point[1] + dd * g.normal[1]];
            assert!(dist(p, q) < 1e-8);
            assert!((dd - d).abs() < 1e-9);
        }
    }

    #[test]
    fn reach_estimates() {
        assert!((circle(1.0).reach() - 1.0).abs() < 1e-9);
        assert!((ellipse().reach() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn degenerate_curve_rejected() {
        let flat = FourierCurve::new(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]);
        assert!(matches!(
            arclength_reparametrize(&flat, 256, "flat", ""),
            Err(Error::NonRegularCurve { .. })
        ));
    }

    #[test]
    fn figure_eight_rejected() {
        // (sin t, sin 2t / 2) crosses itself at the origin
        let eight = FourierCurve::new(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0, 0.5]);
        assert!(matches!(
            arclength_reparametrize(&eight, 512, "eight", ""),
            Err(Error::SelfIntersecting { .. })
        ));
    }

    #[test]
    fn curvature_slope_matches_difference() {
        let e = ellipse();
        let s = 0.7;
        let h = 1e-4;
        let fd = (curvature(&e, s + h) - curvature(&e, s - h)) / (2.0 * h);
        assert!((e.frame(s).curvature_slope - fd).abs() < 1e-6);
    }
}
