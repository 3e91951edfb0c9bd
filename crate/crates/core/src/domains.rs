//! Built-in test domains.

use std::f64::consts::PI;

use crate::geometry::DomainFile;

pub fn disk() -> DomainFile {
    DomainFile {
        name: "disk".into(),
        fourier_x: vec![0.0, 1.0, 0.0],
        fourier_y: vec![0.0, 0.0, 1.0],
        regularity_tag: "analytic".into(),
    }
}

/// Ellipse with semi-axes `a` (along x) and `b`.
pub fn ellipse(a: f64, b: f64) -> DomainFile {
    DomainFile {
        name: format!("ellipse_{a}_{b}"),
        fourier_x: vec![0.0, a, 0.0],
        fourier_y: vec![0.0, 0.0, b],
        regularity_tag: "analytic".into(),
    }
}

/// Polar curve `r(φ) = 1 + ε|2 sin(φ/2)|^{2+α}`, truncated to `harmonics`
/// Fourier modes. Its curvature behaves like `|s|^α` at the foot `(1 + 0, 0)`
/// (arclength `s = 0`), so the boundary is `C^{2,α}` and no better there.
pub fn cusp(alpha: f64, eps: f64, harmonics: usize) -> DomainFile {
    let n = 8 * harmonics;
    let radius = |phi: f64| 1.0 + eps * (2.0 * (0.5 * phi).sin()).abs().powf(2.0 + alpha);
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n as f64;
            let r = radius(phi);
            (r * phi.cos(), r * phi.sin())
        })
        .collect();
    let project = |pick: fn(&(f64, f64)) -> f64| {
        let mut c = vec![samples.iter().map(pick).sum::<f64>() / n as f64];
        for k in 1..=harmonics {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, s) in samples.iter().enumerate() {
                let arg = 2.0 * PI * (k * i % n) as f64 / n as f64;
                a += pick(s) * arg.cos();
                b += pick(s) * arg.sin();
            }
            c.push(2.0 * a / n as f64);
            c.push(2.0 * b / n as f64);
        }
        c
    };
    DomainFile {
        name: format!("cusp_{alpha}"),
        fourier_x: project(|s| s.0),
        fourier_y: project(|s| s.1),
        regularity_tag: format!("C^{{2,{alpha}}} at s=0 ({harmonics} harmonics)"),
    }
}

/// Default cusp amplitude and truncation.
pub const CUSP_EPS: f64 = 0.1;
pub const CUSP_HARMONICS: usize = 512;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryInfo;

    #[test]
    fn cusp_series_reproduces_radius() {
        let d = cusp(0.5, CUSP_EPS, 128);
        let f = d.fourier();
        for phi in [0.0, 0.3, 1.0, 2.5, PI] {
            let p = f.point(phi);
            let r = 1.0 + CUSP_EPS * (2.0 * (0.5 * phi as f64).sin()).abs().powf(2.5);
            assert!((p[0] - r * phi.cos()).abs() < 1e-5, "{phi}");
            assert!((p[1] - r * phi.sin()).abs() < 1e-5);
        }
        let c = d.curve().unwrap();
        let info = GeometryInfo::of(&c);
        assert!(info.kappa_min > 0.3 && info.kappa_max < 1.5, "{info:?}");
    }

    #[test]
    fn ellipse_info() {
        let c = ellipse(2.0, 1.0).curve().unwrap();
        let info = GeometryInfo::of(&c);
        assert!((info.kappa_max - 2.0).abs() < 1e-6 && (info.kappa_min - 0.25).abs() < 1e-6);
    }
}
