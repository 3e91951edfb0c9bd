//! Domain files and the geometry summary report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::curve::{arclength_reparametrize, BoundaryCurve, FourierCurve};
use crate::error::Result;

/// Default number of arclength samples per period.
pub const DEFAULT_SAMPLES: usize = 4096;

/// On-disk description of a domain: Fourier coefficients of its boundary in
/// `[a0, a1, b1, a2, b2, ...]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub name: String,
    pub fourier_x: Vec<f64>,
    pub fourier_y: Vec<f64>,
    #[serde(default)]
    pub regularity_tag: String,
}

impl DomainFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn fourier(&self) -> FourierCurve {
        FourierCurve::new(self.fourier_x.clone(), self.fourier_y.clone())
    }

    /// Arclength-parametrized boundary. Curves with many harmonics get a
    /// denser sample table.
    pub fn curve(&self) -> Result<BoundaryCurve> {
        let k = self.fourier_x.len().max(self.fourier_y.len()) / 2;
        let samples = DEFAULT_SAMPLES.max((16 * k).next_power_of_two());
        arclength_reparametrize(&self.fourier(), samples, &self.name, &self.regularity_tag)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryInfo {
    pub name: String,
    pub regularity_tag: String,
    pub perimeter: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub reach: f64,
    pub harmonics: usize,
}

impl GeometryInfo {
    pub fn of(curve: &BoundaryCurve) -> Self {
        let k = curve.sampled_curvature();
        Self {
            name: curve.name.clone(),
            regularity_tag: curve.regularity_tag.clone(),
            perimeter: curve.perimeter,
            kappa_min: k.iter().copied().fold(f64::INFINITY, f64::min),
            kappa_max: k.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            reach: curve.reach(),
            harmonics: curve.fourier.harmonics(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_info() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        let dom = DomainFile {
            name: "ellipse".into(),
            fourier_x: vec![0.0, 2.0, 0.0],
            fourier_y: vec![0.0, 0.0, 1.0],
            regularity_tag: "analytic".into(),
        };
        dom.save(&path).unwrap();
        let back = DomainFile::load(&path).unwrap();
        assert_eq!(back, dom);
        let info = GeometryInfo::of(&back.curve().unwrap());
        assert!((info.kappa_max - 2.0).abs() < 1e-9);
        assert!((info.kappa_min - 0.25).abs() < 1e-9);
        assert!((info.reach - 0.5).abs() < 1e-6);
    }
}
