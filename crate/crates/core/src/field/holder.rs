//! Discrete Hölder seminorms and log-log exponent fits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point count above which pairs are taken from a seeded subsample.
pub const BRUTE_FORCE_LIMIT: usize = 2000;
/// Seminorms below this are treated as zero by [`estimate_exponent`].
pub const FIT_FLOOR: f64 = 1e-13;

/// `max |f(p) − f(q)| / |p − q|^α` over pairs of distinct points. Beyond
/// [`BRUTE_FORCE_LIMIT`] points the maximum runs over a subsample chosen by a
/// ChaCha8 shuffle with the given seed.
pub fn holder_seminorm(points: &[[f64; 2]], values: &[f64], alpha: f64, seed: u64) -> f64 {
    assert_eq!(points.len(), values.len());
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let idx: Vec<usize> = if n <= BRUTE_FORCE_LIMIT {
        (0..n).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(BRUTE_FORCE_LIMIT);
        all.sort_unstable();
        all
    };
    let m = idx.len();
    (0..m)
        .into_par_iter()
        .map(|a| {
            let (p, fp) = (points[idx[a]], values[idx[a]]);
            let mut best = 0.0f64;
            for &b in &idx[a + 1..] {
                let q = points[b];
                let r = (p[0] - q[0]).hypot(p[1] - q[1]);
                if r > 0.0 {
                    best = best.max((fp - values[b]).abs() / r.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Result of a least-squares slope fit in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points_used: usize,
}

/// Slope of `log seminorm` against `log h`. Entries at or below
/// [`FIT_FLOOR`] are dropped; fewer than two usable entries is a degenerate
/// fit.
pub fn estimate_exponent(h_values: &[f64], seminorms: &[f64]) -> Result<ExponentFit> {
    assert_eq!(h_values.len(), seminorms.len());
    let pts: Vec<(f64, f64)> = h_values
        .iter()
        .zip(seminorms)
        .filter(|(h, s)| **h > 0.0 && **s > FIT_FLOOR && s.is_finite())
        .map(|(h, s)| (h.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit { floor: FIT_FLOOR });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit { floor: FIT_FLOOR });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(ExponentFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
        points_used: pts.len(),
    })
}
