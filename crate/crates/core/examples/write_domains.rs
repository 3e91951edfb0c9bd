//! Write the built-in domains as JSON domain files.
//!
//! cargo run --release --example write_domains -- data

use std::path::PathBuf;

use hyprad::domains;
use hyprad::geometry::GeometryInfo;

fn main() -> hyprad::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let files = [
        ("disk", domains::disk()),
        ("ellipse_2_1", domains::ellipse(2.0, 1.0)),
        ("cusp_0.5", domains::cusp(0.5, domains::CUSP_EPS, domains::CUSP_HARMONICS)),
        ("cusp_0.8", domains::cusp(0.8, domains::CUSP_EPS, domains::CUSP_HARMONICS)),
    ];
    for (stem, domain) in files {
        let path = dir.join(format!("{stem}.json"));
        domain.save(&path)?;
        let info = GeometryInfo::of(&domain.curve()?);
        println!(
            "{:<28} perimeter {:.6}  kappa [{:.4}, {:.4}]  reach {:.4}",
            path.display(),
            info.perimeter,
            info.kappa_min,
            info.kappa_max,
            info.reach
        );
    }
    Ok(())
}
