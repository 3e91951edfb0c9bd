//! Full pipeline from a run config, printing the summary checks.
//!
//! cargo run --release --example run_pipeline -- data/ellipse.run.json

use std::path::Path;

use hyprad::pipeline::{run_pipeline, validate_config};

fn main() -> hyprad::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ellipse.run.json".into());
    let path = Path::new(&path);
    let cfg = validate_config(&std::fs::read_to_string(path)?, path.parent())?;
    let result = run_pipeline(&cfg)?;
    for (name, check) in &result.summary.checks {
        println!(
            "{name:<18} {:<5} {}",
            if check.passed { "pass" } else { "FAIL" },
            if check.gated { "gated" } else { "" }
        );
    }
    println!("exit code {} -> {}", result.summary.exit_code, cfg.output_dir.display());
    Ok(())
}
