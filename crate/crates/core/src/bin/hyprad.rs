use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hyprad::barriers::{defect, find_a_with, BarrierSpec};
use hyprad::collar::{assemble_l, collar_report, solve_w0_with, FixedPointOptions};
use hyprad::field::{FuchsianOperator, ScalarField};
use hyprad::geometry::{build_collar_chart, DomainFile, GeometryInfo, Grading};
use hyprad::interior::{solve_interior, InteriorSolution};
use hyprad::model::{solve_model, Extension, StripGrid};
use hyprad::pipeline::{
    chart_for_field, exit, matching_series, run_pipeline, validate_config, CollarConfig, Matching,
};
use hyprad::probe::{default_depth, dyadic_harness, expansion_check, optimality_probe, RegularityReport};
use hyprad::{Error, Result};

#[derive(Parser)]
#[command(name = "hyprad", version, about = "Hyperbolic radius of smooth planar domains")]
struct Cli {
    /// Worker threads (overrides HYPRAD_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline from a JSON run config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    #[command(subcommand)]
    Geometry(GeometryCmd),
    #[command(subcommand)]
    Solve(SolveCmd),
    #[command(subcommand)]
    Model(ModelCmd),
    #[command(subcommand)]
    Barriers(BarriersCmd),
    #[command(subcommand)]
    Probe(ProbeCmd),
}

#[derive(Subcommand)]
enum GeometryCmd {
    /// Perimeter, curvature range and reach as JSON.
    Info { domain: PathBuf },
}

#[derive(Subcommand)]
enum SolveCmd {
    /// Maximal solution on a Cartesian grid.
    Interior {
        domain: PathBuf,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Depth beyond which the level change is measured.
        #[arg(long, default_value_t = 0.2)]
        trusted_depth: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Renormalized collar problem.
    Collar(CollarArgs),
}

#[derive(Args)]
struct CollarArgs {
    domain: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long = "nT", default_value_t = 64)]
    n_t: usize,
    #[arg(long = "nY", default_value_t = 256)]
    n_y: usize,
    /// Interior solution (u.csv) for the matching data; `−κ` when absent.
    #[arg(long = "match")]
    match_field: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    w0_out: Option<PathBuf>,
    #[arg(long)]
    v_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtensionArg {
    Clamp,
    Zero,
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Solve `L₀ w₁ = k` on the half-strip.
    Run {
        #[arg(long, default_value_t = 0.25)]
        theta: f64,
        #[arg(long = "nT", default_value_t = 128)]
        n_t: usize,
        #[arg(long = "nY", default_value_t = 128)]
        n_y: usize,
        /// `const` (k = 1), `linear` (k = T/θ), `cosY` (k = cos(πY/θ)) or a field CSV.
        #[arg(long, default_value = "const")]
        k: String,
        #[arg(long, value_enum, default_value_t = ExtensionArg::Clamp)]
        extension: ExtensionArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BarriersCmd {
    /// Smallest admissible `A±` for a reference `w₀`.
    Scan {
        domain: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long)]
        w0: PathBuf,
        #[arg(long, default_value_t = hyprad::barriers::DEFAULT_A_MAX)]
        a_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ProbeCmd {
    /// Dyadic harness, expansion trend and exponent probe.
    All {
        domain: PathBuf,
        /// `w.csv,v.csv` from a collar solve.
        #[arg(long, value_delimiter = ',')]
        fields: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_curve(path: &Path) -> Result<Arc<hyprad::geometry::BoundaryCurve>> {
    Ok(Arc::new(DomainFile::load(path)?.curve()?))
}

fn run(config: &Path) -> Result<i32> {
    let raw = std::fs::read_to_string(config)?;
    let cfg = validate_config(&raw, config.parent())?;
    let result = run_pipeline(&cfg)?;
    let s = &result.summary;
    for (name, check) in &s.checks {
        let mark = if check.passed { "pass" } else { "FAIL" };
        let gate = if check.gated { "" } else { " (reported)" };
        println!("{name:<18} {mark}{gate}");
    }
    if let Some(e) = &s.error {
        eprintln!("error in {}: {}", e.stage, e.message);
    }
    println!("exit {}", s.exit_code);
    Ok(s.exit_code)
}

fn solve_collar(a: &CollarArgs) -> Result<i32> {
    let curve = load_curve(&a.domain)?;
    let chart = build_collar_chart(curve.clone(), a.delta, a.n_t, a.n_y, Grading::default())?;
    let (cfg, interior) = match &a.match_field {
        Some(path) => {
            let u = ScalarField::read_csv(path)?;
            let int = InteriorSolution::from_field(&curve, &u)?;
            (CollarConfig::default(), Some(int))
        }
        None => (
            CollarConfig {
                matching: Matching::Curvature,
                ..CollarConfig::default()
            },
            None,
        ),
    };
    let series = matching_series(&chart, interior.as_ref(), &cfg)?;
    let op = assemble_l(&chart)?;
    let w0 = solve_w0_with(&op, &chart, &hyprad::collar::default_w0_data(&chart))?;
    let state = hyprad::collar::solve_w_fuchsian_with(
        &op,
        &chart,
        &series.on_chart(&chart),
        &w0,
        None,
        FixedPointOptions::default(),
    )?;
    let report = collar_report(&op, &chart, &state)?;
    state.w.write_csv(&a.out)?;
    if let Some(p) = &a.w0_out {
        state.w0.write_csv(p)?;
    }
    if let Some(p) = &a.v_out {
        state.v.write_csv(p)?;
    }
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    println!(
        "iterations {} closure {:.3e} gamma {:.4} trace error {:.3e}",
        report.iterations, report.discrete_closure, report.gamma_fit, report.trace_error
    );
    Ok(if report.converged { exit::PASS } else { exit::CHECK_FAILED })
}

fn model_run(
    theta: f64,
    n_t: usize,
    n_y: usize,
    k: &str,
    ext: ExtensionArg,
    out: &Path,
    cert: Option<&Path>,
) -> Result<i32> {
    let grid = StripGrid::new(theta, n_t, n_y)?;
    let k_field = match k {
        "const" => grid.from_fn("k", |_, _| 1.0),
        "linear" => grid.from_fn("k", |t, _| t / theta),
        "cosY" => grid.from_fn("k", |_, y| (std::f64::consts::PI * y / theta).cos()),
        path => {
            let f = ScalarField::read_csv(path)?;
            if f.grid_hash != grid.hash() {
                return Err(Error::Shape(format!("{path} is not on this strip grid")));
            }
            f
        }
    };
    let ext = match ext {
        ExtensionArg::Clamp => Extension::Clamp,
        ExtensionArg::Zero => Extension::Zero,
    };
    let sol = solve_model(&grid, &k_field, ext)?;
    sol.w1.write_csv(out)?;
    let summary = sol.summary(&grid);
    if let Some(p) = cert {
        write_json(p, &summary)?;
    }
    println!("certificate {:.3e}", summary.certificate);
    Ok(exit::PASS)
}

fn barriers_scan(domain: &Path, delta: f64, w0_path: &Path, a_max: f64, out: &Path) -> Result<i32> {
    let curve = load_curve(domain)?;
    let w0 = ScalarField::read_csv(w0_path)?;
    let chart = chart_for_field(curve, &w0)?;
    if (chart.delta - delta).abs() > 1e-12 {
        return Err(Error::Shape(format!("w0 lives on δ = {}, not {delta}", chart.delta)));
    }
    let op = assemble_l(&chart)?;
    let found = find_a_with(&op, &chart, &w0, a_max)?;
    let plus = defect(&op, &chart, &BarrierSpec::new(w0.clone(), found.a_plus))?;
    let minus = defect(&op, &chart, &BarrierSpec::new(w0, found.a_minus))?;
    write_json(
        out,
        &json!({
            "delta": delta,
            "a_plus": found.a_plus,
            "a_minus": found.a_minus,
            "trials": found.trials,
            "defect_plus_sup": plus.sup_norm(),
            "defect_minus_sup": minus.sup_norm(),
        }),
    )?;
    println!("A+ = {}, A- = {}", found.a_plus, found.a_minus);
    Ok(exit::PASS)
}

fn probe_all(domain: &Path, fields: &[PathBuf], alpha: f64, depth: Option<usize>, seed: u64, out: &Path) -> Result<i32> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config {
            field: "alpha".into(),
            message: format!("must lie in (0, 1), got {alpha}"),
        });
    }
    let [w_path, v_path] = fields else {
        return Err(Error::Config {
            field: "fields".into(),
            message: "expected `w.csv,v.csv`".into(),
        });
    };
    let curve = load_curve(domain)?;
    let w = ScalarField::read_csv(w_path)?;
    let v = ScalarField::read_csv(v_path)?;
    let chart = chart_for_field(curve, &w)?;
    let op = assemble_l(&chart)?;
    let w0 = solve_w0_with(&op, &chart, &hyprad::collar::default_w0_data(&chart))?;
    let w_tilde = w.zip(&w0, "w_tilde", |a, b| a - b)?;
    let depth = depth.unwrap_or_else(|| default_depth(&chart));
    let f = hyprad::collar::apply_mw(&chart, &w, &w)?;
    let renorm = FuchsianOperator::renormalized(&chart);
    let harness = vec![
        dyadic_harness(&chart, Some(&renorm), &w_tilde, Some(&f), alpha, Some(depth), seed)?,
        dyadic_harness(&chart, None, &w, None, alpha, Some(depth), seed)?,
    ];
    let expansion = expansion_check(&chart, &v, &w_tilde, depth, 0.0);
    let probe = optimality_probe(&chart, &w, 0.5, 4);
    let gamma = hyprad::collar::fit_gamma(&chart, &w_tilde);
    let report = RegularityReport::assemble(harness, Some(expansion), Some(probe), gamma);
    write_json(out, &report)?;
    for (name, ok) in &report.flags {
        println!("{name:<22} {ok}");
    }
    Ok(exit::PASS)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config } => run(&config),
        Command::Geometry(GeometryCmd::Info { domain }) => {
            let curve = load_curve(&domain)?;
            println!("{}", serde_json::to_string_pretty(&GeometryInfo::of(&curve))?);
            Ok(exit::PASS)
        }
        Command::Solve(SolveCmd::Interior {
            domain,
            h,
            tol,
            trusted_depth,
            out,
            report,
        }) => {
            let curve = load_curve(&domain)?;
            let sol = solve_interior(&curve, h, tol, trusted_depth)?;
            sol.u.write_csv(&out)?;
            if let Some(p) = report {
                write_json(&p, &sol.report)?;
            }
            println!(
                "levels {} interior change {:.3e}",
                sol.report.outer_levels.len(),
                sol.report.interior_change
            );
            Ok(if sol.report.converged { exit::PASS } else { exit::CHECK_FAILED })
        }
        Command::Solve(SolveCmd::Collar(args)) => solve_collar(&args),
        Command::Model(ModelCmd::Run {
            theta,
            n_t,
            n_y,
            k,
            extension,
            out,
            certificate,
        }) => model_run(theta, n_t, n_y, &k, extension, &out, certificate.as_deref()),
        Command::Barriers(BarriersCmd::Scan {
            domain,
            delta,
            w0,
            a_max,
            out,
        }) => barriers_scan(&domain, delta, &w0, a_max, &out),
        Command::Probe(ProbeCmd::All {
            domain,
            fields,
            alpha,
            depth,
            seed,
            out,
        }) => probe_all(&domain, &fields, alpha, depth, seed, &out),
    }
}

fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => exit::USAGE,
        e if e.is_geometry_or_config() => exit::GEOMETRY_OR_CONFIG,
        _ => exit::CHECK_FAILED,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var("HYPRAD_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads.filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hyprad: {e}");
            exit_code_of(&e)
        }
    };
    ExitCode::from(code as u8)
}
