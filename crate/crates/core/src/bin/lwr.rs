use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use lwr_core::archive::{export_plot_data, read_archive, write_archive};
use lwr_core::diagnostics::{exact_constrained_riemann, DiagnosticsReport};
use lwr_core::flux::FluxModel;
use lwr_core::run::{run_refinement, run_scenario, RunArchive, RunError};
use lwr_core::scenario::Scenario;

const EXIT_INVALID: u8 = 2;
const EXIT_SCHEME: u8 = 3;
const EXIT_DIAGNOSTICS: u8 = 4;

#[derive(Parser)]
#[command(name = "lwr", version, about = "LWR traffic solver with moving flux constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its archive.
    Simulate {
        scenario: PathBuf,
        /// Archive directory (default: <scenario>.run next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run at dx/K and report the L1 distance of the final states.
        #[arg(long)]
        refine: Option<u32>,
        /// Exit with status 4 if any diagnostic check fails.
        #[arg(long)]
        strict: bool,
        /// Snapshot times, overriding the scenario's.
        #[arg(long, value_delimiter = ',')]
        snapshots: Option<Vec<f64>>,
        /// Also write plot files into <out>/plot.
        #[arg(long)]
        plot: bool,
    },
    /// Re-run an archived scenario and compare against the archive.
    Check { archive: PathBuf },
    /// Write plot files for an existing archive.
    Export {
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the exact solution of a constrained Riemann problem.
    Riemann {
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        left: f64,
        #[arg(long)]
        right: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
}

enum Failure {
    Invalid(anyhow::Error),
    Scheme(anyhow::Error),
    Diagnostics(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Validation(v) => Failure::Invalid(v.into()),
            RunError::Scheme(s) => Failure::Scheme(s.into()),
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("LWR_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring LWR_THREADS={v}"),
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path)
        .map_err(|e| Failure::Invalid(anyhow::Error::new(e).context(path.display().to_string())))
}

fn print_summary(label: &str, report: &DiagnosticsReport) {
    println!("{label}");
    println!("  {:<16} {:>8} {:>8} {:>14}", "check", "records", "failed", "worst margin");
    for s in report.summary() {
        println!(
            "  {:<16} {:>8} {:>8} {:>14.3e}",
            s.check.name(),
            s.count,
            s.failures,
            s.worst_margin
        );
    }
}

fn default_out(scenario: &Path) -> PathBuf {
    let mut p = scenario.to_path_buf();
    p.set_extension("run");
    p
}

fn save(archive: &RunArchive, dir: &Path, plot: bool) -> Result<(), Failure> {
    write_archive(archive, dir).with_context(|| format!("writing {}", dir.display()))?;
    if plot {
        export_plot_data(archive, &dir.join("plot"))
            .with_context(|| format!("writing plot files under {}", dir.display()))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn simulate(
    path: &Path,
    out: Option<PathBuf>,
    refine: Option<u32>,
    strict: bool,
    snapshots: Option<Vec<f64>>,
    plot: bool,
) -> Result<(), Failure> {
    let mut scenario = load(path)?;
    if let Some(s) = snapshots {
        scenario.output.snapshots = s;
    }
    let out = out.unwrap_or_else(|| default_out(path));
    let mut reports = Vec::new();
    match refine {
        Some(k) if k >= 2 => {
            let (coarse, fine, d) = run_refinement(&scenario, k)?;
            save(&coarse, &out, plot)?;
            save(&fine, &out.join(format!("refined_{k}")), plot)?;
            println!("L1 distance between dx and dx/{k} at t = {}: {d:e}", coarse.final_state.time);
            reports.push(("dx", coarse.report));
            reports.push(("dx/k", fine.report));
        }
        Some(k) => {
            return Err(Failure::Invalid(anyhow::anyhow!(
                "--refine needs a factor of at least 2, got {k}"
            )))
        }
        None => {
            let archive = run_scenario(&scenario)?;
            save(&archive, &out, plot)?;
            reports.push(("diagnostics", archive.report));
        }
    }
    let mut failed = 0;
    for (label, r) in &reports {
        print_summary(label, r);
        failed += r.failures().count();
    }
    if strict && failed > 0 {
        return Err(Failure::Diagnostics(format!("{failed} check records failed")));
    }
    Ok(())
}

fn check(dir: &Path) -> Result<(), Failure> {
    let stored = read_archive(dir).with_context(|| format!("reading {}", dir.display()))?;
    let fresh = run_scenario(&stored.scenario)?;
    print_summary("diagnostics", &fresh.report);
    let mut problems = Vec::new();
    if fresh.snapshots != stored.snapshots || fresh.final_state != stored.final_state {
        problems.push("cell values differ from the archive".to_string());
    }
    if fresh.overlay != stored.overlay {
        problems.push("interface overlay differs from the archive".to_string());
    }
    if fresh.report != stored.report {
        problems.push("diagnostics differ from the archive".to_string());
    }
    let failed = fresh.report.failures().count();
    if failed > 0 {
        problems.push(format!("{failed} check records failed"));
    }
    if problems.is_empty() {
        println!("archive reproduced, all checks passed");
        Ok(())
    } else {
        Err(Failure::Diagnostics(problems.join("; ")))
    }
}

#[allow(clippy::too_many_arguments)]
fn riemann(
    s: f64,
    q: f64,
    left: f64,
    right: f64,
    t: f64,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<(), Failure> {
    if !(t > 0.0) || !(x_max > x_min) || points < 2 {
        return Err(Failure::Invalid(anyhow::anyhow!(
            "need t > 0, x_max > x_min and at least two points"
        )));
    }
    for (name, v) in [("left", left), ("right", right)] {
        lwr_core::flux::check_density(v).with_context(|| format!("--{name}"))?;
    }
    let m = FluxModel::quadratic();
    println!("x,rho");
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        let rho = exact_constrained_riemann(&m, s, q, left, right, x / t)
            .context("constraint")?;
        println!("{x:?},{rho:?}");
    }
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            refine,
            strict,
            snapshots,
            plot,
        } => simulate(&scenario, out, refine, strict, snapshots, plot),
        Command::Check { archive } => check(&archive),
        Command::Export { archive, out } => read_archive(&archive)
            .with_context(|| format!("reading {}", archive.display()))
            .and_then(|a| export_plot_data(&a, &out).context("writing plot files"))
            .map(|paths| println!("wrote {} files to {}", paths.len(), out.display()))
            .map_err(Failure::from),
        Command::Riemann {
            s,
            q,
            left,
            right,
            t,
            x_min,
            x_max,
            points,
        } => riemann(s, q, left, right, t, x_min, x_max, points),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Scheme(e)) => {
            eprintln!("scheme error: {e:#}");
            ExitCode::from(EXIT_SCHEME)
        }
        Err(Failure::Diagnostics(msg)) => {
            eprintln!("diagnostics failed: {msg}");
            ExitCode::from(EXIT_DIAGNOSTICS)
        }
    }
}
