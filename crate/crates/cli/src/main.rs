//! Command line front end: run or validate scenario files, list the presets
//! they can name.

mod experiments;
mod scenario;
mod svg;

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "viscowave",
    about = "Damped wave simulations and ray-geometry checks driven by scenario files",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace, report, and plot files.
    Run {
        scenario: PathBuf,
        /// Write outputs here instead of the scenario's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sample sweeps; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Reject unknown scenario keys instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Check a scenario and print its canonical resolved form.
    Validate {
        scenario: PathBuf,
        /// Reject unknown scenario keys instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// List the presets scenario files can name.
    ListPresets,
}

fn main() {
    if let Err(error) = dispatch(Cli::parse()) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn base_dir(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

fn load_resolved(
    path: &Path,
    strict: bool,
    seed: Option<u64>,
) -> Result<scenario::Scenario> {
    let (mut raw, warnings) = scenario::load(path, strict)?;
    for key in warnings {
        eprintln!("warning: unknown key {key}");
    }
    if let Some(seed) = seed {
        raw.seed = seed;
    }
    Ok(raw.resolve_with_base(base_dir(path))?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario: path,
            output_dir,
            seed,
            threads,
            strict,
        } => {
            if let Some(n) = threads {
                // a second build_global in one process is fine to ignore;
                // the pool only affects throughput, not results
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let resolved = load_resolved(&path, strict, seed)?;
            let out_dir = output_dir.unwrap_or_else(|| {
                PathBuf::from(resolved.output_dir.clone().expect("resolve fills output_dir"))
            });
            let summary = experiments::run(&resolved, base_dir(&path), &out_dir)?;
            println!("{summary}");
        }
        Command::Validate { scenario: path, strict } => {
            let resolved = load_resolved(&path, strict, None)?;
            print!("{}", resolved.canonical_toml());
        }
        Command::ListPresets => {
            print!("{}", PRESETS);
        }
    }
    Ok(())
}

const PRESETS: &str = "\
experiments:
  simulate         trace the energy of one run
  decay-fit        fit gamma in E ~ A exp(-gamma t) over a window
  observability    ratio E(0) / dissipated over seeded random draws
  gcc-check        do all rays reach the damping region in time
  geodesic-trace   trace rays through a metric
  hessian-cert     convexity and escape-time certificate for a field

coefficient presets ([coefficients]):
  constant              rho, k, strength
  diag-linear           base = [kx, ky], slope = [sx, sy], strength
  hyperbolic-halfplane  y0, strength
  table                 table = path; rows: rho k11 [k12 k22] a b

initial data ([initial]):
  standing-wave  amplitude, modes_u, modes_v (one mode per axis)
  gaussian-bump  amplitude, center, sigma
  random-seeded  amplitude; drawn from the run seed

damping regions ([omega]):
  empty | collar (width) | edges (width, edges = [left|right|bottom|top]) | cells (mask)

metrics (geodesic-trace, hessian-cert):
  from-coefficients | euclidean | hyperbolic

fields (hessian-cert):
  half-squared-distance | hyperbolic-squared-distance
";
