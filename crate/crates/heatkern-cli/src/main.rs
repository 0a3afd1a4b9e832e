mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Heat-kernel perturbation engine: evaluate model kernels, build
/// Neumann-series perturbations, run certificate scans, and export
/// plot-ready data.
#[derive(Parser)]
#[command(name = "heatkern", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by scenario-driven subcommands.
#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for machine reports
    /// (default: $HEATKERN_OUT, then ./reports)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for certificate execution (results do not depend on
    /// this)
    #[arg(long)]
    workers: Option<usize>,
    /// Override the grid's smallest time
    #[arg(long)]
    t_min: Option<f64>,
    /// Override the grid's largest time
    #[arg(long)]
    t_max: Option<f64>,
    /// Override the number of grid times per decade
    #[arg(long)]
    per_decade: Option<usize>,
    /// Shorthand for --per-decade
    #[arg(long)]
    grid_density: Option<usize>,
    /// Override the perturbation strength
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the scenario's base kernel at one probe
    Eval {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coordinates of x
        #[arg(long)]
        x: String,
        /// Comma-separated coordinates of y
        #[arg(long)]
        y: String,
        #[arg(long)]
        t: f64,
    },
    /// Time-integrate the kernel into a Green function value
    Green {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Relative tolerance of the time quadrature
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Evaluate the Neumann-series perturbed kernel at one probe
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        t: f64,
    },
    /// Run the scenario's certificate list and write reports
    Certify {
        #[command(flatten)]
        common: Common,
    },
    /// Scan the small-perturbation tail along the exhaustion
    Tail {
        #[command(flatten)]
        common: Common,
        /// Largest exhaustion level to scan
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Pin the first argument at the reference point
        #[arg(long)]
        semismall: bool,
    },
    /// Verify the Martin transform round trip on the caloric test family
    Martin {
        #[command(flatten)]
        common: Common,
    },
    /// Run a single named certificate
    Scan {
        #[command(flatten)]
        common: Common,
        /// Certificate name (as in the scenario's certificate list)
        #[arg(long)]
        certificate: String,
    },
    /// Convert persisted reports into gnuplot-ready data files
    ExportPlot {
        /// Directory holding report JSON files
        #[arg(long)]
        reports: PathBuf,
        /// Output directory (default: the reports directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("heatkern: {e}");
            3
        }
    };
    std::process::exit(code);
}
